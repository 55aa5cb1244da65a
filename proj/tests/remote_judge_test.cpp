#include "pairrank/remote_judge.hpp"

#include <cmath>
#include <cstdlib>

#include <gtest/gtest.h>

#include "mock_server.hpp"
#include "pairrank/pipeline.hpp"
#include "test_support.hpp"

namespace pairrank {
namespace {

using testsupport::logprob_response;
using testsupport::make_set;
using testsupport::MockCompletionServer;
using testsupport::sampling_response;

RemoteJudgeSpec spec_for(const MockCompletionServer& server, RemoteMode mode) {
  RemoteJudgeSpec spec;
  spec.endpoint = server.endpoint();
  spec.model_name = "mock-model";
  spec.mode = mode;
  spec.retry.max_retries = 2;
  spec.retry.timeout_seconds = 5;
  spec.retry.backoff_ms = 1;
  return spec;
}

TEST(RemoteJudgeLabelProbability, NormalizesScriptedLogProbabilities) {
  // The oracle: raw label masses 0.3 and 0.1 must normalize to 0.75.
  MockCompletionServer server([](const nlohmann::json&) {
    return logprob_response(
        {{" A", std::log(0.3)}, {" B", std::log(0.1)}, {" C", std::log(0.05)}});
  });
  RemoteJudge judge(spec_for(server, RemoteMode::kLabelProbability),
                    comparative_template_1());
  const CandidateSet set = make_set("lp", {1.0, 2.0});
  const Comparison result = judge.compare(set, 0, 1);
  EXPECT_NEAR(*result.probability, 0.75, 1e-9);
  EXPECT_EQ(result.decision, 1);
  EXPECT_NE(result.tag.find("lp_first"), std::string::npos);

  const nlohmann::json request = server.last_request();
  EXPECT_EQ(request.at("model"), "mock-model");
  EXPECT_EQ(request.at("max_tokens"), 1);
  EXPECT_EQ(request.at("logprobs"), 20);
  EXPECT_DOUBLE_EQ(request.at("temperature").get<double>(), 0.0);
  const std::string prompt = request.at("prompt").get<std::string>();
  EXPECT_NE(prompt.find(set.candidates[0]), std::string::npos);
  EXPECT_NE(prompt.find(set.candidates[1]), std::string::npos);
}

TEST(RemoteJudgeLabelProbability, CaseInsensitiveTokenFallback) {
  MockCompletionServer server([](const nlohmann::json&) {
    return logprob_response({{"a", std::log(0.4)}, {"b", std::log(0.4)}});
  });
  RemoteJudge judge(spec_for(server, RemoteMode::kLabelProbability),
                    comparative_template_1());
  const Comparison result = judge.compare(make_set("ci", {1.0, 2.0}), 0, 1);
  EXPECT_NEAR(*result.probability, 0.5, 1e-12);
  EXPECT_EQ(result.decision, 0);  // 0.5 is not strictly above the threshold
}

TEST(RemoteJudgeLabelProbability, MissingLabelTokenIsAProtocolError) {
  MockCompletionServer server([](const nlohmann::json&) {
    return logprob_response({{" A", std::log(0.3)}, {" X", std::log(0.1)}});
  });
  RemoteJudge judge(spec_for(server, RemoteMode::kLabelProbability),
                    comparative_template_1());
  EXPECT_THROW(judge.compare(make_set("m", {1.0, 2.0}), 0, 1), ProtocolError);
}

TEST(RemoteJudgeLabelProbability, MissingLogprobFieldsIsAProtocolError) {
  MockCompletionServer server([](const nlohmann::json&) {
    return nlohmann::json{{"choices", {{{"text", " A"}}}}};
  });
  RemoteJudge judge(spec_for(server, RemoteMode::kLabelProbability),
                    comparative_template_1());
  EXPECT_THROW(judge.compare(make_set("m", {1.0, 2.0}), 0, 1), ProtocolError);
}

TEST(RemoteJudgeSampling, ScriptedWinFraction) {
  MockCompletionServer server([](const nlohmann::json& request) {
    EXPECT_EQ(request.at("n"), 5);
    return sampling_response({"Summary A", "I prefer Summary A.",
                              "summary a", "Summary B", "Summary B wins"});
  });
  RemoteJudgeSpec spec = spec_for(server, RemoteMode::kSampling);
  spec.samples = 5;
  RemoteJudge judge(spec, comparative_template_1());
  const Comparison result = judge.compare(make_set("s", {1.0, 2.0}), 0, 1);
  EXPECT_DOUBLE_EQ(*result.probability, 0.6);
  EXPECT_EQ(result.decision, 1);
  EXPECT_NE(result.tag.find("wins=3"), std::string::npos);
  EXPECT_NE(result.tag.find("parsed=5"), std::string::npos);
}

TEST(RemoteJudgeSampling, AllUnparseableIsNoDecision) {
  MockCompletionServer server([](const nlohmann::json&) {
    return sampling_response({"??", "no answer"});
  });
  RemoteJudgeSpec spec = spec_for(server, RemoteMode::kSampling);
  spec.samples = 2;
  RemoteJudge judge(spec, comparative_template_1());
  EXPECT_THROW(judge.compare(make_set("u", {1.0, 2.0}), 0, 1),
               NoDecisionError);
}

TEST(RemoteJudge, RetriesTransientFailuresThenSucceeds) {
  int calls = 0;
  MockCompletionServer server(
      [&calls](const nlohmann::json&) -> nlohmann::json {
        if (++calls < 3) return {{"__status", 500}};
        return logprob_response({{" A", std::log(0.5)}, {" B", std::log(0.25)}});
      });
  RemoteJudge judge(spec_for(server, RemoteMode::kLabelProbability),
                    comparative_template_1());
  const Comparison result = judge.compare(make_set("r", {1.0, 2.0}), 0, 1);
  EXPECT_NEAR(*result.probability, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(server.hits(), 3);
}

TEST(RemoteJudge, GivesUpAfterRetriesAgainstADeadEndpoint) {
  RemoteJudgeSpec spec;
  spec.endpoint = "http://127.0.0.1:1";  // nothing listens here
  spec.model_name = "mock";
  spec.retry.max_retries = 1;
  spec.retry.timeout_seconds = 1;
  spec.retry.backoff_ms = 1;
  RemoteJudge judge(spec, comparative_template_1());
  EXPECT_THROW(judge.compare(make_set("d", {1.0, 2.0}), 0, 1),
               JudgeUnavailableError);
}

TEST(RemoteJudge, ClientErrorsAreNotRetried) {
  MockCompletionServer server([](const nlohmann::json&) -> nlohmann::json {
    return {{"__status", 401}};
  });
  RemoteJudge judge(spec_for(server, RemoteMode::kLabelProbability),
                    comparative_template_1());
  EXPECT_THROW(judge.compare(make_set("c", {1.0, 2.0}), 0, 1), ProtocolError);
  EXPECT_EQ(server.hits(), 1);
}

TEST(RemoteJudge, SendsTheApiKeyFromTheConfiguredEnvironmentVariable) {
  MockCompletionServer server([](const nlohmann::json&) {
    return logprob_response({{" A", -1.0}, {" B", -2.0}});
  });
  RemoteJudgeSpec spec = spec_for(server, RemoteMode::kLabelProbability);
  spec.api_key_env = "PAIRRANK_TEST_KEY";
  ::setenv("PAIRRANK_TEST_KEY", "sekret", 1);
  RemoteJudge judge(spec, comparative_template_1());
  judge.compare(make_set("k", {1.0, 2.0}), 0, 1);
  EXPECT_EQ(server.last_authorization(), "Bearer sekret");
  ::unsetenv("PAIRRANK_TEST_KEY");
}

TEST(RemoteScorer, ParsesGeneratedScores) {
  MockCompletionServer server([](const nlohmann::json& request) {
    EXPECT_EQ(request.at("max_tokens"), 5);
    EXPECT_DOUBLE_EQ(request.at("temperature").get<double>(), 1.0);
    return sampling_response({"Score: 7"});
  });
  RemoteScorer scorer(spec_for(server, RemoteMode::kLabelProbability),
                      scoring_template_2());
  const ScoredCandidate scored = scorer.score(make_set("sc", {1.0, 2.0}), 1);
  EXPECT_DOUBLE_EQ(scored.score, 7.0);
  EXPECT_EQ(scored.text, "Score: 7");  // raw text kept for provenance
}

TEST(RemoteScorer, DrivesTheAbsolutePipelineEndToEnd) {
  // Scripted scores keyed off the candidate text, so the ranking is known.
  MockCompletionServer server([](const nlohmann::json& request) {
    const std::string prompt = request.at("prompt").get<std::string>();
    int score = 1;
    if (prompt.find("abs-candidate-0") != std::string::npos) score = 9;
    if (prompt.find("abs-candidate-1") != std::string::npos) score = 4;
    return sampling_response({"Score: " + std::to_string(score)});
  });
  RunConfig config;
  config.mode = AssessMode::kAbsolute;
  config.judge = JudgeKind::kRemote;
  config.remote = spec_for(server, RemoteMode::kLabelProbability);

  PipelineInputs inputs;
  inputs.data = {make_set("abs", {9.0, 4.0, 1.0})};
  inputs.comparative_templates = {comparative_template_1()};
  inputs.scoring_template = scoring_template_2();
  const RemoteJudgeSpec spec = config.remote;
  inputs.scorer_factory = [spec](const PromptTemplate& tmpl, std::uint64_t) {
    return std::make_shared<RemoteScorer>(spec, tmpl);
  };
  const RunReport report = run_pipeline(config, inputs);
  const auto& instance = report.runs.at(0).instances.at(0);
  ASSERT_TRUE(instance.outcome.has_value());
  EXPECT_EQ(instance.outcome->scores, (std::vector<double>{9.0, 4.0, 1.0}));
  EXPECT_EQ(instance.outcome->ranks, (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_DOUBLE_EQ(report.runs.at(0).metrics.summary->mean, 1.0);
}

TEST(RemoteScorer, UnparseableScoreTextFails) {
  MockCompletionServer server([](const nlohmann::json&) {
    return sampling_response({"excellent"});
  });
  RemoteScorer scorer(spec_for(server, RemoteMode::kLabelProbability),
                      scoring_template_1());
  EXPECT_THROW(scorer.score(make_set("sc", {1.0, 2.0}), 0), ScoreParseError);
}

}  // namespace
}  // namespace pairrank
