#include "pairrank/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace pairrank {
namespace {

namespace fs = std::filesystem;
using testsupport::make_set;
using testsupport::shuffled_scores;

void write_dataset(const fs::path& path,
                   const std::vector<CandidateSet>& sets) {
  std::ofstream out(path, std::ios::binary);
  for (const auto& set : sets) {
    nlohmann::json line{{"instance_id", set.instance_id},
                        {"context", set.context},
                        {"candidates", set.candidates},
                        {"attribute", set.attribute}};
    if (set.gold_scores) line["gold_scores"] = *set.gold_scores;
    out << line.dump() << '\n';
  }
}

std::vector<CandidateSet> distinct_instances(int count, int n,
                                             std::uint64_t seed) {
  std::vector<CandidateSet> sets;
  for (int k = 0; k < count; ++k) {
    sets.push_back(make_set("inst-" + std::to_string(k),
                            shuffled_scores(n, seed + k)));
  }
  return sets;
}

PipelineInputs synthetic_inputs(std::vector<CandidateSet> data,
                                SyntheticJudgeSpec spec,
                                double scorer_sigma = 0.0) {
  PipelineInputs inputs;
  inputs.data = std::move(data);
  inputs.comparative_templates = {comparative_template_1()};
  inputs.scoring_template = scoring_template_1();
  inputs.judge_factory = [spec](const PromptTemplate&,
                                std::uint64_t noise_seed) {
    SyntheticJudgeSpec derived = spec;
    derived.noise_seed = noise_seed;
    return std::make_shared<SyntheticJudge>(derived);
  };
  inputs.scorer_factory = [scorer_sigma](const PromptTemplate&,
                                         std::uint64_t noise_seed) {
    return std::make_shared<SyntheticScorer>(scorer_sigma, noise_seed);
  };
  return inputs;
}

/// Judge whose scripted pairs always fail, for the tolerance paths.
class FlakyJudge final : public ComparativeJudge {
 public:
  FlakyJudge(SyntheticJudgeSpec spec, int bad_first, int bad_second)
      : inner_(spec), bad_first_(bad_first), bad_second_(bad_second) {}

  Comparison compare(const CandidateSet& set, int i, int j) override {
    if (i == bad_first_ && j == bad_second_) {
      throw JudgeUnavailableError("scripted failure");
    }
    return inner_.compare(set, i, j);
  }

  std::string fingerprint() const override {
    return "flaky-" + inner_.fingerprint();
  }

 private:
  SyntheticJudge inner_;
  int bad_first_;
  int bad_second_;
};

RunConfig base_config() {
  RunConfig config;
  config.judge = JudgeKind::kSynthetic;
  config.strategy = Strategy::kFull;
  config.plan_seed = 11;
  config.noise_seed = 12;
  return config;
}

TEST(Pipeline, PerfectJudgeRecoversGoldRanksExactly) {
  RunConfig config = base_config();
  config.synthetic.sharpness = 50.0;
  const auto report = run_pipeline(
      config, synthetic_inputs(distinct_instances(10, 6, 100),
                               config.synthetic));
  ASSERT_EQ(report.runs.size(), 1u);
  const SingleRun& run = report.runs[0];
  ASSERT_TRUE(run.metrics.summary.has_value());
  EXPECT_DOUBLE_EQ(run.metrics.summary->mean, 1.0);
  EXPECT_EQ(run.metrics.summary->used, 10);
  for (const auto& instance : run.instances) {
    EXPECT_EQ(instance.record_count, 30);  // plan budget N(N-1)
  }
  EXPECT_EQ(run.judge_calls, 300u);
  ASSERT_TRUE(run.priors.has_value());
  EXPECT_DOUBLE_EQ(run.priors->first, 0.5);  // unbiased on the full plan
  EXPECT_TRUE(run.priors->from_symmetric_plan);
}

TEST(Pipeline, ReportsAreDeterministic) {
  RunConfig config = base_config();
  config.strategy = Strategy::kRandom;
  config.budget = 12;
  config.synthetic.sharpness = 2.0;
  config.synthetic.noise = SyntheticNoise::kSampled;
  config.synthetic.sample_count = 6;
  config.concurrency = 4;
  const auto inputs = [&] {
    return synthetic_inputs(distinct_instances(6, 6, 7), config.synthetic);
  };
  const std::string a = report_to_json(run_pipeline(config, inputs())).dump();
  const std::string b = report_to_json(run_pipeline(config, inputs())).dump();
  EXPECT_EQ(a, b);
}

TEST(Pipeline, CacheReplayMakesZeroJudgeCallsAndIdenticalReports) {
  const fs::path dir = fs::temp_directory_path() / "pairrank_pipe_cache";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_dataset(dir / "data.jsonl", distinct_instances(4, 5, 31));

  RunConfig config = base_config();
  config.dataset_path = (dir / "data.jsonl").string();
  config.cache_path = (dir / "cache.jsonl").string();
  config.output_dir = (dir / "out").string();
  config.synthetic.sharpness = 3.0;

  const auto cold = run_pipeline(config);
  EXPECT_EQ(cold.runs[0].judge_calls, 4u * 20u);
  EXPECT_EQ(cold.runs[0].cache_hits, 0u);

  const auto warm = run_pipeline(config);
  EXPECT_EQ(warm.runs[0].judge_calls, 0u);
  EXPECT_EQ(warm.runs[0].cache_hits, 4u * 20u);
  const auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string first_warm = read(dir / "out" / "report.json");

  const auto warm_again = run_pipeline(config);
  EXPECT_EQ(warm_again.runs[0].judge_calls, 0u);
  EXPECT_EQ(read(dir / "out" / "report.json"), first_warm);
  EXPECT_EQ(report_to_json(warm).dump(), report_to_json(warm_again).dump());
  fs::remove_all(dir);
}

TEST(Pipeline, ExtremeBiasIsRepairedByDebiasing) {
  RunConfig config = base_config();
  config.synthetic.sharpness = 1.0;
  config.synthetic.positional_logit_bias = 5.0;
  config.debias = true;
  const auto report = run_pipeline(
      config, synthetic_inputs(distinct_instances(10, 6, 50),
                               config.synthetic));
  const SingleRun& run = report.runs[0];
  ASSERT_TRUE(run.calibration.has_value());
  ASSERT_TRUE(run.raw_metrics.has_value());
  EXPECT_GT(run.calibration->prior_first, 0.9);  // the bias is extreme
  ASSERT_TRUE(run.metrics.accuracy.has_value());
  ASSERT_TRUE(run.raw_metrics->accuracy.has_value());
  EXPECT_GE(*run.metrics.accuracy, *run.raw_metrics->accuracy);
  EXPECT_DOUBLE_EQ(*run.metrics.accuracy, 1.0);
  ASSERT_TRUE(run.metrics.summary.has_value());
  EXPECT_DOUBLE_EQ(run.metrics.summary->mean, 1.0);
}

TEST(Pipeline, DebiasRequiresSoftProbabilities) {
  RunConfig config = base_config();
  config.debias = true;
  auto inputs = synthetic_inputs(distinct_instances(2, 4, 9),
                                 config.synthetic);
  // A judge that withholds its probabilities.
  class HardJudge final : public ComparativeJudge {
   public:
    explicit HardJudge(SyntheticJudgeSpec spec) : inner_(spec) {}
    Comparison compare(const CandidateSet& set, int i, int j) override {
      Comparison c = inner_.compare(set, i, j);
      c.probability.reset();
      return c;
    }
    std::string fingerprint() const override { return "hard"; }

   private:
    SyntheticJudge inner_;
  };
  inputs.judge_factory = [](const PromptTemplate&, std::uint64_t) {
    return std::make_shared<HardJudge>(SyntheticJudgeSpec{});
  };
  EXPECT_THROW(run_pipeline(config, inputs), CalibrationImpossibleError);
}

TEST(Pipeline, RepeatsDeriveDistinctSeedsAndAverage) {
  RunConfig config = base_config();
  config.repeats = 3;
  config.strategy = Strategy::kRandom;
  config.budget = 10;
  config.synthetic.sharpness = 1.5;
  config.synthetic.noise = SyntheticNoise::kSampled;
  config.synthetic.sample_count = 4;
  const auto report = run_pipeline(
      config, synthetic_inputs(distinct_instances(5, 6, 77),
                               config.synthetic));
  ASSERT_EQ(report.runs.size(), 3u);
  EXPECT_NE(report.runs[0].noise_seed, report.runs[1].noise_seed);
  EXPECT_NE(report.runs[1].plan_seed, report.runs[2].plan_seed);
  EXPECT_EQ(report.means.runs, 3);
  ASSERT_TRUE(report.means.summary_spearman.has_value());
  double mean = 0.0;
  for (const auto& run : report.runs) mean += run.metrics.summary->mean;
  EXPECT_NEAR(*report.means.summary_spearman, mean / 3.0, 1e-12);
}

TEST(Pipeline, OneRunPerComparativeTemplate) {
  RunConfig config = base_config();
  config.template_paths = {"builtin:1", "builtin:2"};
  auto inputs = synthetic_inputs(distinct_instances(3, 4, 5),
                                 config.synthetic);
  inputs.comparative_templates = {comparative_template_1(),
                                  comparative_template_2()};
  const auto report = run_pipeline(config, inputs);
  ASSERT_EQ(report.runs.size(), 2u);
  EXPECT_EQ(report.runs[0].template_index, 0);
  EXPECT_EQ(report.runs[1].template_index, 1);
  EXPECT_NE(report.runs[0].template_fingerprint,
            report.runs[1].template_fingerprint);
  EXPECT_EQ(report.per_template.size(), 2u);
}

TEST(Pipeline, AbsoluteModeRanksByParsedScores) {
  const fs::path dir = fs::temp_directory_path() / "pairrank_pipe_abs";
  fs::remove_all(dir);
  fs::create_directories(dir);

  RunConfig config = base_config();
  config.mode = AssessMode::kAbsolute;
  config.cache_path = (dir / "cache.jsonl").string();
  auto inputs = synthetic_inputs(distinct_instances(4, 5, 13),
                                 config.synthetic);
  inputs.cache = std::make_shared<ComparisonCache>(config.cache_path);
  const auto report = run_pipeline(config, inputs);
  const SingleRun& run = report.runs[0];
  ASSERT_TRUE(run.metrics.summary.has_value());
  EXPECT_DOUBLE_EQ(run.metrics.summary->mean, 1.0);
  EXPECT_EQ(run.judge_calls, 4u * 5u);
  EXPECT_FALSE(run.priors.has_value());  // no comparisons in this mode

  auto replay_inputs = synthetic_inputs(distinct_instances(4, 5, 13),
                                        config.synthetic);
  replay_inputs.cache = std::make_shared<ComparisonCache>(config.cache_path);
  const auto replay = run_pipeline(config, replay_inputs);
  EXPECT_EQ(replay.runs[0].judge_calls, 0u);
  EXPECT_EQ(replay.runs[0].cache_hits, 4u * 5u);
  fs::remove_all(dir);
}

TEST(Pipeline, FailureToleranceGovernsAborts) {
  RunConfig config = base_config();
  const auto flaky_inputs = [&] {
    auto inputs = synthetic_inputs(distinct_instances(3, 4, 21),
                                   config.synthetic);
    inputs.judge_factory = [](const PromptTemplate&, std::uint64_t) {
      return std::make_shared<FlakyJudge>(SyntheticJudgeSpec{}, 0, 1);
    };
    return inputs;
  };

  config.failure_tolerance = 0.0;
  EXPECT_THROW(run_pipeline(config, flaky_inputs()), JudgeUnavailableError);

  // One failing pair out of 12 per instance is above a 5% tolerance...
  config.failure_tolerance = 0.05;
  EXPECT_THROW(run_pipeline(config, flaky_inputs()), JudgeUnavailableError);

  // ...but below 20%: the run completes with the failures recorded.
  config.failure_tolerance = 0.2;
  const auto report = run_pipeline(config, flaky_inputs());
  const SingleRun& run = report.runs[0];
  EXPECT_EQ(run.failed_pairs, 3u);
  for (const auto& instance : run.instances) {
    EXPECT_EQ(instance.record_count, 11);
  }
}

TEST(Pipeline, PartialCacheSurvivesAnAbortedRun) {
  const fs::path dir = fs::temp_directory_path() / "pairrank_pipe_abort";
  fs::remove_all(dir);
  fs::create_directories(dir);
  RunConfig config = base_config();
  config.failure_tolerance = 0.0;
  config.concurrency = 1;
  auto inputs = synthetic_inputs(distinct_instances(1, 4, 3),
                                 config.synthetic);
  inputs.cache = std::make_shared<ComparisonCache>(
      (dir / "cache.jsonl").string());
  inputs.judge_factory = [](const PromptTemplate&, std::uint64_t) {
    return std::make_shared<FlakyJudge>(SyntheticJudgeSpec{}, 2, 3);
  };
  EXPECT_THROW(run_pipeline(config, inputs), JudgeUnavailableError);
  inputs.cache.reset();  // flush handle before reopening
  ComparisonCache reopened((dir / "cache.jsonl").string());
  EXPECT_GT(reopened.size(), 0u);   // successes before the failure persist
  EXPECT_LT(reopened.size(), 12u);  // the run never completed
  fs::remove_all(dir);
}

TEST(Pipeline, SystemLevelCorrelationForRectangularData) {
  // Fifteen "systems" with a fixed quality ladder plus per-instance jitter.
  std::vector<CandidateSet> sets;
  std::mt19937_64 rng(8);
  for (int k = 0; k < 10; ++k) {
    std::vector<double> gold(15);
    for (int s = 0; s < 15; ++s) {
      gold[static_cast<std::size_t>(s)] = s + 0.3 * draw_unit(rng);
    }
    sets.push_back(make_set("pod-" + std::to_string(k), gold));
  }
  RunConfig config = base_config();
  config.synthetic.sharpness = 40.0;
  const auto report =
      run_pipeline(config, synthetic_inputs(std::move(sets),
                                            config.synthetic));
  ASSERT_TRUE(report.runs[0].metrics.system.has_value());
  EXPECT_DOUBLE_EQ(*report.runs[0].metrics.system, 1.0);
}

TEST(Pipeline, MlDecodersWorkEndToEnd) {
  RunConfig config = base_config();
  config.decoder = Decoder::kMlGreedy;
  config.synthetic.sharpness = 10.0;
  const auto greedy = run_pipeline(
      config, synthetic_inputs(distinct_instances(4, 5, 61),
                               config.synthetic));
  EXPECT_DOUBLE_EQ(greedy.runs[0].metrics.summary->mean, 1.0);

  config.decoder = Decoder::kMlBrute;
  const auto brute = run_pipeline(
      config, synthetic_inputs(distinct_instances(4, 5, 61),
                               config.synthetic));
  EXPECT_DOUBLE_EQ(brute.runs[0].metrics.summary->mean, 1.0);
}

TEST(Pipeline, ApproximateLikelihoodCanEstimateItsAccuracyCell) {
  RunConfig config = base_config();
  config.decoder = Decoder::kMlGreedy;
  config.likelihood.mode = LikelihoodMode::kApproximate;
  config.likelihood.conditional_accuracy = 0.0;  // estimate from the run
  config.synthetic.sharpness = 2.0;
  config.synthetic.noise = SyntheticNoise::kSampled;
  config.synthetic.sample_count = 7;
  const auto report = run_pipeline(
      config, synthetic_inputs(distinct_instances(6, 6, 19),
                               config.synthetic));
  ASSERT_TRUE(report.runs[0].metrics.summary.has_value());
  EXPECT_GT(report.runs[0].metrics.summary->mean, 0.5);
}

TEST(Pipeline, FileTemplatesFlowThroughTheRun) {
  const fs::path dir = fs::temp_directory_path() / "pairrank_pipe_tmpl";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_dataset(dir / "data.jsonl", distinct_instances(2, 4, 23));
  {
    std::ofstream out(dir / "tmpl.txt");
    out << "{context}\n\nFirst {kind}: {candidate_a}\n\nSecond {kind}: "
           "{candidate_b}\n\nWhich {kind} is more {attribute}?\n";
  }
  RunConfig config = base_config();
  config.dataset_path = (dir / "data.jsonl").string();
  config.template_paths = {(dir / "tmpl.txt").string()};
  config.response_kind = "response";
  const PipelineInputs inputs = build_inputs(config);
  ASSERT_EQ(inputs.comparative_templates.size(), 1u);
  const PromptTemplate& tmpl = inputs.comparative_templates[0];
  EXPECT_EQ(tmpl.label_first, "Response A");  // derived from the kind
  const std::string prompt = render_prompt(tmpl, inputs.data[0], 1, 0);
  EXPECT_NE(prompt.find("First response:"), std::string::npos);
  EXPECT_NE(prompt.find(inputs.data[0].candidates[1]), std::string::npos);
  const auto report = run_pipeline(config, inputs);
  EXPECT_DOUBLE_EQ(report.runs[0].metrics.summary->mean, 1.0);
  fs::remove_all(dir);
}

TEST(Pipeline, ConfigJsonRoundTrip) {
  RunConfig config;
  config.dataset_path = "data.jsonl";
  config.attribute = "fluent";
  config.mode = AssessMode::kComparative;
  config.judge = JudgeKind::kRemote;
  config.remote.endpoint = "http://judge:8000";
  config.remote.model_name = "m";
  config.remote.mode = RemoteMode::kSampling;
  config.remote.samples = 11;
  config.template_paths = {"builtin:2"};
  config.strategy = Strategy::kSymmetric;
  config.budget = 24;
  config.plan_seed = 5;
  config.noise_seed = 6;
  config.repeats = 2;
  config.decoder = Decoder::kMlGreedy;
  config.likelihood.mode = LikelihoodMode::kApproximate;
  config.likelihood.conditional_accuracy = 0.7;
  config.debias = true;
  config.concurrency = 3;
  config.cache_path = "cache.jsonl";
  config.output_dir = "out";

  RunConfig parsed;
  config_from_json(config_to_json(config), parsed);
  EXPECT_EQ(parsed.dataset_path, config.dataset_path);
  EXPECT_EQ(parsed.attribute, config.attribute);
  EXPECT_EQ(parsed.judge, JudgeKind::kRemote);
  EXPECT_EQ(parsed.remote.endpoint, config.remote.endpoint);
  EXPECT_EQ(parsed.remote.mode, RemoteMode::kSampling);
  EXPECT_EQ(parsed.remote.samples, 11);
  EXPECT_EQ(parsed.template_paths, config.template_paths);
  EXPECT_EQ(parsed.strategy, Strategy::kSymmetric);
  EXPECT_EQ(parsed.budget, 24);
  EXPECT_EQ(parsed.plan_seed, 5u);
  EXPECT_EQ(parsed.repeats, 2);
  EXPECT_EQ(parsed.decoder, Decoder::kMlGreedy);
  EXPECT_EQ(parsed.likelihood.mode, LikelihoodMode::kApproximate);
  EXPECT_DOUBLE_EQ(parsed.likelihood.conditional_accuracy, 0.7);
  EXPECT_TRUE(parsed.debias);
  EXPECT_EQ(parsed.concurrency, 3u);
}

TEST(Pipeline, EmitsReportAndSweepFiles) {
  const fs::path dir = fs::temp_directory_path() / "pairrank_pipe_emit";
  fs::remove_all(dir);
  RunConfig config = base_config();
  config.output_dir = (dir / "out").string();
  const auto report = run_pipeline(
      config, synthetic_inputs(distinct_instances(1, 4, 2),
                               config.synthetic));
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "report.csv"));
  const nlohmann::json parsed = [&] {
    std::ifstream in(dir / "out" / "report.json");
    return nlohmann::json::parse(in);
  }();
  EXPECT_EQ(parsed.at("runs").size(), 1u);
  EXPECT_EQ(parsed.at("runs").at(0).at("instances").size(), 1u);

  std::vector<SweepRow> rows;
  for (int budget : {6, 8, 10}) {
    for (std::uint64_t seed : {1u, 2u}) {
      rows.push_back({"random", budget, seed, 0.5});
    }
  }
  emit_sweep(rows, dir / "out" / "sweep.csv");
  std::ifstream sweep(dir / "out" / "sweep.csv");
  std::string line;
  int lines = 0;
  while (std::getline(sweep, line)) ++lines;
  EXPECT_EQ(lines, 7);  // header + 3 budgets x 2 seeds
  fs::remove_all(dir);
}

TEST(Pipeline, ValidatesConfig) {
  RunConfig config = base_config();
  config.strategy = Strategy::kRandom;
  config.budget = 0;
  EXPECT_THROW(
      run_pipeline(config, synthetic_inputs(distinct_instances(1, 4, 2),
                                            config.synthetic)),
      ValidationError);
  config = base_config();
  config.repeats = 0;
  EXPECT_THROW(
      run_pipeline(config, synthetic_inputs(distinct_instances(1, 4, 2),
                                            config.synthetic)),
      ValidationError);
}

}  // namespace
}  // namespace pairrank
