#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "pairrank/errors.hpp"
#include "pairrank/judge.hpp"
#include "pairrank/prompt.hpp"

namespace pairrank {

enum class RemoteMode {
  kLabelProbability,  // normalized label-token probabilities
  kSampling,          // decision fraction over K generated samples
};

inline std::string to_string(RemoteMode mode) {
  return mode == RemoteMode::kLabelProbability ? "label_probability"
                                               : "sampling";
}

inline RemoteMode remote_mode_from_string(const std::string& name) {
  if (name == "label_probability") return RemoteMode::kLabelProbability;
  if (name == "sampling") return RemoteMode::kSampling;
  throw ValidationError("unknown judge mode '" + name + "'");
}

struct RetryPolicy {
  int max_retries = 2;      // attempts = max_retries + 1
  int timeout_seconds = 60;
  int backoff_ms = 250;     // multiplied by the attempt number
};

/// Configuration of an OpenAI-compatible completion judge. The API key is
/// read from the named environment variable and never stored in configs or
/// reports.
struct RemoteJudgeSpec {
  std::string endpoint;  // e.g. "http://127.0.0.1:8080"
  std::string model_name;
  RemoteMode mode = RemoteMode::kLabelProbability;
  int samples = 8;            // K, sampling mode
  double temperature = 1.0;   // sampling and scoring generation
  int max_generated_tokens = 5;
  int top_logprobs = 20;      // alternatives requested per position
  RetryPolicy retry;
  std::string api_key_env = "PAIRRANK_API_KEY";

  void validate() const {
    if (endpoint.empty()) throw ValidationError("remote endpoint is empty");
    if (mode == RemoteMode::kSampling && samples < 1) {
      throw ValidationError("sampling needs at least 1 sample");
    }
  }
};

// ---------------------------------------------------------------------------
// Pure pieces of the judge, separated for direct testing.
// ---------------------------------------------------------------------------

/// Probability that the first label wins given the two label
/// log-probabilities: exp(lp_first) / (exp(lp_first) + exp(lp_second)),
/// computed in a form that cannot overflow.
inline double label_probability(double logprob_first, double logprob_second) {
  return logistic(logprob_first - logprob_second);
}

/// The token that tells the two labels apart: the first whitespace-delimited
/// word after their longest common prefix ("Summary A" / "Summary B" gives
/// "A" / "B"). Labels where one is a prefix of the other do not diverge.
inline std::pair<std::string, std::string> distinguishing_tokens(
    const std::string& label_first, const std::string& label_second) {
  std::size_t shared = 0;
  while (shared < label_first.size() && shared < label_second.size() &&
         label_first[shared] == label_second[shared]) {
    ++shared;
  }
  const auto first_word = [](const std::string& label, std::size_t from) {
    while (from < label.size() &&
           std::isspace(static_cast<unsigned char>(label[from]))) {
      ++from;
    }
    std::size_t end = from;
    while (end < label.size() &&
           !std::isspace(static_cast<unsigned char>(label[end]))) {
      ++end;
    }
    return label.substr(from, end - from);
  };
  const std::string a = first_word(label_first, shared);
  const std::string b = first_word(label_second, shared);
  if (a.empty() || b.empty() || a == b) {
    throw TemplateError("labels '" + label_first + "' and '" + label_second +
                        "' do not diverge");
  }
  return {a, b};
}

/// Maps one generated sample to a comparison decision by case-insensitive
/// search for the two label strings. A sample containing both labels or
/// neither is unparseable (nullopt).
inline std::optional<int> parse_sampled_decision(
    const std::string& text, const std::string& label_first,
    const std::string& label_second) {
  const auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    return s;
  };
  const std::string haystack = lower(text);
  const bool first = haystack.find(lower(label_first)) != std::string::npos;
  const bool second = haystack.find(lower(label_second)) != std::string::npos;
  if (first == second) return std::nullopt;
  return first ? 1 : 0;
}

struct SamplingOutcome {
  double probability = 0.0;
  int wins = 0;
  int parsed = 0;
  int unparseable = 0;
};

/// Win fraction over the parseable samples.
inline SamplingOutcome sampling_probability(
    std::span<const std::string> samples, const std::string& label_first,
    const std::string& label_second) {
  SamplingOutcome outcome;
  for (const auto& text : samples) {
    const auto decision = parse_sampled_decision(text, label_first,
                                                 label_second);
    if (!decision) {
      ++outcome.unparseable;
      continue;
    }
    ++outcome.parsed;
    outcome.wins += *decision;
  }
  if (outcome.parsed == 0) {
    throw NoDecisionError("all " + std::to_string(samples.size()) +
                          " samples were unparseable");
  }
  outcome.probability =
      static_cast<double>(outcome.wins) / static_cast<double>(outcome.parsed);
  return outcome;
}

/// Extracts the first number from generated text ("Score: 7" gives 7.0).
inline double parse_score(const std::string& text) {
  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    const unsigned char c = static_cast<unsigned char>(text[pos]);
    const bool sign =
        (text[pos] == '-' || text[pos] == '+') && pos + 1 < text.size() &&
        std::isdigit(static_cast<unsigned char>(text[pos + 1]));
    if (!std::isdigit(c) && !sign) continue;
    std::size_t end = pos + (sign ? 2 : 1);
    while (end < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[end]))) {
      ++end;
    }
    if (end < text.size() && text[end] == '.' && end + 1 < text.size() &&
        std::isdigit(static_cast<unsigned char>(text[end + 1]))) {
      ++end;
      while (end < text.size() &&
             std::isdigit(static_cast<unsigned char>(text[end]))) {
        ++end;
      }
    }
    return std::stod(text.substr(pos, end - pos));
  }
  throw ScoreParseError("no numeric score in generated text: '" + text + "'");
}

// ---------------------------------------------------------------------------
// HTTP transport.
// ---------------------------------------------------------------------------

namespace detail {

class CompletionClient {
 public:
  explicit CompletionClient(const RemoteJudgeSpec& spec) : spec_(spec) {}

  nlohmann::json post_completion(const nlohmann::json& request) {
    httplib::Client client(spec_.endpoint);
    client.set_connection_timeout(spec_.retry.timeout_seconds, 0);
    client.set_read_timeout(spec_.retry.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(spec_.api_key_env.c_str());
        key != nullptr && key[0] != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string body = request.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= spec_.retry.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(spec_.retry.backoff_ms * attempt));
      }
      auto res =
          client.Post("/v1/completions", headers, body, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;  // transport failure: retry
      }
      if (res->status == 200) {
        nlohmann::json parsed = nlohmann::json::parse(
            res->body, nullptr, /*allow_exceptions=*/false);
        if (parsed.is_discarded()) {
          throw ProtocolError("judge returned unparseable JSON");
        }
        return parsed;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;  // transient: retry
      }
      throw ProtocolError("judge rejected request with HTTP " +
                          std::to_string(res->status) + ": " + res->body);
    }
    throw JudgeUnavailableError("judge at " + spec_.endpoint +
                                " unavailable after " +
                                std::to_string(spec_.retry.max_retries + 1) +
                                " attempts: " + last_error);
  }

 private:
  RemoteJudgeSpec spec_;
};

/// Looks a label's distinguishing token up in one generated position's
/// alternative map. Keys are compared after trimming whitespace, exact
/// match first and case-insensitive as a fallback.
inline std::optional<double> find_label_logprob(const nlohmann::json& top,
                                                const std::string& token) {
  const auto trim = [](std::string s) {
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) {
      s.erase(s.begin());
    }
    while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) {
      s.pop_back();
    }
    return s;
  };
  const auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    return s;
  };
  std::optional<double> loose;
  for (const auto& [key, value] : top.items()) {
    const std::string trimmed = trim(key);
    if (trimmed == token) return value.get<double>();
    if (!loose && lower(trimmed) == lower(token)) {
      loose = value.get<double>();
    }
  }
  return loose;
}

}  // namespace detail

/// Pairwise judge backed by an OpenAI-compatible completion endpoint.
///
/// label_probability mode requests one generated token with per-token
/// alternatives and forms the winner probability from the two label tokens'
/// log-probabilities. sampling mode generates K completions and takes the
/// fraction that names the first candidate.
class RemoteJudge final : public ComparativeJudge {
 public:
  RemoteJudge(RemoteJudgeSpec spec, PromptTemplate tmpl)
      : spec_(std::move(spec)), template_(std::move(tmpl)), client_(spec_) {
    spec_.validate();
    // Fail fast on non-diverging labels instead of at the first comparison.
    distinguishing_tokens(template_.label_first, template_.label_second);
  }

  Comparison compare(const CandidateSet& set, int i, int j) override {
    const std::string prompt = render_prompt(template_, set, i, j);
    return spec_.mode == RemoteMode::kLabelProbability
               ? compare_label_probability(prompt)
               : compare_sampling(prompt);
  }

  std::string fingerprint() const override {
    std::ostringstream id;
    id << "remote|" << spec_.endpoint << '|' << spec_.model_name << '|'
       << to_string(spec_.mode) << "|k=" << spec_.samples
       << "|t=" << spec_.temperature << "|max=" << spec_.max_generated_tokens;
    return hex64(fnv1a64(id.str()));
  }

  const PromptTemplate& prompt_template() const { return template_; }

 private:
  Comparison compare_label_probability(const std::string& prompt) {
    const nlohmann::json request{{"model", spec_.model_name},
                                 {"prompt", prompt},
                                 {"max_tokens", 1},
                                 {"temperature", 0.0},
                                 {"logprobs", spec_.top_logprobs}};
    const nlohmann::json response = client_.post_completion(request);
    const nlohmann::json* top = nullptr;
    try {
      const auto& logprobs = response.at("choices").at(0).at("logprobs");
      const auto& positions = logprobs.at("top_logprobs");
      if (positions.empty()) {
        throw ProtocolError("judge response carries no generated position");
      }
      top = &positions.at(0);
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError(
          "judge response lacks the requested log-probability fields");
    }
    const auto [token_first, token_second] =
        distinguishing_tokens(template_.label_first, template_.label_second);
    const auto lp_first = detail::find_label_logprob(*top, token_first);
    const auto lp_second = detail::find_label_logprob(*top, token_second);
    if (!lp_first || !lp_second) {
      throw ProtocolError("label tokens '" + token_first + "'/'" +
                          token_second +
                          "' missing from the returned alternatives");
    }
    Comparison result;
    result.probability = label_probability(*lp_first, *lp_second);
    result.decision = decide(*result.probability);
    std::ostringstream tag;
    tag << "labelprob model=" << spec_.model_name
        << " lp_first=" << nlohmann::json(*lp_first).dump()
        << " lp_second=" << nlohmann::json(*lp_second).dump();
    result.tag = tag.str();
    return result;
  }

  Comparison compare_sampling(const std::string& prompt) {
    const nlohmann::json request{{"model", spec_.model_name},
                                 {"prompt", prompt},
                                 {"max_tokens", spec_.max_generated_tokens},
                                 {"temperature", spec_.temperature},
                                 {"n", spec_.samples}};
    const nlohmann::json response = client_.post_completion(request);
    std::vector<std::string> texts;
    try {
      for (const auto& choice : response.at("choices")) {
        texts.push_back(choice.at("text").get<std::string>());
      }
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("judge response lacks generated texts");
    }
    if (texts.empty()) {
      throw ProtocolError("judge returned zero samples");
    }
    const SamplingOutcome outcome = sampling_probability(
        texts, template_.label_first, template_.label_second);
    Comparison result;
    result.probability = outcome.probability;
    result.decision = decide(outcome.probability);
    std::ostringstream tag;
    tag << "sampling model=" << spec_.model_name << " wins=" << outcome.wins
        << " parsed=" << outcome.parsed
        << " unparseable=" << outcome.unparseable;
    result.tag = tag.str();
    return result;
  }

  RemoteJudgeSpec spec_;
  PromptTemplate template_;
  detail::CompletionClient client_;
};

/// Absolute prompt-scoring baseline over the same endpoint: one generation
/// per candidate, parsed for its numeric score.
class RemoteScorer final : public AbsoluteJudge {
 public:
  RemoteScorer(RemoteJudgeSpec spec, PromptTemplate tmpl)
      : spec_(std::move(spec)), template_(std::move(tmpl)), client_(spec_) {
    spec_.validate();
  }

  ScoredCandidate score(const CandidateSet& set, int i) override {
    const std::string prompt = render_scoring_prompt(template_, set, i);
    const nlohmann::json request{{"model", spec_.model_name},
                                 {"prompt", prompt},
                                 {"max_tokens", spec_.max_generated_tokens},
                                 {"temperature", spec_.temperature}};
    const nlohmann::json response = client_.post_completion(request);
    std::string text;
    try {
      text = response.at("choices").at(0).at("text").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("judge response lacks generated text");
    }
    return {parse_score(text), text};
  }

  std::string fingerprint() const override {
    std::ostringstream id;
    id << "remote-scorer|" << spec_.endpoint << '|' << spec_.model_name
       << "|t=" << spec_.temperature << "|max=" << spec_.max_generated_tokens;
    return hex64(fnv1a64(id.str()));
  }

 private:
  RemoteJudgeSpec spec_;
  PromptTemplate template_;
  detail::CompletionClient client_;
};

}  // namespace pairrank
