#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pairrank/cache.hpp"
#include "pairrank/common.hpp"
#include "pairrank/core.hpp"
#include "pairrank/dataset.hpp"
#include "pairrank/debias.hpp"
#include "pairrank/errors.hpp"
#include "pairrank/judge.hpp"
#include "pairrank/metrics.hpp"
#include "pairrank/prompt.hpp"
#include "pairrank/ranking.hpp"
#include "pairrank/remote_judge.hpp"
#include "pairrank/report.hpp"
#include "pairrank/scheduler.hpp"

namespace pairrank {

enum class JudgeKind { kSynthetic, kRemote };
enum class AssessMode { kComparative, kAbsolute };
enum class Decoder { kWinRatio, kMlGreedy, kMlBrute };

inline std::string to_string(Decoder decoder) {
  switch (decoder) {
    case Decoder::kWinRatio: return "win_ratio";
    case Decoder::kMlGreedy: return "ml_greedy";
    case Decoder::kMlBrute: return "ml_brute";
  }
  return "unknown";
}

inline Decoder decoder_from_string(const std::string& name) {
  if (name == "win_ratio") return Decoder::kWinRatio;
  if (name == "ml_greedy") return Decoder::kMlGreedy;
  if (name == "ml_brute") return Decoder::kMlBrute;
  throw ValidationError("unknown decoder '" + name + "'");
}

/// Everything a run needs. Flags override config-file values in the CLI;
/// the struct itself is the single source the pipeline reads.
struct RunConfig {
  std::string dataset_path;
  std::string attribute;  // default attribute for instances lacking one
  AssessMode mode = AssessMode::kComparative;

  JudgeKind judge = JudgeKind::kSynthetic;
  SyntheticJudgeSpec synthetic;
  double synthetic_scorer_sigma = 0.0;
  RemoteJudgeSpec remote;

  /// Comparative templates: file paths or "builtin:1" / "builtin:2".
  /// Several entries make one run per template, averaged in the report.
  std::vector<std::string> template_paths{"builtin:1"};
  std::string scoring_template_path = "builtin:1";
  std::string response_kind = "summary";
  std::string label_first;   // empty: derived from response_kind
  std::string label_second;

  Strategy strategy = Strategy::kFull;
  int budget = 0;  // ignored for the full strategy
  std::uint64_t plan_seed = 1;
  std::uint64_t noise_seed = 1;
  int repeats = 1;

  Decoder decoder = Decoder::kWinRatio;
  LikelihoodParams likelihood;
  bool debias = false;

  unsigned concurrency = 1;
  double failure_tolerance = 0.0;  // judge failures tolerated, as a fraction
  std::string cache_path;   // empty: in-memory only
  std::string output_dir;   // empty: nothing written

  void validate() const {
    if (repeats < 1) throw ValidationError("repeats must be >= 1");
    if (concurrency < 1) throw ValidationError("concurrency must be >= 1");
    if (failure_tolerance < 0.0 || failure_tolerance > 1.0) {
      throw ValidationError("failure tolerance must lie in [0, 1]");
    }
    if (template_paths.empty()) {
      throw ValidationError("at least one comparative template is required");
    }
    if (strategy != Strategy::kFull && budget <= 0) {
      throw ValidationError("budgeted strategies need a positive budget");
    }
  }
};

struct PipelineInputs {
  std::vector<CandidateSet> data;
  std::vector<PromptTemplate> comparative_templates;
  PromptTemplate scoring_template;
  std::function<std::shared_ptr<ComparativeJudge>(const PromptTemplate&,
                                                  std::uint64_t)>
      judge_factory;
  std::function<std::shared_ptr<AbsoluteJudge>(const PromptTemplate&,
                                               std::uint64_t)>
      scorer_factory;
  std::shared_ptr<ComparisonCache> cache;
};

// ---------------------------------------------------------------------------
// Config <-> JSON (config files and the report echo).
// ---------------------------------------------------------------------------

inline nlohmann::json config_to_json(const RunConfig& config) {
  nlohmann::json out{
      {"dataset", config.dataset_path},
      {"attribute", config.attribute},
      {"mode", config.mode == AssessMode::kComparative ? "comparative"
                                                       : "absolute"},
      {"judge", config.judge == JudgeKind::kSynthetic ? "synthetic"
                                                      : "remote"},
      {"templates", config.template_paths},
      {"scoring_template", config.scoring_template_path},
      {"response_kind", config.response_kind},
      {"strategy", to_string(config.strategy)},
      {"budget", config.budget},
      {"plan_seed", config.plan_seed},
      {"noise_seed", config.noise_seed},
      {"repeats", config.repeats},
      {"decoder", to_string(config.decoder)},
      {"debias", config.debias},
      {"concurrency", config.concurrency},
      {"failure_tolerance", config.failure_tolerance},
      {"cache", config.cache_path},
      {"output", config.output_dir}};
  if (!config.label_first.empty()) out["label_first"] = config.label_first;
  if (!config.label_second.empty()) out["label_second"] = config.label_second;
  if (config.judge == JudgeKind::kSynthetic) {
    out["synthetic"] = {
        {"sharpness", config.synthetic.sharpness},
        {"positional_logit_bias", config.synthetic.positional_logit_bias},
        {"noise", config.synthetic.noise == SyntheticNoise::kNone
                      ? "none"
                      : config.synthetic.noise == SyntheticNoise::kBernoulli
                            ? "bernoulli"
                            : "sampled"},
        {"sample_count", config.synthetic.sample_count},
        {"scorer_sigma", config.synthetic_scorer_sigma}};
  } else {
    out["remote"] = {{"endpoint", config.remote.endpoint},
                     {"model", config.remote.model_name},
                     {"mode", to_string(config.remote.mode)},
                     {"samples", config.remote.samples},
                     {"temperature", config.remote.temperature},
                     {"max_generated_tokens", config.remote.max_generated_tokens},
                     {"top_logprobs", config.remote.top_logprobs},
                     {"max_retries", config.remote.retry.max_retries},
                     {"timeout_seconds", config.remote.retry.timeout_seconds},
                     {"api_key_env", config.remote.api_key_env}};
  }
  if (config.decoder != Decoder::kWinRatio) {
    out["likelihood"] = {
        {"mode", config.likelihood.mode == LikelihoodMode::kSoft
                     ? "soft"
                     : "approximate"},
        {"conditional_accuracy", config.likelihood.conditional_accuracy},
        {"floor", config.likelihood.floor}};
  }
  return out;
}

inline void config_from_json(const nlohmann::json& in, RunConfig& config) {
  const auto get = [&](const char* key, auto& target) {
    if (in.contains(key)) in.at(key).get_to(target);
  };
  get("dataset", config.dataset_path);
  get("attribute", config.attribute);
  if (in.contains("mode")) {
    const auto mode = in.at("mode").get<std::string>();
    if (mode == "comparative") {
      config.mode = AssessMode::kComparative;
    } else if (mode == "absolute") {
      config.mode = AssessMode::kAbsolute;
    } else {
      throw ValidationError("unknown mode '" + mode + "'");
    }
  }
  if (in.contains("judge")) {
    const auto judge = in.at("judge").get<std::string>();
    if (judge == "synthetic") {
      config.judge = JudgeKind::kSynthetic;
    } else if (judge == "remote") {
      config.judge = JudgeKind::kRemote;
    } else {
      throw ValidationError("unknown judge kind '" + judge + "'");
    }
  }
  get("templates", config.template_paths);
  get("scoring_template", config.scoring_template_path);
  get("response_kind", config.response_kind);
  get("label_first", config.label_first);
  get("label_second", config.label_second);
  if (in.contains("strategy")) {
    config.strategy = strategy_from_string(in.at("strategy").get<std::string>());
  }
  get("budget", config.budget);
  get("plan_seed", config.plan_seed);
  get("noise_seed", config.noise_seed);
  get("repeats", config.repeats);
  if (in.contains("decoder")) {
    config.decoder = decoder_from_string(in.at("decoder").get<std::string>());
  }
  get("debias", config.debias);
  get("concurrency", config.concurrency);
  get("failure_tolerance", config.failure_tolerance);
  get("cache", config.cache_path);
  get("output", config.output_dir);
  if (in.contains("synthetic")) {
    const auto& s = in.at("synthetic");
    if (s.contains("sharpness")) s.at("sharpness").get_to(config.synthetic.sharpness);
    if (s.contains("positional_logit_bias")) {
      s.at("positional_logit_bias").get_to(config.synthetic.positional_logit_bias);
    }
    if (s.contains("noise")) {
      const auto noise = s.at("noise").get<std::string>();
      if (noise == "none") {
        config.synthetic.noise = SyntheticNoise::kNone;
      } else if (noise == "bernoulli") {
        config.synthetic.noise = SyntheticNoise::kBernoulli;
      } else if (noise == "sampled") {
        config.synthetic.noise = SyntheticNoise::kSampled;
      } else {
        throw ValidationError("unknown synthetic noise '" + noise + "'");
      }
    }
    if (s.contains("sample_count")) s.at("sample_count").get_to(config.synthetic.sample_count);
    if (s.contains("scorer_sigma")) s.at("scorer_sigma").get_to(config.synthetic_scorer_sigma);
  }
  if (in.contains("remote")) {
    const auto& r = in.at("remote");
    if (r.contains("endpoint")) r.at("endpoint").get_to(config.remote.endpoint);
    if (r.contains("model")) r.at("model").get_to(config.remote.model_name);
    if (r.contains("mode")) {
      config.remote.mode = remote_mode_from_string(r.at("mode").get<std::string>());
    }
    if (r.contains("samples")) r.at("samples").get_to(config.remote.samples);
    if (r.contains("temperature")) r.at("temperature").get_to(config.remote.temperature);
    if (r.contains("max_generated_tokens")) {
      r.at("max_generated_tokens").get_to(config.remote.max_generated_tokens);
    }
    if (r.contains("top_logprobs")) r.at("top_logprobs").get_to(config.remote.top_logprobs);
    if (r.contains("max_retries")) r.at("max_retries").get_to(config.remote.retry.max_retries);
    if (r.contains("timeout_seconds")) {
      r.at("timeout_seconds").get_to(config.remote.retry.timeout_seconds);
    }
    if (r.contains("api_key_env")) r.at("api_key_env").get_to(config.remote.api_key_env);
  }
  if (in.contains("likelihood")) {
    const auto& l = in.at("likelihood");
    if (l.contains("mode")) {
      const auto mode = l.at("mode").get<std::string>();
      if (mode == "soft") {
        config.likelihood.mode = LikelihoodMode::kSoft;
      } else if (mode == "approximate") {
        config.likelihood.mode = LikelihoodMode::kApproximate;
      } else {
        throw ValidationError("unknown likelihood mode '" + mode + "'");
      }
    }
    if (l.contains("conditional_accuracy")) {
      l.at("conditional_accuracy").get_to(config.likelihood.conditional_accuracy);
    }
    if (l.contains("floor")) l.at("floor").get_to(config.likelihood.floor);
  }
}

// ---------------------------------------------------------------------------
// Input construction.
// ---------------------------------------------------------------------------

namespace detail {

inline PromptTemplate resolve_comparative_template(const RunConfig& config,
                                                   const std::string& path) {
  PromptTemplate tmpl;
  if (path == "builtin:1") {
    tmpl = comparative_template_1(config.response_kind);
  } else if (path == "builtin:2") {
    tmpl = comparative_template_2(config.response_kind);
  } else {
    tmpl = load_template(path);
    tmpl.response_kind = config.response_kind;
    tmpl.label_first = capitalize(config.response_kind) + " A";
    tmpl.label_second = capitalize(config.response_kind) + " B";
  }
  if (!config.label_first.empty()) tmpl.label_first = config.label_first;
  if (!config.label_second.empty()) tmpl.label_second = config.label_second;
  return tmpl;
}

inline PromptTemplate resolve_scoring_template(const RunConfig& config) {
  if (config.scoring_template_path == "builtin:1") {
    return scoring_template_1(config.response_kind);
  }
  if (config.scoring_template_path == "builtin:2") {
    return scoring_template_2(config.response_kind);
  }
  PromptTemplate tmpl = load_template(config.scoring_template_path);
  tmpl.response_kind = config.response_kind;
  return tmpl;
}

}  // namespace detail

/// Builds judges, templates, data and cache from a config. Tests may build
/// a PipelineInputs by hand instead (e.g. to count judge calls).
inline PipelineInputs build_inputs(const RunConfig& config) {
  config.validate();
  PipelineInputs inputs;
  inputs.data = ingest(config.dataset_path, config.attribute);
  for (const auto& path : config.template_paths) {
    inputs.comparative_templates.push_back(
        detail::resolve_comparative_template(config, path));
  }
  inputs.scoring_template = detail::resolve_scoring_template(config);
  if (!config.cache_path.empty()) {
    inputs.cache = std::make_shared<ComparisonCache>(config.cache_path);
  }
  if (config.judge == JudgeKind::kSynthetic) {
    const SyntheticJudgeSpec base = config.synthetic;
    inputs.judge_factory = [base](const PromptTemplate&,
                                  std::uint64_t noise_seed) {
      SyntheticJudgeSpec spec = base;
      spec.noise_seed = noise_seed;
      return std::make_shared<SyntheticJudge>(spec);
    };
    const double sigma = config.synthetic_scorer_sigma;
    inputs.scorer_factory = [sigma](const PromptTemplate&,
                                    std::uint64_t noise_seed) {
      return std::make_shared<SyntheticScorer>(sigma, noise_seed);
    };
  } else {
    const RemoteJudgeSpec spec = config.remote;
    inputs.judge_factory = [spec](const PromptTemplate& tmpl, std::uint64_t) {
      return std::make_shared<RemoteJudge>(spec, tmpl);
    };
    inputs.scorer_factory = [spec](const PromptTemplate& tmpl, std::uint64_t) {
      return std::make_shared<RemoteScorer>(spec, tmpl);
    };
  }
  return inputs;
}

// ---------------------------------------------------------------------------
// Orchestration.
// ---------------------------------------------------------------------------

namespace detail {

inline RankOutcome decode_records(std::span<const ComparisonRecord> records,
                                  int n, const RunConfig& config,
                                  int* clamped = nullptr) {
  RankOutcome outcome;
  switch (config.decoder) {
    case Decoder::kWinRatio:
      return win_ratio(records, n);
    case Decoder::kMlGreedy:
      outcome = ml_rank_greedy(records, n, config.likelihood);
      break;
    case Decoder::kMlBrute:
      outcome = ml_rank_brute(records, n, config.likelihood);
      break;
  }
  if (clamped != nullptr && config.likelihood.mode == LikelihoodMode::kSoft) {
    // Count certainty clamps at the decoded optimum so the run can warn.
    log_likelihood(outcome, records, config.likelihood, clamped);
  }
  return outcome;
}

struct JudgedInstance {
  std::vector<ComparisonRecord> records;
  int planned = 0;
  std::size_t failures = 0;
};

/// Judges one instance's plan, cache-first. Counters are shared across
/// instances; records come back in plan order regardless of threading.
inline JudgedInstance judge_instance(
    const CandidateSet& set, const ComparisonPlan& plan,
    ComparativeJudge& judge, const std::string& judge_fp,
    const std::string& template_fp, ComparisonCache* cache,
    std::atomic<std::size_t>& judge_calls,
    std::atomic<std::size_t>& cache_hits, bool tolerate_failures) {
  JudgedInstance result;
  result.planned = static_cast<int>(plan.pairs.size());
  result.records.reserve(plan.pairs.size());
  for (const auto& [i, j] : plan.pairs) {
    std::optional<Comparison> comparison;
    if (cache != nullptr) {
      comparison =
          cache->find_comparison(set.instance_id, i, j, judge_fp, template_fp);
      if (comparison) ++cache_hits;
    }
    if (!comparison) {
      try {
        comparison = judge.compare(set, i, j);
      } catch (const Error&) {
        if (!tolerate_failures) throw;
        ++result.failures;
        continue;
      }
      ++judge_calls;
      if (cache != nullptr) {
        cache->store_comparison(set.instance_id, i, j, judge_fp, template_fp,
                                *comparison);
      }
    }
    ComparisonRecord record;
    record.first_index = i;
    record.second_index = j;
    record.probability = comparison->probability;
    record.decision = comparison->decision;
    record.judge_tag = comparison->tag;
    result.records.push_back(std::move(record));
  }
  return result;
}

inline std::optional<double> instance_spearman(const RankOutcome& outcome,
                                               const CandidateSet& set) {
  if (!set.gold_scores) return std::nullopt;
  return spearman(outcome.scores, *set.gold_scores);
}

/// Summary / system / pooled-accuracy metrics over decoded instances.
inline MetricsBlock aggregate_metrics(
    const std::vector<CandidateSet>& data,
    const std::vector<std::optional<RankOutcome>>& outcomes,
    const std::vector<std::optional<double>>& rhos,
    const AccuracyCounts& accuracy) {
  MetricsBlock block;
  bool any_defined = false;
  bool any_gold = false;
  for (std::size_t idx = 0; idx < data.size(); ++idx) {
    if (data[idx].gold_scores) any_gold = true;
    if (rhos[idx]) any_defined = true;
  }
  if (any_defined) block.summary = summary_level(rhos);
  if (accuracy.eligible > 0) {
    block.accuracy = static_cast<double>(accuracy.correct) /
                     static_cast<double>(accuracy.eligible);
  }
  // System-level needs a rectangular gold+prediction matrix: every instance
  // decoded, every instance scored, all with the same candidate count.
  if (any_gold) {
    std::vector<std::vector<double>> pred, gold;
    bool rectangular = true;
    const int systems = data.front().size();
    for (std::size_t idx = 0; idx < data.size(); ++idx) {
      if (!outcomes[idx] || !data[idx].gold_scores ||
          data[idx].size() != systems) {
        rectangular = false;
        break;
      }
      pred.push_back(outcomes[idx]->scores);
      gold.push_back(*data[idx].gold_scores);
    }
    if (rectangular && systems >= 2) {
      block.system = system_level(pred, gold);
    }
  }
  return block;
}

}  // namespace detail

/// Runs one (template, repeat) cell of a comparative run.
inline SingleRun run_comparative_once(const RunConfig& config,
                                      const PipelineInputs& inputs,
                                      int template_index, int repeat_index) {
  const PromptTemplate& tmpl =
      inputs.comparative_templates[static_cast<std::size_t>(template_index)];
  SingleRun run;
  run.template_index = template_index;
  run.repeat_index = repeat_index;
  run.template_fingerprint = template_fingerprint(tmpl);
  run.plan_seed =
      mix_seed(config.plan_seed, static_cast<std::uint64_t>(repeat_index));
  run.noise_seed =
      mix_seed(config.noise_seed, static_cast<std::uint64_t>(repeat_index));

  const auto judge = inputs.judge_factory(tmpl, run.noise_seed);
  run.judge_fingerprint = judge->fingerprint();

  const std::vector<CandidateSet>& data = inputs.data;
  std::vector<detail::JudgedInstance> judged(data.size());
  std::atomic<std::size_t> judge_calls{0};
  std::atomic<std::size_t> cache_hits{0};
  const bool tolerate = config.failure_tolerance > 0.0;

  parallel_for(data.size(), config.concurrency, [&](std::size_t idx) {
    const CandidateSet& set = data[idx];
    set.validate();
    const ComparisonPlan plan =
        config.strategy == Strategy::kFull
            ? full_plan(set.size())
            : select_plan(config.strategy, set.size(), config.budget,
                          mix_seed(run.plan_seed, idx));
    judged[idx] = detail::judge_instance(
        set, plan, *judge, run.judge_fingerprint, run.template_fingerprint,
        inputs.cache.get(), judge_calls, cache_hits, tolerate);
  });
  run.judge_calls = judge_calls.load();
  run.cache_hits = cache_hits.load();

  std::size_t planned_total = 0;
  for (const auto& instance : judged) {
    planned_total += static_cast<std::size_t>(instance.planned);
    run.failed_pairs += instance.failures;
  }
  if (tolerate && planned_total > 0 &&
      static_cast<double>(run.failed_pairs) >
          config.failure_tolerance * static_cast<double>(planned_total)) {
    throw JudgeUnavailableError(
        std::to_string(run.failed_pairs) + " of " +
        std::to_string(planned_total) +
        " comparisons failed, above the configured tolerance; aborting with "
        "partial cache preserved");
  }

  // Positional priors are measured on the raw decisions; the calibrated
  // threshold is pooled over every instance of the run.
  std::vector<std::span<const ComparisonRecord>> groups;
  groups.reserve(judged.size());
  for (const auto& instance : judged) {
    groups.emplace_back(instance.records);
  }
  bool any_records = false;
  for (const auto& group : groups) {
    if (!group.empty()) any_records = true;
  }
  if (!any_records) {
    throw NoDataError("no comparison succeeded; nothing to rank");
  }
  run.priors = estimate_priors(groups);
  if (config.debias) {
    run.calibration = calibrate_threshold(groups);
  }

  // Approximate-likelihood decoding with a non-positive accuracy cell asks
  // for the value to be estimated from the judge's own reversed-pair
  // self-agreement.
  RunConfig effective = config;
  if (config.decoder != Decoder::kWinRatio &&
      config.likelihood.mode == LikelihoodMode::kApproximate &&
      config.likelihood.conditional_accuracy <= 0.0) {
    effective.likelihood.conditional_accuracy =
        estimate_conditional_accuracy(groups);
  }

  std::vector<std::optional<RankOutcome>> outcomes(data.size());
  std::vector<std::optional<RankOutcome>> raw_outcomes(data.size());
  std::vector<std::optional<double>> rhos(data.size());
  std::vector<std::optional<double>> raw_rhos(data.size());
  AccuracyCounts accuracy_total, raw_accuracy_total;
  std::atomic<int> clamped_total{0};
  run.instances.resize(data.size());
  std::mutex totals_mutex;

  parallel_for(data.size(), config.concurrency, [&](std::size_t idx) {
    const CandidateSet& set = data[idx];
    InstanceResult& instance = run.instances[idx];
    instance.instance_id = set.instance_id;
    instance.candidate_count = set.size();
    instance.record_count = static_cast<int>(judged[idx].records.size());
    if (judged[idx].records.empty()) return;

    const std::vector<ComparisonRecord>& raw = judged[idx].records;
    std::vector<ComparisonRecord> calibrated;
    if (run.calibration) {
      calibrated = apply_calibration(raw, *run.calibration);
    }
    const std::vector<ComparisonRecord>& active =
        run.calibration ? calibrated : raw;

    int clamped = 0;
    outcomes[idx] = detail::decode_records(active, set.size(), effective,
                                           &clamped);
    clamped_total += clamped;
    instance.outcome = outcomes[idx];
    rhos[idx] = detail::instance_spearman(*outcomes[idx], set);
    instance.spearman = rhos[idx];

    AccuracyCounts local, raw_local;
    if (set.gold_scores) {
      local = accuracy_counts(active, *set.gold_scores);
      if (local.eligible > 0) {
        instance.accuracy = static_cast<double>(local.correct) /
                            static_cast<double>(local.eligible);
      }
    }
    if (run.calibration) {
      raw_outcomes[idx] = detail::decode_records(raw, set.size(), effective);
      instance.raw_outcome = raw_outcomes[idx];
      raw_rhos[idx] = detail::instance_spearman(*raw_outcomes[idx], set);
      instance.raw_spearman = raw_rhos[idx];
      if (set.gold_scores) {
        raw_local = accuracy_counts(raw, *set.gold_scores);
        if (raw_local.eligible > 0) {
          instance.raw_accuracy = static_cast<double>(raw_local.correct) /
                                  static_cast<double>(raw_local.eligible);
        }
      }
    }
    const std::lock_guard<std::mutex> lock(totals_mutex);
    accuracy_total += local;
    raw_accuracy_total += raw_local;
  });

  run.clamped_probabilities = clamped_total.load();
  run.metrics =
      detail::aggregate_metrics(data, outcomes, rhos, accuracy_total);
  if (run.calibration) {
    run.raw_metrics = detail::aggregate_metrics(data, raw_outcomes, raw_rhos,
                                                raw_accuracy_total);
  }
  return run;
}

/// Runs one repeat of an absolute-scoring (prompt-scoring baseline) run.
inline SingleRun run_absolute_once(const RunConfig& config,
                                   const PipelineInputs& inputs,
                                   int repeat_index) {
  const PromptTemplate& tmpl = inputs.scoring_template;
  SingleRun run;
  run.template_index = 0;
  run.repeat_index = repeat_index;
  run.template_fingerprint = template_fingerprint(tmpl);
  run.noise_seed =
      mix_seed(config.noise_seed, static_cast<std::uint64_t>(repeat_index));
  const auto scorer = inputs.scorer_factory(tmpl, run.noise_seed);
  run.judge_fingerprint = scorer->fingerprint();

  const std::vector<CandidateSet>& data = inputs.data;
  std::vector<std::optional<RankOutcome>> outcomes(data.size());
  std::vector<std::optional<double>> rhos(data.size());
  std::atomic<std::size_t> judge_calls{0};
  std::atomic<std::size_t> cache_hits{0};
  run.instances.resize(data.size());

  parallel_for(data.size(), config.concurrency, [&](std::size_t idx) {
    const CandidateSet& set = data[idx];
    set.validate();
    std::vector<double> scores(static_cast<std::size_t>(set.size()));
    for (int i = 0; i < set.size(); ++i) {
      std::optional<double> value;
      if (inputs.cache) {
        value = inputs.cache->find_score(set.instance_id, i,
                                         run.judge_fingerprint,
                                         run.template_fingerprint);
        if (value) ++cache_hits;
      }
      if (!value) {
        const ScoredCandidate scored = scorer->score(set, i);
        value = scored.score;
        ++judge_calls;
        if (inputs.cache) {
          inputs.cache->store_score(set.instance_id, i, run.judge_fingerprint,
                                    run.template_fingerprint, scored.score,
                                    scored.text);
        }
      }
      scores[static_cast<std::size_t>(i)] = *value;
    }
    outcomes[idx] = rank_outcome_from_scores(std::move(scores));
    rhos[idx] = detail::instance_spearman(*outcomes[idx], set);
    InstanceResult& instance = run.instances[idx];
    instance.instance_id = set.instance_id;
    instance.candidate_count = set.size();
    instance.record_count = set.size();  // one scoring call per candidate
    instance.outcome = outcomes[idx];
    instance.spearman = rhos[idx];
  });
  run.judge_calls = judge_calls.load();
  run.cache_hits = cache_hits.load();
  run.metrics =
      detail::aggregate_metrics(data, outcomes, rhos, AccuracyCounts{});
  return run;
}

namespace detail {

inline AggregateMeans means_over(std::span<const SingleRun> runs) {
  AggregateMeans means;
  means.runs = static_cast<int>(runs.size());
  double summary = 0.0, system = 0.0, accuracy = 0.0;
  int n_summary = 0, n_system = 0, n_accuracy = 0;
  for (const auto& run : runs) {
    if (run.metrics.summary) {
      summary += run.metrics.summary->mean;
      ++n_summary;
    }
    if (run.metrics.system) {
      system += *run.metrics.system;
      ++n_system;
    }
    if (run.metrics.accuracy) {
      accuracy += *run.metrics.accuracy;
      ++n_accuracy;
    }
  }
  if (n_summary > 0) means.summary_spearman = summary / n_summary;
  if (n_system > 0) means.system_spearman = system / n_system;
  if (n_accuracy > 0) means.accuracy = accuracy / n_accuracy;
  return means;
}

}  // namespace detail

/// Full orchestration: one SingleRun per (template, repeat), then the
/// per-template and overall means. Deterministic for a given config, cache
/// state and synthetic judge.
inline RunReport run_pipeline(const RunConfig& config,
                              const PipelineInputs& inputs) {
  config.validate();
  if (inputs.data.empty()) {
    throw NoDataError("dataset is empty");
  }
  RunReport report;
  report.config = config_to_json(config);
  if (config.mode == AssessMode::kAbsolute) {
    for (int repeat = 0; repeat < config.repeats; ++repeat) {
      report.runs.push_back(run_absolute_once(config, inputs, repeat));
    }
  } else {
    for (int t = 0; t < static_cast<int>(inputs.comparative_templates.size());
         ++t) {
      for (int repeat = 0; repeat < config.repeats; ++repeat) {
        report.runs.push_back(run_comparative_once(config, inputs, t, repeat));
      }
    }
  }
  report.means = detail::means_over(report.runs);
  for (int t = 0; t < static_cast<int>(std::max<std::size_t>(
                          inputs.comparative_templates.size(), 1));
       ++t) {
    std::vector<SingleRun> slice;
    for (const auto& run : report.runs) {
      if (run.template_index == t) slice.push_back(run);
    }
    if (!slice.empty()) {
      report.per_template[t] = detail::means_over(slice);
    }
  }
  if (!config.output_dir.empty()) {
    emit_report(report, config.output_dir);
  }
  return report;
}

inline RunReport run_pipeline(const RunConfig& config) {
  return run_pipeline(config, build_inputs(config));
}

}  // namespace pairrank
