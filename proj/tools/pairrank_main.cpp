// pairrank: rank candidate texts by pairwise comparative judgments.
//
// Subcommands:
//   run            judge -> plan -> compare -> (debias) -> rank -> metrics
//   sweep          summary correlation across budgets/strategies/seeds
//   calibrate      measure positional priors and the debiasing threshold
//   inspect-cache  show what an existing comparison cache contains

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pairrank/pairrank.hpp"

namespace {

using namespace pairrank;

std::string load_config_argument(int argc, char** argv) {
  for (int k = 1; k < argc; ++k) {
    const std::string arg = argv[k];
    if (arg == "--config" && k + 1 < argc) return argv[k + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

void load_config_file(const std::string& path, RunConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json parsed =
      nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    throw ParseError("config file '" + path + "' is not valid JSON");
  }
  config_from_json(parsed, config);
}

/// Mutable string views of the enum-ish config fields, bound to CLI flags
/// and converted back after parsing.
struct ConfigStrings {
  std::string mode = "comparative";
  std::string judge = "synthetic";
  std::string strategy = "full";
  std::string decoder = "win_ratio";
  std::string remote_mode = "label_probability";
  std::string synthetic_noise = "none";
  std::string likelihood_mode = "soft";

  void seed_from(const RunConfig& config) {
    mode = config.mode == AssessMode::kComparative ? "comparative"
                                                   : "absolute";
    judge = config.judge == JudgeKind::kSynthetic ? "synthetic" : "remote";
    strategy = to_string(config.strategy);
    decoder = to_string(config.decoder);
    remote_mode = to_string(config.remote.mode);
    synthetic_noise = config.synthetic.noise == SyntheticNoise::kNone
                          ? "none"
                          : config.synthetic.noise == SyntheticNoise::kBernoulli
                                ? "bernoulli"
                                : "sampled";
    likelihood_mode =
        config.likelihood.mode == LikelihoodMode::kSoft ? "soft"
                                                        : "approximate";
  }

  void apply_to(RunConfig& config) const {
    if (mode == "comparative") {
      config.mode = AssessMode::kComparative;
    } else if (mode == "absolute") {
      config.mode = AssessMode::kAbsolute;
    } else {
      throw ValidationError("unknown mode '" + mode + "'");
    }
    if (judge == "synthetic") {
      config.judge = JudgeKind::kSynthetic;
    } else if (judge == "remote") {
      config.judge = JudgeKind::kRemote;
    } else {
      throw ValidationError("unknown judge '" + judge + "'");
    }
    config.strategy = strategy_from_string(strategy);
    config.decoder = decoder_from_string(decoder);
    config.remote.mode = remote_mode_from_string(remote_mode);
    if (synthetic_noise == "none") {
      config.synthetic.noise = SyntheticNoise::kNone;
    } else if (synthetic_noise == "bernoulli") {
      config.synthetic.noise = SyntheticNoise::kBernoulli;
    } else if (synthetic_noise == "sampled") {
      config.synthetic.noise = SyntheticNoise::kSampled;
    } else {
      throw ValidationError("unknown noise mode '" + synthetic_noise + "'");
    }
    if (likelihood_mode == "soft") {
      config.likelihood.mode = LikelihoodMode::kSoft;
    } else if (likelihood_mode == "approximate") {
      config.likelihood.mode = LikelihoodMode::kApproximate;
    } else {
      throw ValidationError("unknown likelihood mode '" + likelihood_mode +
                            "'");
    }
  }
};

void add_common_options(CLI::App& cmd, RunConfig& config,
                        ConfigStrings& strings) {
  static std::string ignored;
  cmd.add_option("--config", ignored,
                 "JSON config file; flags given here override its values");
  cmd.add_option("--dataset", config.dataset_path,
                 "JSONL dataset (instance_id, context, candidates[], "
                 "optional gold_scores[], optional attribute)");
  cmd.add_option("--attribute", config.attribute,
                 "attribute for instances that do not set one");
  cmd.add_option("--mode", strings.mode, "comparative|absolute");
  cmd.add_option("--judge", strings.judge, "synthetic|remote");
  cmd.add_option("--template", config.template_paths,
                 "comparative template: a file path, builtin:1 or builtin:2 "
                 "(repeatable; each runs separately and is averaged)");
  cmd.add_option("--scoring-template", config.scoring_template_path,
                 "scoring template for absolute mode");
  cmd.add_option("--kind", config.response_kind,
                 "what a candidate is called, e.g. summary or response");
  cmd.add_option("--label-first", config.label_first,
                 "answer label naming the first candidate");
  cmd.add_option("--label-second", config.label_second,
                 "answer label naming the second candidate");
  cmd.add_option("--strategy", strings.strategy,
                 "full|random|no_repeat|symmetric");
  cmd.add_option("--budget", config.budget,
                 "comparisons per instance for budgeted strategies");
  cmd.add_option("--plan-seed", config.plan_seed, "seed for plan selection");
  cmd.add_option("--noise-seed", config.noise_seed,
                 "seed for synthetic judge noise");
  cmd.add_option("--repeats", config.repeats,
                 "seeded repetitions averaged in the report");
  cmd.add_option("--decode", strings.decoder,
                 "win_ratio|ml_greedy|ml_brute");
  cmd.add_option("--conditional-accuracy",
                 config.likelihood.conditional_accuracy,
                 "P(decision=1|first better) for approximate likelihood");
  cmd.add_option("--likelihood-mode", strings.likelihood_mode,
                 "soft|approximate");
  cmd.add_flag("--debias", config.debias,
               "calibrate the decision threshold on pooled records");
  cmd.add_option("--concurrency", config.concurrency,
                 "parallel instances / in-flight judge calls");
  cmd.add_option("--failure-tolerance", config.failure_tolerance,
                 "fraction of judge failures tolerated before aborting");
  cmd.add_option("--cache", config.cache_path,
                 "append-only JSONL comparison cache");
  cmd.add_option("--out", config.output_dir,
                 "directory for report.json / report.csv");
  // Synthetic judge.
  cmd.add_option("--beta", config.synthetic.sharpness,
                 "synthetic judge sharpness");
  cmd.add_option("--bias", config.synthetic.positional_logit_bias,
                 "synthetic judge first-position logit bias");
  cmd.add_option("--noise", strings.synthetic_noise,
                 "synthetic noise: none|bernoulli|sampled");
  cmd.add_option("--samples", config.synthetic.sample_count,
                 "draws per pair for sampled synthetic noise");
  cmd.add_option("--scorer-sigma", config.synthetic_scorer_sigma,
                 "gaussian noise of the synthetic absolute scorer");
  // Remote judge.
  cmd.add_option("--endpoint", config.remote.endpoint,
                 "OpenAI-compatible completion endpoint");
  cmd.add_option("--model", config.remote.model_name, "model name");
  cmd.add_option("--judge-mode", strings.remote_mode,
                 "label_probability|sampling");
  cmd.add_option("--samples-k", config.remote.samples,
                 "generations per comparison in sampling mode");
  cmd.add_option("--temperature", config.remote.temperature,
                 "generation temperature");
  cmd.add_option("--max-tokens", config.remote.max_generated_tokens,
                 "max generated tokens for sampling/scoring");
  cmd.add_option("--top-logprobs", config.remote.top_logprobs,
                 "alternatives requested per generated position");
  cmd.add_option("--timeout", config.remote.retry.timeout_seconds,
                 "per-request timeout in seconds");
  cmd.add_option("--retries", config.remote.retry.max_retries,
                 "retries after a transient judge failure");
  cmd.add_option("--api-key-env", config.remote.api_key_env,
                 "environment variable holding the API key");
}

void print_run_summary(const RunReport& report) {
  const auto show = [](const char* name, const std::optional<double>& value) {
    if (value) {
      std::printf("  %-22s %.4f\n", name, *value);
    } else {
      std::printf("  %-22s (undefined)\n", name);
    }
  };
  for (const auto& run : report.runs) {
    std::printf("run template=%d repeat=%d  judge_calls=%zu cache_hits=%zu\n",
                run.template_index, run.repeat_index, run.judge_calls,
                run.cache_hits);
    if (run.priors) {
      std::printf("  priors                 P(A)=%.4f P(B)=%.4f%s\n",
                  run.priors->first, run.priors->second,
                  run.priors->from_symmetric_plan ? ""
                                                  : "  [plan not symmetric]");
    }
    if (run.calibration) {
      std::printf("  calibration            tau=%.4f alpha=%.4f\n",
                  run.calibration->threshold, run.calibration->alpha);
    }
    show("summary spearman",
         run.metrics.summary
             ? std::optional<double>(run.metrics.summary->mean)
             : std::nullopt);
    show("system spearman", run.metrics.system);
    show("pairwise accuracy", run.metrics.accuracy);
    if (run.raw_metrics) {
      show("raw summary spearman",
           run.raw_metrics->summary
               ? std::optional<double>(run.raw_metrics->summary->mean)
               : std::nullopt);
      show("raw pairwise accuracy", run.raw_metrics->accuracy);
    }
  }
  if (report.runs.size() > 1) {
    std::printf("means over %d runs\n", report.means.runs);
    show("summary spearman", report.means.summary_spearman);
    show("system spearman", report.means.system_spearman);
    show("pairwise accuracy", report.means.accuracy);
  }
}

int command_run(RunConfig config) {
  const RunReport report = run_pipeline(config);
  print_run_summary(report);
  if (!config.output_dir.empty()) {
    std::printf("wrote %s/report.json and report.csv\n",
                config.output_dir.c_str());
  }
  return 0;
}

int command_sweep(RunConfig config, const std::vector<int>& budgets,
                  const std::vector<std::string>& strategy_names, int seeds,
                  const std::string& sweep_out) {
  if (budgets.empty()) throw ValidationError("sweep needs --budgets");
  if (seeds < 1) throw ValidationError("sweep needs --seeds >= 1");
  std::vector<Strategy> strategies;
  for (const auto& name : strategy_names) {
    strategies.push_back(strategy_from_string(name));
  }
  RunConfig probe = config;
  probe.strategy = strategies.front();
  probe.budget = budgets.front();
  const PipelineInputs inputs = build_inputs(probe);
  std::vector<SweepRow> rows;
  for (const Strategy strategy : strategies) {
    for (const int budget : budgets) {
      double total = 0.0;
      int defined = 0;
      bool feasible = true;
      for (int seed = 0; seed < seeds && feasible; ++seed) {
        RunConfig cell = config;
        cell.strategy = strategy;
        cell.budget = budget;
        cell.repeats = 1;
        cell.plan_seed = mix_seed(config.plan_seed,
                                  static_cast<std::uint64_t>(seed));
        cell.noise_seed = mix_seed(config.noise_seed,
                                   static_cast<std::uint64_t>(seed));
        cell.output_dir.clear();
        try {
          const RunReport report = run_pipeline(cell, inputs);
          const auto& summary = report.runs.at(0).metrics.summary;
          if (!summary) continue;
          rows.push_back({to_string(strategy), budget,
                          static_cast<std::uint64_t>(seed), summary->mean});
          total += summary->mean;
          ++defined;
        } catch (const BudgetError& e) {
          // Strategies cap out at different maxima (no_repeat holds each
          // pair once); skip the cell rather than abort the sweep.
          std::printf("strategy=%-10s R=%5d skipped: %s\n",
                      to_string(strategy).c_str(), budget, e.what());
          feasible = false;
        }
      }
      if (!feasible) continue;
      std::printf("strategy=%-10s R=%5d seeds=%d mean_rho=%s\n",
                  to_string(strategy).c_str(), budget, defined,
                  defined ? std::to_string(total / defined).c_str() : "n/a");
    }
  }
  const std::string path =
      !sweep_out.empty()
          ? sweep_out
          : (config.output_dir.empty() ? std::string("sweep.csv")
                                       : config.output_dir + "/sweep.csv");
  emit_sweep(rows, path);
  std::printf("wrote %s (%zu rows)\n", path.c_str(), rows.size());
  return 0;
}

int command_calibrate(RunConfig config) {
  // Calibration wants reversed pairs; the full matrix is symmetric, so the
  // default strategy already qualifies.
  if (config.strategy != Strategy::kFull &&
      config.strategy != Strategy::kSymmetric) {
    std::fprintf(stderr,
                 "note: %s plans have no reversed pairs; P(B) is reported "
                 "as 1 - P(A)\n",
                 to_string(config.strategy).c_str());
  }
  config.debias = true;
  config.output_dir.clear();
  const RunReport report = run_pipeline(config);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& run : report.runs) {
    if (!run.calibration) continue;
    out.push_back({{"template_index", run.template_index},
                   {"prior_first", run.calibration->prior_first},
                   {"prior_second", run.calibration->prior_second},
                   {"alpha", run.calibration->alpha},
                   {"threshold", run.calibration->threshold},
                   {"records", run.calibration->record_count},
                   {"from_symmetric_plan",
                    run.calibration->from_symmetric_plan}});
  }
  std::printf("%s\n", out.dump(2).c_str());
  return 0;
}

int command_inspect_cache(const std::string& path) {
  const ComparisonCache cache{std::filesystem::path(path)};
  const auto stats = cache.stats();
  nlohmann::json out{{"comparisons", stats.comparisons},
                     {"scores", stats.scores},
                     {"instances", stats.by_instance.size()},
                     {"judges", nlohmann::json::object()}};
  for (const auto& [judge, count] : stats.by_judge) {
    out["judges"][judge] = count;
  }
  std::printf("%s\n", out.dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairwise comparative assessment of candidate texts"};
  app.require_subcommand(1);

  RunConfig config;
  const std::string config_path = load_config_argument(argc, argv);
  try {
    if (!config_path.empty()) load_config_file(config_path, config);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  ConfigStrings strings;
  strings.seed_from(config);

  auto* run_cmd = app.add_subcommand("run", "run the assessment pipeline");
  add_common_options(*run_cmd, config, strings);

  auto* sweep_cmd =
      app.add_subcommand("sweep", "summary correlation across budgets");
  add_common_options(*sweep_cmd, config, strings);
  std::vector<int> budgets;
  std::vector<std::string> sweep_strategies{"random", "no_repeat",
                                            "symmetric"};
  int sweep_seeds = 10;
  std::string sweep_out;
  sweep_cmd->add_option("--budgets", budgets, "budgets R to sweep")
      ->delimiter(',');
  sweep_cmd->add_option("--strategies", sweep_strategies,
                        "strategies to sweep")
      ->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep_seeds, "seeded runs per cell");
  sweep_cmd->add_option("--sweep-out", sweep_out, "path of the sweep CSV");

  auto* calibrate_cmd = app.add_subcommand(
      "calibrate", "estimate positional priors and the threshold");
  add_common_options(*calibrate_cmd, config, strings);

  auto* inspect_cmd =
      app.add_subcommand("inspect-cache", "summarize a comparison cache");
  std::string inspect_path;
  inspect_cmd->add_option("--cache", inspect_path, "cache JSONL file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    strings.apply_to(config);
    if (run_cmd->parsed()) return command_run(config);
    if (sweep_cmd->parsed()) {
      return command_sweep(config, budgets, sweep_strategies, sweep_seeds,
                           sweep_out);
    }
    if (calibrate_cmd->parsed()) return command_calibrate(config);
    if (inspect_cmd->parsed()) return command_inspect_cache(inspect_path);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
