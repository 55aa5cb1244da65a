#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairrank/core.hpp"
#include "pairrank/debias.hpp"
#include "pairrank/errors.hpp"
#include "pairrank/metrics.hpp"

namespace pairrank {

struct InstanceResult {
  std::string instance_id;
  int candidate_count = 0;
  int record_count = 0;
  std::optional<RankOutcome> outcome;      // debiased when debiasing is on
  std::optional<RankOutcome> raw_outcome;  // pre-debias, for comparison
  std::optional<double> spearman;
  std::optional<double> raw_spearman;
  std::optional<double> accuracy;
  std::optional<double> raw_accuracy;
};

struct MetricsBlock {
  std::optional<SummaryCorrelation> summary;
  std::optional<double> system;
  std::optional<double> accuracy;  // pooled over all eligible records
};

/// One pipeline execution: a single prompt template and repeat seed.
struct SingleRun {
  int template_index = 0;
  int repeat_index = 0;
  std::string template_fingerprint;
  std::string judge_fingerprint;
  std::uint64_t plan_seed = 0;
  std::uint64_t noise_seed = 0;
  std::optional<PositionPriors> priors;
  std::optional<BiasCalibration> calibration;
  std::vector<InstanceResult> instances;
  MetricsBlock metrics;                      // debiased when debiasing is on
  std::optional<MetricsBlock> raw_metrics;   // pre-debias
  std::size_t judge_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t failed_pairs = 0;
  int clamped_probabilities = 0;
};

struct AggregateMeans {
  std::optional<double> summary_spearman;
  std::optional<double> system_spearman;
  std::optional<double> accuracy;
  int runs = 0;
};

/// Full result of a `run` invocation. Serialization is fully deterministic
/// (sorted keys, shortest round-trip doubles, no timestamps), so identical
/// config plus identical cache state yields byte-identical files.
struct RunReport {
  nlohmann::json config;
  std::vector<SingleRun> runs;
  AggregateMeans means;
  std::map<int, AggregateMeans> per_template;
};

struct SweepRow {
  std::string strategy;
  int budget = 0;
  std::uint64_t seed = 0;
  double rho = 0.0;
};

// ---------------------------------------------------------------------------
// JSON layout.
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& value) {
  return value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const PositionPriors& priors) {
  return {{"first", priors.first},
          {"second", priors.second},
          {"records", priors.count},
          {"from_symmetric_plan", priors.from_symmetric_plan}};
}

inline nlohmann::json to_json(const BiasCalibration& calibration) {
  return {{"prior_first", calibration.prior_first},
          {"prior_second", calibration.prior_second},
          {"alpha", calibration.alpha},
          {"threshold", calibration.threshold},
          {"records", calibration.record_count},
          {"from_symmetric_plan", calibration.from_symmetric_plan}};
}

inline nlohmann::json to_json(const MetricsBlock& block) {
  nlohmann::json out;
  if (block.summary) {
    out["summary_spearman"] = {{"mean", block.summary->mean},
                               {"instances_used", block.summary->used},
                               {"instances_excluded",
                                block.summary->excluded}};
  } else {
    out["summary_spearman"] = nullptr;
  }
  out["system_spearman"] = opt_json(block.system);
  out["pairwise_accuracy"] = opt_json(block.accuracy);
  return out;
}

inline nlohmann::json to_json(const AggregateMeans& means) {
  return {{"summary_spearman", opt_json(means.summary_spearman)},
          {"system_spearman", opt_json(means.system_spearman)},
          {"pairwise_accuracy", opt_json(means.accuracy)},
          {"runs", means.runs}};
}

inline nlohmann::json to_json(const InstanceResult& instance) {
  nlohmann::json out{{"instance_id", instance.instance_id},
                     {"candidates", instance.candidate_count},
                     {"records", instance.record_count},
                     {"spearman", opt_json(instance.spearman)},
                     {"pairwise_accuracy", opt_json(instance.accuracy)}};
  if (instance.outcome) {
    out["scores"] = instance.outcome->scores;
    out["ranks"] = instance.outcome->ranks;
  } else {
    out["scores"] = nullptr;
    out["ranks"] = nullptr;
  }
  if (instance.raw_outcome) {
    out["raw"] = {{"scores", instance.raw_outcome->scores},
                  {"ranks", instance.raw_outcome->ranks},
                  {"spearman", opt_json(instance.raw_spearman)},
                  {"pairwise_accuracy", opt_json(instance.raw_accuracy)}};
  }
  return out;
}

inline nlohmann::json to_json(const SingleRun& run) {
  nlohmann::json out{{"template_index", run.template_index},
                     {"repeat", run.repeat_index},
                     {"template_fingerprint", run.template_fingerprint},
                     {"judge_fingerprint", run.judge_fingerprint},
                     {"plan_seed", run.plan_seed},
                     {"noise_seed", run.noise_seed},
                     {"judge_calls", run.judge_calls},
                     {"cache_hits", run.cache_hits},
                     {"failed_pairs", run.failed_pairs},
                     {"clamped_probabilities", run.clamped_probabilities},
                     {"metrics", to_json(run.metrics)}};
  out["priors"] = run.priors ? to_json(*run.priors) : nlohmann::json(nullptr);
  out["calibration"] =
      run.calibration ? to_json(*run.calibration) : nlohmann::json(nullptr);
  out["raw_metrics"] =
      run.raw_metrics ? to_json(*run.raw_metrics) : nlohmann::json(nullptr);
  auto& instances = out["instances"] = nlohmann::json::array();
  for (const auto& instance : run.instances) {
    instances.push_back(to_json(instance));
  }
  return out;
}

inline std::string csv_number(double value) {
  return nlohmann::json(value).dump();
}

inline std::string csv_text(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string quoted = "\"";
  for (const char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

}  // namespace detail

inline nlohmann::json report_to_json(const RunReport& report) {
  nlohmann::json out{{"config", report.config},
                     {"means", detail::to_json(report.means)}};
  auto& runs = out["runs"] = nlohmann::json::array();
  for (const auto& run : report.runs) runs.push_back(detail::to_json(run));
  auto& per_template = out["per_template"] = nlohmann::json::object();
  for (const auto& [index, means] : report.per_template) {
    per_template[std::to_string(index)] = detail::to_json(means);
  }
  return out;
}

/// Writes report.json and report.csv (one row per run x instance x metric)
/// into `directory`, creating it if needed.
inline void emit_report(const RunReport& report,
                        const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + directory.string() +
                  "': " + ec.message());
  }
  {
    std::ofstream json_out(directory / "report.json", std::ios::binary);
    if (!json_out) {
      throw IoError("cannot write " + (directory / "report.json").string());
    }
    json_out << report_to_json(report).dump(2) << '\n';
  }
  std::ofstream csv(directory / "report.csv", std::ios::binary);
  if (!csv) {
    throw IoError("cannot write " + (directory / "report.csv").string());
  }
  csv << "run,template_index,repeat,instance_id,metric,value\n";
  const auto cell = [](const std::optional<double>& value) {
    return value ? detail::csv_number(*value) : std::string();
  };
  for (std::size_t r = 0; r < report.runs.size(); ++r) {
    const SingleRun& run = report.runs[r];
    const std::string prefix = std::to_string(r) + ',' +
                               std::to_string(run.template_index) + ',' +
                               std::to_string(run.repeat_index) + ',';
    for (const auto& instance : run.instances) {
      const std::string id = detail::csv_text(instance.instance_id);
      csv << prefix << id << ",spearman," << cell(instance.spearman) << '\n';
      csv << prefix << id << ",pairwise_accuracy," << cell(instance.accuracy)
          << '\n';
      csv << prefix << id << ",records," << instance.record_count << '\n';
      if (run.raw_metrics) {
        csv << prefix << id << ",raw_spearman," << cell(instance.raw_spearman)
            << '\n';
        csv << prefix << id << ",raw_pairwise_accuracy,"
            << cell(instance.raw_accuracy) << '\n';
      }
    }
  }
  if (!csv) {
    throw IoError("failed writing " + (directory / "report.csv").string());
  }
}

/// Writes budget-sweep rows as plot-ready CSV.
inline void emit_sweep(const std::vector<SweepRow>& rows,
                       const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream csv(path, std::ios::binary);
  if (!csv) {
    throw IoError("cannot write " + path.string());
  }
  csv << "strategy,R,seed,rho\n";
  for (const auto& row : rows) {
    csv << row.strategy << ',' << row.budget << ',' << row.seed << ','
        << detail::csv_number(row.rho) << '\n';
  }
  if (!csv) {
    throw IoError("failed writing " + path.string());
  }
}

}  // namespace pairrank
