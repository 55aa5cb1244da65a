#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "pairrank/core.hpp"
#include "pairrank/errors.hpp"
#include "pairrank/judge.hpp"

namespace pairrank {

/// Append-only JSONL store of judge outputs, keyed by
/// (instance, pair, judge fingerprint, template fingerprint). Reruns with
/// an unchanged judge and template replay from here without any judge
/// calls. Concurrent readers are lock-free against each other; writers are
/// serialized and flush each line immediately.
class ComparisonCache {
 public:
  /// In-memory cache; nothing is persisted.
  ComparisonCache() = default;

  /// Opens (or creates) a JSONL cache file and loads existing entries.
  /// A final line without a newline is treated as a truncated write and
  /// ignored; any other malformed line raises ParseError.
  explicit ComparisonCache(const std::filesystem::path& path) : path_(path) {
    load();
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) {
      throw IoError("cannot open cache file '" + path_.string() +
                    "' for appending");
    }
  }

  std::optional<Comparison> find_comparison(const std::string& instance_id,
                                            int first, int second,
                                            const std::string& judge_fp,
                                            const std::string& template_fp)
      const {
    std::shared_lock lock(mutex_);
    const auto it = comparisons_.find(
        comparison_key(instance_id, first, second, judge_fp, template_fp));
    if (it == comparisons_.end()) return std::nullopt;
    return it->second;
  }

  void store_comparison(const std::string& instance_id, int first, int second,
                        const std::string& judge_fp,
                        const std::string& template_fp,
                        const Comparison& comparison) {
    nlohmann::json line{{"type", "comparison"},
                        {"instance_id", instance_id},
                        {"first", first},
                        {"second", second},
                        {"judge", judge_fp},
                        {"template", template_fp},
                        {"decision", comparison.decision},
                        {"tag", comparison.tag}};
    line["probability"] = comparison.probability
                              ? nlohmann::json(*comparison.probability)
                              : nlohmann::json(nullptr);
    std::unique_lock lock(mutex_);
    comparisons_[comparison_key(instance_id, first, second, judge_fp,
                                template_fp)] = comparison;
    append(line);
  }

  std::optional<double> find_score(const std::string& instance_id, int index,
                                   const std::string& judge_fp,
                                   const std::string& template_fp) const {
    std::shared_lock lock(mutex_);
    const auto it =
        scores_.find(score_key(instance_id, index, judge_fp, template_fp));
    if (it == scores_.end()) return std::nullopt;
    return it->second;
  }

  void store_score(const std::string& instance_id, int index,
                   const std::string& judge_fp, const std::string& template_fp,
                   double score, const std::string& tag) {
    nlohmann::json line{{"type", "score"},       {"instance_id", instance_id},
                        {"index", index},        {"judge", judge_fp},
                        {"template", template_fp}, {"score", score},
                        {"tag", tag}};
    std::unique_lock lock(mutex_);
    scores_[score_key(instance_id, index, judge_fp, template_fp)] = score;
    append(line);
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return comparisons_.size() + scores_.size();
  }

  /// Per-key-dimension counts for `inspect-cache`.
  struct Stats {
    std::size_t comparisons = 0;
    std::size_t scores = 0;
    std::map<std::string, std::size_t> by_instance;
    std::map<std::string, std::size_t> by_judge;
  };

  Stats stats() const {
    std::shared_lock lock(mutex_);
    return stats_;
  }

 private:
  static std::string comparison_key(const std::string& instance_id, int first,
                                    int second, const std::string& judge_fp,
                                    const std::string& template_fp) {
    return instance_id + '\x1f' + std::to_string(first) + '\x1f' +
           std::to_string(second) + '\x1f' + judge_fp + '\x1f' + template_fp;
  }

  static std::string score_key(const std::string& instance_id, int index,
                               const std::string& judge_fp,
                               const std::string& template_fp) {
    return instance_id + "\x1fS\x1f" + std::to_string(index) + '\x1f' +
           judge_fp + '\x1f' + template_fp;
  }

  void append(const nlohmann::json& line) {
    if (!out_.is_open()) {
      track(line);
      return;
    }
    out_ << line.dump() << '\n';
    out_.flush();
    if (!out_) {
      throw IoError("failed to append to cache file '" + path_.string() + "'");
    }
    track(line);
  }

  void track(const nlohmann::json& line) {
    if (line.at("type") == "comparison") {
      ++stats_.comparisons;
    } else {
      ++stats_.scores;
    }
    ++stats_.by_instance[line.at("instance_id").get<std::string>()];
    ++stats_.by_judge[line.at("judge").get<std::string>()];
  }

  void load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;  // fresh cache
    std::string text;
    std::size_t line_number = 0;
    while (std::getline(in, text)) {
      ++line_number;
      const bool last_and_unterminated = in.eof();
      if (text.empty()) continue;
      nlohmann::json line =
          nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
      if (line.is_discarded()) {
        if (last_and_unterminated) break;  // torn trailing write
        throw ParseError("cache '" + path_.string() + "' line " +
                         std::to_string(line_number) + ": invalid JSON");
      }
      try {
        const std::string type = line.at("type").get<std::string>();
        const std::string instance = line.at("instance_id").get<std::string>();
        const std::string judge = line.at("judge").get<std::string>();
        const std::string tmpl = line.at("template").get<std::string>();
        if (type == "comparison") {
          Comparison comparison;
          if (!line.at("probability").is_null()) {
            comparison.probability = line.at("probability").get<double>();
          }
          comparison.decision = line.at("decision").get<int>();
          comparison.tag = line.value("tag", std::string());
          comparisons_[comparison_key(instance, line.at("first").get<int>(),
                                      line.at("second").get<int>(), judge,
                                      tmpl)] = comparison;
        } else if (type == "score") {
          scores_[score_key(instance, line.at("index").get<int>(), judge,
                            tmpl)] = line.at("score").get<double>();
        } else {
          throw ParseError("cache '" + path_.string() + "' line " +
                           std::to_string(line_number) +
                           ": unknown record type '" + type + "'");
        }
        track(line);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError("cache '" + path_.string() + "' line " +
                         std::to_string(line_number) + ": " + e.what());
      }
    }
  }

  std::filesystem::path path_;
  std::ofstream out_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, Comparison> comparisons_;
  std::unordered_map<std::string, double> scores_;
  Stats stats_;
};

}  // namespace pairrank
