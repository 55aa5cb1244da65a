#pragma once

#include <random>
#include <string>
#include <vector>

#include "pairrank/pairrank.hpp"

namespace testsupport {

using namespace pairrank;

/// A candidate set whose texts are placeholders; only the gold scores
/// matter for synthetic judging.
inline CandidateSet make_set(const std::string& id,
                             std::vector<double> gold_scores,
                             const std::string& attribute = "coherent") {
  CandidateSet set;
  set.instance_id = id;
  set.context = "context for " + id;
  set.candidates.reserve(gold_scores.size());
  for (std::size_t k = 0; k < gold_scores.size(); ++k) {
    set.candidates.push_back(id + "-candidate-" + std::to_string(k));
  }
  set.gold_scores = std::move(gold_scores);
  set.attribute = attribute;
  return set;
}

inline ComparisonRecord record_of(int i, int j, double probability) {
  ComparisonRecord record;
  record.first_index = i;
  record.second_index = j;
  record.probability = probability;
  record.decision = probability > 0.5 ? 1 : 0;
  return record;
}

inline ComparisonRecord decision_only(int i, int j, int decision) {
  ComparisonRecord record;
  record.first_index = i;
  record.second_index = j;
  record.decision = decision;
  return record;
}

/// Judges every pair of a plan directly (no cache, no pipeline).
inline std::vector<ComparisonRecord> judge_plan(ComparativeJudge& judge,
                                                const CandidateSet& set,
                                                const ComparisonPlan& plan) {
  std::vector<ComparisonRecord> records;
  records.reserve(plan.pairs.size());
  for (const auto& [i, j] : plan.pairs) {
    const Comparison comparison = judge.compare(set, i, j);
    ComparisonRecord record;
    record.first_index = i;
    record.second_index = j;
    record.probability = comparison.probability;
    record.decision = comparison.decision;
    record.judge_tag = comparison.tag;
    records.push_back(std::move(record));
  }
  return records;
}

/// Distinct gold scores 1..n in a seeded random order.
inline std::vector<double> shuffled_scores(int n, std::uint64_t seed) {
  std::vector<double> scores(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) scores[static_cast<std::size_t>(k)] = k + 1;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k + 1 < scores.size(); ++k) {
    std::swap(scores[k], scores[k + draw_below(rng, scores.size() - k)]);
  }
  return scores;
}

inline std::vector<double> uniform_scores(int n, std::uint64_t seed,
                                          double low = 0.0,
                                          double high = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<double> scores(static_cast<std::size_t>(n));
  for (auto& s : scores) s = low + (high - low) * draw_unit(rng);
  return scores;
}

}  // namespace testsupport
