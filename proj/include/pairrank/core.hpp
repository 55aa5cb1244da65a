#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pairrank/errors.hpp"

namespace pairrank {

/// One context with its candidate texts and optional gold scores.
struct CandidateSet {
  std::string instance_id;
  std::string context;
  std::vector<std::string> candidates;
  std::optional<std::vector<double>> gold_scores;
  std::string attribute;

  int size() const { return static_cast<int>(candidates.size()); }

  void validate() const {
    if (candidates.size() < 2) {
      throw ValidationError("instance '" + instance_id +
                            "' needs at least 2 candidates");
    }
    if (gold_scores && gold_scores->size() != candidates.size()) {
      throw ValidationError("instance '" + instance_id + "' has " +
                            std::to_string(gold_scores->size()) +
                            " gold scores for " +
                            std::to_string(candidates.size()) + " candidates");
    }
  }

  std::span<const double> gold() const {
    if (!gold_scores) {
      throw GoldUnavailableError("instance '" + instance_id +
                                 "' carries no gold scores");
    }
    return *gold_scores;
  }
};

enum class Strategy { kFull, kRandom, kNoRepeat, kSymmetric };

inline std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kFull: return "full";
    case Strategy::kRandom: return "random";
    case Strategy::kNoRepeat: return "no_repeat";
    case Strategy::kSymmetric: return "symmetric";
  }
  return "unknown";
}

inline Strategy strategy_from_string(const std::string& name) {
  if (name == "full") return Strategy::kFull;
  if (name == "random") return Strategy::kRandom;
  if (name == "no_repeat") return Strategy::kNoRepeat;
  if (name == "symmetric") return Strategy::kSymmetric;
  throw ValidationError("unknown strategy '" + name + "'");
}

/// One judged ordered pair. `probability` is absent for judges that only
/// emit hard decisions; such records cannot be recalibrated.
struct ComparisonRecord {
  int first_index = 0;
  int second_index = 0;
  std::optional<double> probability;
  int decision = 0;
  std::string judge_tag;
};

/// The set of ordered pairs scheduled for judging.
struct ComparisonPlan {
  std::vector<std::pair<int, int>> pairs;
  Strategy strategy = Strategy::kFull;
  int budget = 0;
  std::uint64_t seed = 0;
};

/// Aggregate candidate scores with tie-aware ranks. Rank 1 is the best
/// candidate; tied scores share the average of their positions.
struct RankOutcome {
  std::vector<double> scores;
  std::vector<double> ranks;
};

enum class PairOutcome { kFirstWins, kSecondWins, kTie };

namespace detail {

inline void check_pair_indices(int n, int i, int j) {
  if (i < 0 || j < 0 || i >= n || j >= n) {
    throw ValidationError("candidate index out of range: (" +
                          std::to_string(i) + ", " + std::to_string(j) +
                          ") with N=" + std::to_string(n));
  }
  if (i == j) {
    throw ValidationError("a candidate cannot be compared with itself");
  }
}

}  // namespace detail

/// Ground-truth outcome of comparing candidates i and j by gold score.
/// Ties are reported distinctly; callers exclude them from accuracy
/// denominators.
inline PairOutcome true_outcome(std::span<const double> gold_scores, int i,
                                int j) {
  detail::check_pair_indices(static_cast<int>(gold_scores.size()), i, j);
  const double si = gold_scores[static_cast<std::size_t>(i)];
  const double sj = gold_scores[static_cast<std::size_t>(j)];
  if (si > sj) return PairOutcome::kFirstWins;
  if (si < sj) return PairOutcome::kSecondWins;
  return PairOutcome::kTie;
}

inline PairOutcome true_outcome(const CandidateSet& set, int i, int j) {
  return true_outcome(set.gold(), i, j);
}

/// Hard decision from a comparison probability. Strictly greater than the
/// threshold selects the first candidate; equality maps to 0.
inline int decide(double probability, double threshold = 0.5) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidCalibrationError("decision threshold must lie in (0, 1), got " +
                                  std::to_string(threshold));
  }
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ValidationError("comparison probability must lie in [0, 1], got " +
                          std::to_string(probability));
  }
  return probability > threshold ? 1 : 0;
}

/// Average ranks of `values`. With `best_is_highest` the largest value gets
/// rank 1 (candidate convention); otherwise the smallest does (the usual
/// statistical convention used for rank correlation).
inline std::vector<double> average_ranks(std::span<const double> values,
                                         bool best_is_highest) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return best_is_highest ? values[a] > values[b]
                                            : values[a] < values[b];
                   });
  std::vector<double> ranks(n, 0.0);
  std::size_t pos = 0;
  while (pos < n) {
    std::size_t end = pos + 1;
    while (end < n && values[order[end]] == values[order[pos]]) ++end;
    // Positions pos..end-1 are tied; each gets the average 1-based rank.
    const double rank = (static_cast<double>(pos + 1) +
                         static_cast<double>(end)) / 2.0;
    for (std::size_t k = pos; k < end; ++k) ranks[order[k]] = rank;
    pos = end;
  }
  return ranks;
}

inline RankOutcome rank_outcome_from_scores(std::vector<double> scores) {
  RankOutcome outcome;
  outcome.ranks = average_ranks(scores, /*best_is_highest=*/true);
  outcome.scores = std::move(scores);
  return outcome;
}

}  // namespace pairrank
