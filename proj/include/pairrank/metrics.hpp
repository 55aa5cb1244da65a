#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pairrank/core.hpp"
#include "pairrank/errors.hpp"

namespace pairrank {

/// Tie-correct Spearman correlation: both inputs are converted to average
/// ranks and the Pearson correlation of the rank vectors is returned.
/// A zero-variance rank vector makes the correlation undefined, signalled
/// as nullopt (callers exclude those from averages rather than imputing).
inline std::optional<double> spearman(std::span<const double> a,
                                      std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("spearman inputs differ in length: " +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  if (a.size() < 2) {
    throw ShapeError("spearman needs at least 2 observations");
  }
  const std::vector<double> ra = average_ranks(a, /*best_is_highest=*/false);
  const std::vector<double> rb = average_ranks(b, /*best_is_highest=*/false);
  const double n = static_cast<double>(ra.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    mean_a += ra[k];
    mean_b += rb[k];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    const double da = ra[k] - mean_a;
    const double db = rb[k] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) return std::nullopt;
  return cov / std::sqrt(var_a * var_b);
}

struct SummaryCorrelation {
  double mean = 0.0;
  int used = 0;
  int excluded = 0;  // instances whose correlation was undefined
};

/// Mean per-instance correlation, skipping undefined entries.
inline SummaryCorrelation summary_level(
    std::span<const std::optional<double>> per_instance_rho) {
  SummaryCorrelation out;
  double sum = 0.0;
  for (const auto& rho : per_instance_rho) {
    if (rho) {
      sum += *rho;
      ++out.used;
    } else {
      ++out.excluded;
    }
  }
  if (out.used == 0) {
    throw NoMetricError("every per-instance correlation was undefined");
  }
  out.mean = sum / out.used;
  return out;
}

/// System-level correlation: scores are averaged per system (candidate
/// slot) across instances, then the two mean vectors are correlated.
inline std::optional<double> system_level(
    const std::vector<std::vector<double>>& predicted,
    const std::vector<std::vector<double>>& gold) {
  if (predicted.size() != gold.size() || predicted.empty()) {
    throw ShapeError("system_level needs matching, non-empty matrices");
  }
  const std::size_t systems = predicted.front().size();
  if (systems < 2) {
    throw ShapeError("system_level needs at least 2 systems");
  }
  std::vector<double> mean_pred(systems, 0.0), mean_gold(systems, 0.0);
  for (std::size_t row = 0; row < predicted.size(); ++row) {
    if (predicted[row].size() != systems || gold[row].size() != systems) {
      throw ShapeError("ragged score matrix at instance " +
                       std::to_string(row));
    }
    for (std::size_t s = 0; s < systems; ++s) {
      mean_pred[s] += predicted[row][s];
      mean_gold[s] += gold[row][s];
    }
  }
  for (std::size_t s = 0; s < systems; ++s) {
    mean_pred[s] /= static_cast<double>(predicted.size());
    mean_gold[s] /= static_cast<double>(predicted.size());
  }
  return spearman(mean_pred, mean_gold);
}

struct AccuracyCounts {
  std::size_t correct = 0;
  std::size_t eligible = 0;

  AccuracyCounts& operator+=(const AccuracyCounts& other) {
    correct += other.correct;
    eligible += other.eligible;
    return *this;
  }
};

/// Counts decisions matching the gold outcome over records whose gold
/// scores differ. Tied-gold records never enter the denominator. Counts
/// from several instances can be summed before dividing.
inline AccuracyCounts accuracy_counts(
    std::span<const ComparisonRecord> records,
    std::span<const double> gold_scores) {
  AccuracyCounts counts;
  for (const auto& record : records) {
    const PairOutcome truth =
        true_outcome(gold_scores, record.first_index, record.second_index);
    if (truth == PairOutcome::kTie) continue;
    ++counts.eligible;
    const int expected = truth == PairOutcome::kFirstWins ? 1 : 0;
    if (record.decision == expected) ++counts.correct;
  }
  return counts;
}

/// Fraction of comparison decisions matching the gold outcome.
inline double pairwise_accuracy(std::span<const ComparisonRecord> records,
                                std::span<const double> gold_scores) {
  const AccuracyCounts counts = accuracy_counts(records, gold_scores);
  if (counts.eligible == 0) {
    throw NoMetricError(
        "no record with differing gold scores; pairwise accuracy undefined");
  }
  return static_cast<double>(counts.correct) /
         static_cast<double>(counts.eligible);
}

/// Agreement between two rankings of the same M candidates: the fraction of
/// unordered pairs both rankings order the same way. Pairs tied in either
/// ranking are excluded.
inline double self_consistency(const RankOutcome& subset,
                               const RankOutcome& reference) {
  const std::size_t m = subset.ranks.size();
  if (m != reference.ranks.size() || m < 2) {
    throw ShapeError("self_consistency needs two rankings of the same >=2 "
                     "candidates");
  }
  std::size_t eligible = 0;
  std::size_t agree = 0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      const double ds = subset.ranks[a] - subset.ranks[b];
      const double dr = reference.ranks[a] - reference.ranks[b];
      if (ds == 0.0 || dr == 0.0) continue;
      ++eligible;
      if ((ds < 0.0) == (dr < 0.0)) ++agree;
    }
  }
  if (eligible == 0) {
    throw NoMetricError("every candidate pair is tied; consistency undefined");
  }
  return static_cast<double>(agree) / static_cast<double>(eligible);
}

}  // namespace pairrank
