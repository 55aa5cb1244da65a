#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pairrank/core.hpp"
#include "pairrank/debias.hpp"
#include "pairrank/errors.hpp"

namespace pairrank {

enum class LikelihoodMode {
  kSoft,         // Bernoulli likelihood of the soft probabilities
  kApproximate,  // P(decision | implied order) from a single accuracy cell
};

struct LikelihoodParams {
  LikelihoodMode mode = LikelihoodMode::kSoft;
  /// P(decision = 1 | first truly better), approximate mode only. The other
  /// three conditional cells follow from this one. Must exceed 0.5 or the
  /// likelihood surface is flat or inverted.
  double conditional_accuracy = 0.75;
  /// Probabilities are clamped into [floor, 1 - floor] before taking logs.
  double floor = kProbabilityFloor;

  void validate() const {
    if (mode == LikelihoodMode::kApproximate &&
        !(conditional_accuracy > 0.5 && conditional_accuracy < 1.0)) {
      throw ValidationError(
          "approximate-likelihood conditional accuracy must lie in (0.5, 1), "
          "got " + std::to_string(conditional_accuracy));
    }
    if (!(floor > 0.0 && floor < 0.5)) {
      throw ValidationError("likelihood floor must lie in (0, 0.5)");
    }
  }
};

namespace detail {

inline void check_records(std::span<const ComparisonRecord> records, int n) {
  for (const auto& record : records) {
    check_pair_indices(n, record.first_index, record.second_index);
  }
}

}  // namespace detail

/// Win-ratio conversion: each candidate is scored by wins over comparisons
/// involving it. A candidate that never appears scores 0.5, keeping it
/// mid-ranked instead of last.
inline RankOutcome win_ratio(std::span<const ComparisonRecord> records,
                             int n) {
  if (records.empty()) {
    throw NoDataError("cannot rank candidates without comparison records");
  }
  detail::check_records(records, n);
  std::vector<double> wins(static_cast<std::size_t>(n), 0.0);
  std::vector<double> involved(static_cast<std::size_t>(n), 0.0);
  for (const auto& record : records) {
    const auto i = static_cast<std::size_t>(record.first_index);
    const auto j = static_cast<std::size_t>(record.second_index);
    involved[i] += 1.0;
    involved[j] += 1.0;
    if (record.decision == 1) {
      wins[i] += 1.0;
    } else {
      wins[j] += 1.0;
    }
  }
  std::vector<double> scores(static_cast<std::size_t>(n), 0.5);
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (involved[c] > 0.0) scores[c] = wins[c] / involved[c];
  }
  return rank_outcome_from_scores(std::move(scores));
}

/// Log-likelihood of a rank assignment given judged comparisons.
///
/// For each record, z = 1 when the ranks place the first candidate above
/// the second. Soft mode scores log p (z = 1) or log(1 - p) (z = 0);
/// approximate mode scores log P(decision | z). Tied ranks yield z = 0 in
/// both directions. Probabilities at 0 or 1 that contradict z are clamped
/// at the configured floor; `clamped` (when given) counts such events so
/// callers can warn.
inline double log_likelihood(std::span<const double> ranks,
                             std::span<const ComparisonRecord> records,
                             const LikelihoodParams& params,
                             int* clamped = nullptr) {
  params.validate();
  detail::check_records(records, static_cast<int>(ranks.size()));
  if (clamped) *clamped = 0;
  double total = 0.0;
  for (const auto& record : records) {
    const bool z = ranks[static_cast<std::size_t>(record.first_index)] <
                   ranks[static_cast<std::size_t>(record.second_index)];
    if (params.mode == LikelihoodMode::kApproximate) {
      const bool agrees = (record.decision == 1) == z;
      total += std::log(agrees ? params.conditional_accuracy
                               : 1.0 - params.conditional_accuracy);
      continue;
    }
    if (!record.probability) {
      throw ValidationError(
          "soft likelihood requires probabilities on every record");
    }
    double term = z ? *record.probability : 1.0 - *record.probability;
    if (term < params.floor) {
      term = params.floor;
      if (clamped) ++*clamped;
    }
    total += std::log(term);
  }
  return total;
}

inline double log_likelihood(const RankOutcome& outcome,
                             std::span<const ComparisonRecord> records,
                             const LikelihoodParams& params,
                             int* clamped = nullptr) {
  return log_likelihood(outcome.ranks, records, params, clamped);
}

namespace detail {

/// order[pos] = candidate at 1-based rank pos+1.
inline RankOutcome outcome_from_order(std::span<const int> order) {
  const std::size_t n = order.size();
  RankOutcome outcome;
  outcome.scores.assign(n, 0.0);
  outcome.ranks.assign(n, 0.0);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const auto candidate = static_cast<std::size_t>(order[pos]);
    outcome.ranks[candidate] = static_cast<double>(pos + 1);
    outcome.scores[candidate] = static_cast<double>(n - pos);
  }
  return outcome;
}

inline std::vector<int> win_ratio_order(
    std::span<const ComparisonRecord> records, int n) {
  const RankOutcome start = win_ratio(records, n);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return start.scores[static_cast<std::size_t>(a)] >
           start.scores[static_cast<std::size_t>(b)];
  });
  return order;
}

}  // namespace detail

/// Approximate maximum-likelihood ranking: hill-climbing over adjacent
/// transpositions, initialized from the win-ratio order. Each step applies
/// the best strictly-improving swap, so the likelihood trace is monotone
/// and the search terminates. `likelihood_trace`, when given, receives the
/// log-likelihood after the initial order and after every accepted swap.
inline RankOutcome ml_rank_greedy(std::span<const ComparisonRecord> records,
                                  int n, const LikelihoodParams& params,
                                  std::vector<double>* likelihood_trace =
                                      nullptr) {
  params.validate();
  std::vector<int> order = detail::win_ratio_order(records, n);

  // Records touching an unordered pair, for O(pair) swap deltas.
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_pair;
  const auto pair_key = [n](int a, int b) {
    const int lo = std::min(a, b);
    const int hi = std::max(a, b);
    return static_cast<std::uint64_t>(lo) * static_cast<std::uint64_t>(n) +
           static_cast<std::uint64_t>(hi);
  };
  for (std::size_t r = 0; r < records.size(); ++r) {
    by_pair[pair_key(records[r].first_index, records[r].second_index)]
        .push_back(r);
  }

  const auto record_term = [&](const ComparisonRecord& record, bool z) {
    if (params.mode == LikelihoodMode::kApproximate) {
      const bool agrees = (record.decision == 1) == z;
      return std::log(agrees ? params.conditional_accuracy
                             : 1.0 - params.conditional_accuracy);
    }
    if (!record.probability) {
      throw ValidationError(
          "soft likelihood requires probabilities on every record");
    }
    const double p = z ? *record.probability : 1.0 - *record.probability;
    return std::log(std::max(p, params.floor));
  };

  // Gain from swapping the candidates at positions pos and pos+1. Only the
  // records between that pair change their z.
  const auto swap_delta = [&](std::size_t pos) {
    const int upper = order[pos];      // currently ranked better
    const int lower = order[pos + 1];
    double delta = 0.0;
    const auto it = by_pair.find(pair_key(upper, lower));
    if (it == by_pair.end()) return 0.0;
    for (const std::size_t r : it->second) {
      const ComparisonRecord& record = records[r];
      const bool z_now = record.first_index == upper;
      delta += record_term(record, !z_now) - record_term(record, z_now);
    }
    return delta;
  };

  double current = log_likelihood(detail::outcome_from_order(order).ranks,
                                  records, params);
  if (likelihood_trace) likelihood_trace->push_back(current);
  for (;;) {
    double best_delta = 0.0;
    std::size_t best_pos = order.size();
    for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
      const double delta = swap_delta(pos);
      if (delta > best_delta) {
        best_delta = delta;
        best_pos = pos;
      }
    }
    if (best_pos == order.size()) break;
    std::swap(order[best_pos], order[best_pos + 1]);
    current += best_delta;
    if (likelihood_trace) likelihood_trace->push_back(current);
  }
  return detail::outcome_from_order(order);
}

/// Estimates the approximate-likelihood accuracy cell P(decision=1 | first
/// truly better) as the judge's self-agreement rate across reversed pairs:
/// the fraction of matched (i,j)/(j,i) record pairs whose decisions name
/// the same winner. Needs a plan with reversed pairs (e.g. symmetric or
/// full). The estimate is clamped into (0.5, 1) so it stays usable as a
/// LikelihoodParams::conditional_accuracy.
inline double estimate_conditional_accuracy(
    std::span<const std::span<const ComparisonRecord>> groups) {
  std::size_t matched = 0;
  std::size_t agreed = 0;
  for (const auto& group : groups) {
    std::map<std::pair<int, int>, std::vector<int>> decisions;
    for (const auto& record : group) {
      decisions[{record.first_index, record.second_index}].push_back(
          record.decision);
    }
    for (const auto& [pair, forward] : decisions) {
      if (pair.first > pair.second) continue;
      const auto it = decisions.find({pair.second, pair.first});
      if (it == decisions.end()) continue;
      const std::size_t pairs = std::min(forward.size(), it->second.size());
      for (std::size_t k = 0; k < pairs; ++k) {
        ++matched;
        // Agreement means the reversed decision flips: y_ij == 1 - y_ji.
        if (forward[k] + it->second[k] == 1) ++agreed;
      }
    }
  }
  if (matched == 0) {
    throw NoDataError(
        "no reversed pairs: self-agreement needs a symmetric or full plan");
  }
  const double rate =
      static_cast<double>(agreed) / static_cast<double>(matched);
  return std::clamp(rate, 0.5 + kProbabilityFloor, 1.0 - kProbabilityFloor);
}

inline double estimate_conditional_accuracy(
    std::span<const ComparisonRecord> records) {
  const std::span<const ComparisonRecord> group = records;
  return estimate_conditional_accuracy(
      std::span<const std::span<const ComparisonRecord>>(&group, 1));
}

/// Exhaustive maximum-likelihood ranking over all N! orders. Guarded to
/// N <= 8; likelihood ties break toward the lexicographically smallest
/// order. Intended as the oracle the greedy search is checked against.
inline RankOutcome ml_rank_brute(std::span<const ComparisonRecord> records,
                                 int n, const LikelihoodParams& params) {
  if (n > 8) {
    throw OracleSizeError("exhaustive rank search is limited to N <= 8, got " +
                          std::to_string(n));
  }
  if (records.empty()) {
    throw NoDataError("cannot rank candidates without comparison records");
  }
  params.validate();
  detail::check_records(records, n);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> best_order;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> ranks(static_cast<std::size_t>(n));
  do {
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      ranks[static_cast<std::size_t>(order[pos])] =
          static_cast<double>(pos + 1);
    }
    const double value = log_likelihood(ranks, records, params);
    if (value > best) {
      best = value;
      best_order = order;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  return detail::outcome_from_order(best_order);
}

}  // namespace pairrank
