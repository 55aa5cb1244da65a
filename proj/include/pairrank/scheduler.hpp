#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pairrank/common.hpp"
#include "pairrank/core.hpp"
#include "pairrank/errors.hpp"

namespace pairrank {

/// Every ordered pair in both permutations: N*(N-1) comparisons.
inline ComparisonPlan full_plan(int n) {
  if (n < 2) {
    throw ValidationError("a comparison plan needs at least 2 candidates, got " +
                          std::to_string(n));
  }
  ComparisonPlan plan;
  plan.strategy = Strategy::kFull;
  plan.pairs.reserve(static_cast<std::size_t>(n) * (n - 1));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) plan.pairs.emplace_back(i, j);
    }
  }
  plan.budget = static_cast<int>(plan.pairs.size());
  return plan;
}

namespace detail {

inline std::vector<std::pair<int, int>> ordered_pair_universe(int n) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

inline std::vector<std::pair<int, int>> unordered_pair_universe(int n) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

}  // namespace detail

/// Samples a budgeted plan, uniformly over the strategy's admissible sets
/// and deterministically for a given seed.
///
/// random     draws R ordered pairs without replacement.
/// no_repeat  draws R unordered pairs without replacement, each judged in a
///            random orientation.
/// symmetric  draws R/2 unordered pairs, each emitted in both orientations,
///            so R must be even.
inline ComparisonPlan select_plan(Strategy strategy, int n, int budget,
                                  std::uint64_t seed) {
  if (n < 2) {
    throw ValidationError("a comparison plan needs at least 2 candidates, got " +
                          std::to_string(n));
  }
  const int ordered_max = n * (n - 1);
  const int unordered_max = ordered_max / 2;
  std::mt19937_64 rng(seed);

  ComparisonPlan plan;
  plan.strategy = strategy;
  plan.budget = budget;
  plan.seed = seed;

  switch (strategy) {
    case Strategy::kFull:
      throw ValidationError("the full strategy has no budget; use full_plan()");
    case Strategy::kRandom: {
      if (budget < 1 || budget > ordered_max) {
        throw BudgetError("random budget must lie in [1, " +
                          std::to_string(ordered_max) + "], got " +
                          std::to_string(budget));
      }
      auto universe = detail::ordered_pair_universe(n);
      partial_shuffle(universe, static_cast<std::size_t>(budget), rng);
      universe.resize(static_cast<std::size_t>(budget));
      plan.pairs = std::move(universe);
      break;
    }
    case Strategy::kNoRepeat: {
      if (budget < 1 || budget > unordered_max) {
        throw BudgetError("no_repeat budget must lie in [1, " +
                          std::to_string(unordered_max) + "], got " +
                          std::to_string(budget));
      }
      auto universe = detail::unordered_pair_universe(n);
      partial_shuffle(universe, static_cast<std::size_t>(budget), rng);
      universe.resize(static_cast<std::size_t>(budget));
      plan.pairs.reserve(universe.size());
      for (const auto& [i, j] : universe) {
        if (draw_below(rng, 2) == 0) {
          plan.pairs.emplace_back(i, j);
        } else {
          plan.pairs.emplace_back(j, i);
        }
      }
      break;
    }
    case Strategy::kSymmetric: {
      if (budget % 2 != 0) {
        throw BudgetError("symmetric budget must be even, got " +
                          std::to_string(budget));
      }
      if (budget < 2 || budget > ordered_max) {
        throw BudgetError("symmetric budget must lie in [2, " +
                          std::to_string(ordered_max) + "], got " +
                          std::to_string(budget));
      }
      auto universe = detail::unordered_pair_universe(n);
      const std::size_t half = static_cast<std::size_t>(budget) / 2;
      partial_shuffle(universe, half, rng);
      plan.pairs.reserve(static_cast<std::size_t>(budget));
      for (std::size_t k = 0; k < half; ++k) {
        plan.pairs.emplace_back(universe[k]);
        plan.pairs.emplace_back(universe[k].second, universe[k].first);
      }
      break;
    }
  }
  return plan;
}

}  // namespace pairrank
