#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pairrank/core.hpp"
#include "pairrank/errors.hpp"

namespace pairrank {

/// Floor used when clamping probabilities and thresholds away from {0, 1}.
inline constexpr double kProbabilityFloor = 1e-9;

/// Positional priors P(A) and P(B) measured from comparison decisions.
/// On a symmetric plan the reversed-pair statistic makes the two priors sum
/// to one exactly; on other plans P(B) is reported as 1 - P(A) and
/// `from_symmetric_plan` is false to mark the reduced validity.
struct PositionPriors {
  double first = 0.5;
  double second = 0.5;
  std::size_t count = 0;
  bool from_symmetric_plan = false;
};

/// Positional reweighting parameters. threshold = 1 / (1 + alpha), so
/// thresholding raw probabilities at `threshold` and thresholding
/// reweighted probabilities at 0.5 select identical decisions.
struct BiasCalibration {
  double prior_first = 0.5;
  double prior_second = 0.5;
  double alpha = 1.0;
  double threshold = 0.5;
  std::size_t record_count = 0;
  bool from_symmetric_plan = false;
};

namespace detail {

inline bool is_symmetric_multiset(std::span<const ComparisonRecord> records) {
  std::map<std::pair<int, int>, int> balance;
  for (const auto& record : records) {
    ++balance[{record.first_index, record.second_index}];
    --balance[{record.second_index, record.first_index}];
  }
  for (const auto& [pair, surplus] : balance) {
    if (surplus != 0) return false;
  }
  return true;
}

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

}  // namespace detail

/// Fraction of decisions selecting each position. Groups are per-instance
/// record lists; symmetry is judged within each group, since a pair index
/// only identifies a candidate inside its own instance.
inline PositionPriors estimate_priors(
    std::span<const std::span<const ComparisonRecord>> groups) {
  PositionPriors priors;
  std::size_t picked_first = 0;
  bool symmetric = true;
  for (const auto& group : groups) {
    if (group.empty()) continue;
    priors.count += group.size();
    for (const auto& record : group) picked_first += record.decision;
    if (!detail::is_symmetric_multiset(group)) symmetric = false;
  }
  if (priors.count == 0) {
    throw NoDataError("cannot estimate positional priors without records");
  }
  priors.first =
      static_cast<double>(picked_first) / static_cast<double>(priors.count);
  // On a symmetric plan the reversed-outcome mean over the same record set
  // reduces to 1 - P(A); on any other plan the same number is reported but
  // flagged, since the reversed pairs were never judged.
  priors.second = 1.0 - priors.first;
  priors.from_symmetric_plan = symmetric;
  return priors;
}

inline PositionPriors estimate_priors(
    std::span<const ComparisonRecord> records) {
  const std::span<const ComparisonRecord> group = records;
  return estimate_priors(std::span<const std::span<const ComparisonRecord>>(
      &group, 1));
}

/// Positional reweighting of a comparison probability: alpha scales the
/// odds of the first position. Identity at alpha = 1, bijective on [0, 1]
/// with inverse reweight(., 1/alpha).
inline double reweight(double probability, double alpha) {
  if (!(alpha > 0.0)) {
    throw InvalidCalibrationError("reweighting alpha must be positive, got " +
                                  std::to_string(alpha));
  }
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ValidationError("comparison probability must lie in [0, 1], got " +
                          std::to_string(probability));
  }
  const double weighted = alpha * probability;
  return weighted / (weighted + (1.0 - probability));
}

/// Calibrates the decision threshold so selections balance across
/// positions: tau is the median observed probability (half of the
/// decisions then pick the first position, up to integer rounding) and
/// alpha = (1 - tau) / tau is the equivalent reweighting.
inline BiasCalibration calibrate_threshold(
    std::span<const std::span<const ComparisonRecord>> groups) {
  std::vector<double> probabilities;
  for (const auto& group : groups) {
    for (const auto& record : group) {
      if (!record.probability) {
        throw CalibrationImpossibleError(
            "records carry hard decisions only; a decision-level judge "
            "cannot be recalibrated");
      }
      probabilities.push_back(*record.probability);
    }
  }
  if (probabilities.empty()) {
    throw NoDataError("cannot calibrate a threshold without records");
  }
  const PositionPriors priors = estimate_priors(groups);
  BiasCalibration calibration;
  calibration.prior_first = priors.first;
  calibration.prior_second = priors.second;
  calibration.from_symmetric_plan = priors.from_symmetric_plan;
  calibration.record_count = probabilities.size();
  const double tau =
      std::clamp(detail::median(std::move(probabilities)), kProbabilityFloor,
                 1.0 - kProbabilityFloor);
  calibration.threshold = tau;
  calibration.alpha = (1.0 - tau) / tau;
  return calibration;
}

inline BiasCalibration calibrate_threshold(
    std::span<const ComparisonRecord> records) {
  const std::span<const ComparisonRecord> group = records;
  return calibrate_threshold(std::span<const std::span<const ComparisonRecord>>(
      &group, 1));
}

/// Applies a calibration to one record: the probability is reweighted by
/// alpha and the decision is re-thresholded at tau. Requires a soft
/// probability.
inline ComparisonRecord apply_calibration(const ComparisonRecord& record,
                                          const BiasCalibration& calibration) {
  if (!record.probability) {
    throw CalibrationImpossibleError(
        "record (" + std::to_string(record.first_index) + ", " +
        std::to_string(record.second_index) + ") has no probability");
  }
  ComparisonRecord out = record;
  out.probability = reweight(*record.probability, calibration.alpha);
  out.decision = decide(*record.probability, calibration.threshold);
  return out;
}

inline std::vector<ComparisonRecord> apply_calibration(
    std::span<const ComparisonRecord> records,
    const BiasCalibration& calibration) {
  std::vector<ComparisonRecord> out;
  out.reserve(records.size());
  for (const auto& record : records) {
    out.push_back(apply_calibration(record, calibration));
  }
  return out;
}

}  // namespace pairrank
