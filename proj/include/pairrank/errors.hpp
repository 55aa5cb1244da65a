#pragma once

#include <stdexcept>

namespace pairrank {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed domain input: bad indices, fewer than two candidates,
/// probabilities outside [0, 1], mismatched gold-score lengths.
struct ValidationError : Error {
  using Error::Error;
};

/// Gold scores were required but the instance does not carry any.
struct GoldUnavailableError : Error {
  using Error::Error;
};

/// Decision threshold outside (0, 1) or reweighting alpha <= 0.
struct InvalidCalibrationError : Error {
  using Error::Error;
};

/// Requested comparison budget is infeasible for the strategy.
struct BudgetError : Error {
  using Error::Error;
};

/// An aggregate was requested over an empty record list.
struct NoDataError : Error {
  using Error::Error;
};

/// Prompt template is malformed (unknown placeholder, missing or
/// repeated candidate slots, labels that do not diverge).
struct TemplateError : Error {
  using Error::Error;
};

/// Remote judge transport failed after exhausting retries.
struct JudgeUnavailableError : Error {
  using Error::Error;
};

/// Remote judge answered but the payload is not usable (missing
/// log-probability fields, absent label tokens, non-retryable status).
struct ProtocolError : Error {
  using Error::Error;
};

/// Every generated sample was unparseable; no comparison decision exists.
struct NoDecisionError : Error {
  using Error::Error;
};

/// Generated text contained no parseable numeric score.
struct ScoreParseError : Error {
  using Error::Error;
};

/// Calibration needs soft probabilities but records only carry hard
/// decisions.
struct CalibrationImpossibleError : Error {
  using Error::Error;
};

/// Exhaustive rank search refused to run (factorial blow-up guard).
struct OracleSizeError : Error {
  using Error::Error;
};

/// Mismatched vector/matrix shapes in a metric computation.
struct ShapeError : Error {
  using Error::Error;
};

/// No eligible data points remain, so the metric is undefined.
struct NoMetricError : Error {
  using Error::Error;
};

/// A dataset or cache line could not be parsed; message carries the
/// line number.
struct ParseError : Error {
  using Error::Error;
};

/// Filesystem failure while reading or writing artifacts.
struct IoError : Error {
  using Error::Error;
};

}  // namespace pairrank
