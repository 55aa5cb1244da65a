#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <sstream>
#include <string>

#include "pairrank/common.hpp"
#include "pairrank/core.hpp"
#include "pairrank/errors.hpp"

namespace pairrank {

/// One judged comparison: the soft probability that the first candidate is
/// better, the hard decision, and a provenance tag describing how the
/// numbers were obtained.
struct Comparison {
  std::optional<double> probability;
  int decision = 0;
  std::string tag;
};

/// A pairwise judge. Implementations must be safe to call concurrently and
/// must return the same result for the same (set, i, j) regardless of call
/// order, so runs stay deterministic under parallel execution.
class ComparativeJudge {
 public:
  virtual ~ComparativeJudge() = default;
  virtual Comparison compare(const CandidateSet& set, int i, int j) = 0;
  /// Stable identity entering cache keys; changing anything that affects
  /// outputs must change the fingerprint.
  virtual std::string fingerprint() const = 0;
};

/// One absolute judgment: the numeric score and the raw text it was parsed
/// from.
struct ScoredCandidate {
  double score = 0.0;
  std::string text;
};

/// An absolute judge assigning each candidate a standalone quality score.
class AbsoluteJudge {
 public:
  virtual ~AbsoluteJudge() = default;
  virtual ScoredCandidate score(const CandidateSet& set, int i) = 0;
  virtual std::string fingerprint() const = 0;
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

enum class SyntheticNoise {
  kNone,       // probability and decision follow the model exactly
  kBernoulli,  // decision drawn ~ Bernoulli(p); probability stays the model p
  kSampled,    // probability estimated from `sample_count` Bernoulli draws
};

/// Test oracle: compares candidates through their gold scores with a
/// logistic link, an optional logit bias favoring the first position, and
/// optional seeded noise.
struct SyntheticJudgeSpec {
  double sharpness = 1.0;              // beta, scales score differences
  double positional_logit_bias = 0.0;  // b, added in favor of position one
  std::uint64_t noise_seed = 0;
  SyntheticNoise noise = SyntheticNoise::kNone;
  int sample_count = 8;  // kSampled only

  void validate() const {
    if (!(sharpness > 0.0)) {
      throw ValidationError("synthetic sharpness must be positive");
    }
    if (noise == SyntheticNoise::kSampled && sample_count < 1) {
      throw ValidationError("synthetic sample count must be >= 1");
    }
  }
};

/// The synthetic model probability logistic(beta * (s_i - s_j) + b).
/// With b = 0 the probabilities of a pair and its reverse sum to one.
inline double synthetic_compare(const SyntheticJudgeSpec& spec,
                                std::span<const double> gold_scores, int i,
                                int j) {
  spec.validate();
  detail::check_pair_indices(static_cast<int>(gold_scores.size()), i, j);
  const double gap = gold_scores[static_cast<std::size_t>(i)] -
                     gold_scores[static_cast<std::size_t>(j)];
  return logistic(spec.sharpness * gap + spec.positional_logit_bias);
}

class SyntheticJudge final : public ComparativeJudge {
 public:
  explicit SyntheticJudge(SyntheticJudgeSpec spec) : spec_(spec) {
    spec_.validate();
  }

  Comparison compare(const CandidateSet& set, int i, int j) override {
    const double p = synthetic_compare(spec_, set.gold(), i, j);
    Comparison result;
    switch (spec_.noise) {
      case SyntheticNoise::kNone:
        result.probability = p;
        result.decision = decide(p);
        result.tag = "synthetic";
        break;
      case SyntheticNoise::kBernoulli: {
        // The draw is the decision rule here; the recorded probability is
        // still the model p, so priors estimated from these decisions
        // recover it.
        std::mt19937_64 rng(pair_seed(set.instance_id, i, j));
        result.probability = p;
        result.decision = draw_unit(rng) < p ? 1 : 0;
        result.tag = "synthetic:bernoulli";
        break;
      }
      case SyntheticNoise::kSampled: {
        std::mt19937_64 rng(pair_seed(set.instance_id, i, j));
        int wins = 0;
        for (int k = 0; k < spec_.sample_count; ++k) {
          if (draw_unit(rng) < p) ++wins;
        }
        const double estimate =
            static_cast<double>(wins) / static_cast<double>(spec_.sample_count);
        result.probability = estimate;
        result.decision = decide(estimate);
        result.tag = "synthetic:sampled/" + std::to_string(spec_.sample_count);
        break;
      }
    }
    return result;
  }

  std::string fingerprint() const override {
    std::ostringstream spec;
    spec << "synthetic|beta=" << spec_.sharpness
         << "|bias=" << spec_.positional_logit_bias
         << "|seed=" << spec_.noise_seed << "|noise="
         << static_cast<int>(spec_.noise) << "|k=" << spec_.sample_count;
    return hex64(fnv1a64(spec.str()));
  }

  const SyntheticJudgeSpec& spec() const { return spec_; }

 private:
  // Noise depends only on (seed, instance, i, j), never on call order.
  std::uint64_t pair_seed(const std::string& instance_id, int i, int j) const {
    return mix_seed(mix_seed(spec_.noise_seed, fnv1a64(instance_id)),
                    (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i))
                     << 32) |
                        static_cast<std::uint32_t>(j));
  }

  SyntheticJudgeSpec spec_;
};

/// Absolute-scoring counterpart of the synthetic judge: the gold score plus
/// optional seeded Gaussian noise.
class SyntheticScorer final : public AbsoluteJudge {
 public:
  SyntheticScorer(double noise_sigma, std::uint64_t noise_seed)
      : sigma_(noise_sigma), seed_(noise_seed) {
    if (sigma_ < 0.0) throw ValidationError("noise sigma must be >= 0");
  }

  ScoredCandidate score(const CandidateSet& set, int i) override {
    const double truth = set.gold()[static_cast<std::size_t>(i)];
    if (sigma_ == 0.0) return {truth, "synthetic"};
    std::mt19937_64 rng(mix_seed(mix_seed(seed_, fnv1a64(set.instance_id)),
                                 static_cast<std::uint64_t>(i)));
    // Box-Muller from two deterministic uniform draws.
    const double u1 = std::max(draw_unit(rng), 1e-300);
    const double u2 = draw_unit(rng);
    const double gauss =
        std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    return {truth + sigma_ * gauss, "synthetic"};
  }

  std::string fingerprint() const override {
    std::ostringstream spec;
    spec << "synthetic-scorer|sigma=" << sigma_ << "|seed=" << seed_;
    return hex64(fnv1a64(spec.str()));
  }

 private:
  double sigma_;
  std::uint64_t seed_;
};

}  // namespace pairrank
