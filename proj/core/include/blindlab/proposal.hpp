#pragma once

// Weight-proposal distributions for Blind Descent and the log-uniform
// learning-rate sampler used by Gradient Check.

#include <span>
#include <string_view>
#include <vector>

#include "blindlab/rng.hpp"

namespace blindlab {

enum class ProposalKind {
  // w' ~ Normal(mean = w, std = eta)
  NormalCentered,
  // w' = w + Uniform(-eta, eta)
  UniformAdditive,
  // w' ~ Uniform(-1, 1), independent of w
  ZeroMeanUnitUniform,
};

std::string_view to_string(ProposalKind kind);
// Accepts "normal", "uniform" and "unit-uniform".
ProposalKind parse_proposal_kind(std::string_view text);

struct ProposalSpec {
  ProposalKind kind = ProposalKind::NormalCentered;
  double eta = 0.001;

  // Throws ConfigError unless eta > 0 (and finite) for the centered kinds.
  void validate() const;

  friend bool operator==(const ProposalSpec&, const ProposalSpec&) = default;
};

// Writes one proposal per input weight into `out` (same length as
// `current`). Draws exactly one variate per weight, in order.
void propose_into(std::span<const double> current, std::span<double> out,
                  const ProposalSpec& spec, RngStream& rng);

std::vector<double> propose(std::span<const double> current,
                            const ProposalSpec& spec, RngStream& rng);

// 10^exponent.
double learning_rate_from_exponent(double exponent);

inline constexpr double kMinLearningRateExponent = -6.0;
inline constexpr double kMaxLearningRateExponent = 1.0;

// 10^u with u ~ Uniform(-6, 1).
double sample_learning_rate(RngStream& rng);

}  // namespace blindlab
