#include "blindlab/proposal.hpp"

#include <cmath>

#include <fmt/format.h>

#include "blindlab/errors.hpp"

namespace blindlab {

std::string_view to_string(ProposalKind kind) {
  switch (kind) {
    case ProposalKind::NormalCentered:
      return "normal";
    case ProposalKind::UniformAdditive:
      return "uniform";
    case ProposalKind::ZeroMeanUnitUniform:
      return "unit-uniform";
  }
  return "?";
}

ProposalKind parse_proposal_kind(std::string_view text) {
  if (text == "normal") return ProposalKind::NormalCentered;
  if (text == "uniform") return ProposalKind::UniformAdditive;
  if (text == "unit-uniform") return ProposalKind::ZeroMeanUnitUniform;
  throw ConfigError(fmt::format(
      "unknown proposal '{}' (expected normal, uniform or unit-uniform)", text));
}

void ProposalSpec::validate() const {
  if (kind == ProposalKind::ZeroMeanUnitUniform) return;
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw ConfigError(fmt::format("eta must be positive and finite, got {}", eta));
  }
}

void propose_into(std::span<const double> current, std::span<double> out,
                  const ProposalSpec& spec, RngStream& rng) {
  if (out.size() != current.size()) {
    throw DimensionError(fmt::format("proposal output has {} slots for {} weights",
                                     out.size(), current.size()));
  }
  switch (spec.kind) {
    case ProposalKind::NormalCentered:
      for (std::size_t i = 0; i < current.size(); ++i) {
        out[i] = current[i] + spec.eta * rng.normal();
      }
      break;
    case ProposalKind::UniformAdditive:
      for (std::size_t i = 0; i < current.size(); ++i) {
        out[i] = current[i] + rng.uniform(-spec.eta, spec.eta);
      }
      break;
    case ProposalKind::ZeroMeanUnitUniform:
      for (std::size_t i = 0; i < current.size(); ++i) {
        out[i] = rng.uniform(-1.0, 1.0);
      }
      break;
  }
}

std::vector<double> propose(std::span<const double> current,
                            const ProposalSpec& spec, RngStream& rng) {
  std::vector<double> out(current.size());
  propose_into(current, out, spec, rng);
  return out;
}

double learning_rate_from_exponent(double exponent) { return std::pow(10.0, exponent); }

double sample_learning_rate(RngStream& rng) {
  return learning_rate_from_exponent(
      rng.uniform(kMinLearningRateExponent, kMaxLearningRateExponent));
}

}  // namespace blindlab
