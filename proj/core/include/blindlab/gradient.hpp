#pragma once

// Reverse-mode gradients of the batch loss with respect to every kernel
// weight, and a central-difference oracle.
//
// The per-sample softmax_preprocess divisor is held constant during
// differentiation: backward() treats it as a fixed scale, and
// finite_difference_gradient() reuses the divisors of the unperturbed
// forward pass. The subtract-max shift has no effect on softmax and
// contributes nothing.

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "blindlab/network.hpp"
#include "blindlab/ops.hpp"
#include "blindlab/tensor.hpp"

namespace blindlab {

struct ConvRecord {
  std::size_t bank = 0;
  Tensor4 input;
  // Channel-summed input for ChannelSum banks; empty for Standard banks.
  Tensor4 summed;
  Tensor4 pre_activation;
  bool activation = false;
};

struct PoolRecord {
  Shape input_shape;
  std::vector<std::size_t> argmax;
};

using LayerRecord = std::variant<ConvRecord, PoolRecord>;

struct ForwardCache {
  std::vector<LayerRecord> layers;
  Logits raw;
  std::vector<double> divisors;
  Logits scaled;
  Logits probabilities;
};

struct ForwardPass {
  double loss = 0.0;
  ForwardCache cache;
};

// Same arithmetic as loss(), so the returned loss is bitwise equal to it.
ForwardPass forward_with_cache(const NetworkModel& model, const Tensor4& batch,
                               std::span<const int> labels);

// One array per kernel bank, congruent with the bank's weights.
struct GradientSet {
  std::vector<std::vector<double>> banks;

  bool all_finite() const;
  std::size_t size() const;
  friend bool operator==(const GradientSet&, const GradientSet&) = default;
};

GradientSet zero_gradients(const NetworkModel& model);

// Gradient of the cached loss. `upstream` scales dL (1 for the plain loss).
// The cache must come from forward_with_cache() on the same, unmodified
// model and batch; a stale cache is not detected.
GradientSet backward(const NetworkModel& model, const ForwardCache& cache,
                     std::span<const int> labels, double upstream = 1.0);

// Batch loss with the preprocessing divisors fixed to `divisors`.
double loss_with_divisors(const NetworkModel& model, const Tensor4& batch,
                          std::span<const int> labels,
                          std::span<const double> divisors);

// (L(w + eps) - L(w - eps)) / (2 eps), one weight at a time, with the
// preprocessing divisors frozen at their unperturbed values.
GradientSet finite_difference_gradient(const NetworkModel& model,
                                       const Tensor4& batch,
                                       std::span<const int> labels,
                                       double epsilon);

}  // namespace blindlab
