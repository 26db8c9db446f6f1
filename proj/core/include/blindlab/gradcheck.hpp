#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "blindlab/gradient.hpp"
#include "blindlab/network.hpp"

namespace blindlab {

// |a - b| / max(|a|, |b|, 1e-8). The floor keeps entries that are zero on
// both sides (dead units) from dividing by zero.
double relative_error(double a, double b);

// Largest relative_error() over all entries. Throws DimensionError when the
// sets are not congruent.
double max_relative_error(const GradientSet& a, const GradientSet& b);

struct GradientCheckOptions {
  Geometry geometry{1, 10, 10};
  std::size_t classes = 10;
  std::size_t hidden_filters = 2;
  std::size_t batch = 2;
  std::size_t seeds = 20;
  std::uint64_t base_seed = 2020;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  std::vector<ConvMode> modes{ConvMode::ChannelSum, ConvMode::Standard};
  // Applied to every analytic gradient before comparison; used for
  // negative controls.
  std::function<void(GradientSet&)> corrupt;
};

struct ModeReport {
  ConvMode mode = ConvMode::Standard;
  double max_relative_error = 0.0;
  std::size_t weights_checked = 0;
};

struct GradientCheckReport {
  std::vector<ModeReport> modes;
  double max_relative_error = 0.0;
  bool passed = false;
};

// Compares backward() with central differences on a small random model
// (random inputs in [0, 1), random labels) for every seed and mode.
GradientCheckReport run_gradient_check(const GradientCheckOptions& options);

}  // namespace blindlab
