#include "blindlab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "blindlab/errors.hpp"
#include "blindlab/rng.hpp"

namespace blindlab {

double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

double max_relative_error(const GradientSet& a, const GradientSet& b) {
  if (a.banks.size() != b.banks.size()) {
    throw DimensionError("gradient sets have different bank counts");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.banks.size(); ++i) {
    if (a.banks[i].size() != b.banks[i].size()) {
      throw DimensionError(fmt::format("gradient bank {} sizes differ", i));
    }
    for (std::size_t j = 0; j < a.banks[i].size(); ++j) {
      const double e = relative_error(a.banks[i][j], b.banks[i][j]);
      // NaN compares false; surface it as an infinite error.
      worst = std::isnan(e) ? INFINITY : std::max(worst, e);
    }
  }
  return worst;
}

GradientCheckReport run_gradient_check(const GradientCheckOptions& options) {
  GradientCheckReport report;
  for (std::size_t m = 0; m < options.modes.size(); ++m) {
    const ConvMode mode = options.modes[m];
    ModeReport mode_report{mode, 0.0, 0};
    for (std::size_t s = 0; s < options.seeds; ++s) {
      const std::uint64_t seed = derive_seed(options.base_seed, m, s);
      NetworkModel model = init_weights(
          build_cnn(options.geometry, options.classes, mode,
                    CnnOptions{{options.hidden_filters, options.hidden_filters}}),
          derive_seed(seed, 0, 0));
      RngStream rng(derive_seed(seed, 1, 0));
      Tensor4 batch(Shape{options.batch, options.geometry.channels, options.geometry.height,
                          options.geometry.width});
      for (double& v : batch.data()) v = rng.uniform01();
      std::vector<int> labels(options.batch);
      for (int& label : labels) label = static_cast<int>(rng.below(options.classes));

      const ForwardPass pass = forward_with_cache(model, batch, labels);
      GradientSet analytic = backward(model, pass.cache, labels);
      if (options.corrupt) options.corrupt(analytic);
      const GradientSet numeric =
          finite_difference_gradient(model, batch, labels, options.epsilon);
      mode_report.max_relative_error =
          std::max(mode_report.max_relative_error, max_relative_error(analytic, numeric));
      mode_report.weights_checked += numeric.size();
    }
    report.max_relative_error = std::max(report.max_relative_error, mode_report.max_relative_error);
    report.modes.push_back(mode_report);
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace blindlab
