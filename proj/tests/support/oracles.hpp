#pragma once

// Reference implementations used only by tests. They are written
// independently of the library kernels (different loop order, long double
// accumulation) so agreement is evidence rather than tautology.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "blindlab/ops.hpp"
#include "blindlab/tensor.hpp"

namespace oracle {

// Direct summation of the convolution definition, output-element first.
inline blindlab::Tensor4 brute_conv(const blindlab::Tensor4& in,
                                    const blindlab::KernelBank& bank) {
  using blindlab::Shape;
  const Shape& s = in.shape();
  const std::size_t oh = s.h - bank.kh() + 1;
  const std::size_t ow = s.w - bank.kw() + 1;
  blindlab::Tensor4 out(Shape{s.n, bank.filters(), oh, ow});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t f = 0; f < bank.filters(); ++f)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          long double acc = 0;
          for (std::size_t ky = 0; ky < bank.kh(); ++ky)
            for (std::size_t kx = 0; kx < bank.kw(); ++kx)
              for (std::size_t c = 0; c < s.c; ++c) {
                const std::size_t depth =
                    bank.mode() == blindlab::ConvMode::ChannelSum ? 0 : c;
                const double k =
                    bank.filter(f)[(depth * bank.kh() + ky) * bank.kw() + kx];
                acc += static_cast<long double>(k) * in.at(n, c, y + ky, x + kx);
              }
          out.at(n, f, y, x) = static_cast<double>(acc);
        }
  return out;
}

// Population standard deviation, long double two-pass.
inline double population_std(std::span<const double> v) {
  long double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  long double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return static_cast<double>(std::sqrt(ss / v.size()));
}

// -log softmax(z)[label] via log-sum-exp in long double.
inline double cross_entropy(std::span<const double> z, int label) {
  long double top = z[0];
  for (double v : z) top = v > top ? v : top;
  long double sum = 0;
  for (double v : z) sum += std::exp(static_cast<long double>(v) - top);
  return static_cast<double>(std::log(sum) + top - z[label]);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::fmax(worst, std::fabs(a[i] - b[i]));
  return worst;
}

}  // namespace oracle
