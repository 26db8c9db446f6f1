#include "blindlab/ops.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "blindlab/errors.hpp"

namespace blindlab {

std::string_view to_string(ConvMode mode) {
  return mode == ConvMode::ChannelSum ? "channel-sum" : "standard";
}

ConvMode parse_conv_mode(std::string_view text) {
  if (text == "channel-sum") return ConvMode::ChannelSum;
  if (text == "standard") return ConvMode::Standard;
  throw ConfigError(fmt::format("unknown conv mode '{}' (expected channel-sum or standard)",
                                text));
}

KernelBank::KernelBank(ConvMode mode, std::size_t filters, std::size_t depth,
                       std::size_t kh, std::size_t kw)
    : mode_(mode), filters_(filters), depth_(depth), kh_(kh), kw_(kw) {
  if (filters == 0) throw DimensionError("kernel bank needs at least one filter");
  if (depth == 0) throw DimensionError("kernel bank needs at least one input channel");
  if (kh == 0) throw DimensionError("kernel height must be at least 1");
  if (kw == 0) throw DimensionError("kernel width must be at least 1");
  weights_.assign(filters * depth * kh * kw, 0.0);
}

KernelBank KernelBank::channel_sum(std::size_t filters, std::size_t kh,
                                   std::size_t kw) {
  return KernelBank(ConvMode::ChannelSum, filters, 1, kh, kw);
}

KernelBank KernelBank::standard(std::size_t filters, std::size_t in_channels,
                                std::size_t kh, std::size_t kw) {
  return KernelBank(ConvMode::Standard, filters, in_channels, kh, kw);
}

namespace {

// out += correlate(in, kernel) for one (h, w) input plane.
void correlate_accumulate(std::span<const double> in, std::size_t in_w,
                          std::span<const double> kernel, std::size_t kh,
                          std::size_t kw, std::span<double> out,
                          std::size_t out_h, std::size_t out_w) {
  for (std::size_t ky = 0; ky < kh; ++ky) {
    for (std::size_t kx = 0; kx < kw; ++kx) {
      const double k = kernel[ky * kw + kx];
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const double* src = in.data() + (oy + ky) * in_w + kx;
        double* dst = out.data() + oy * out_w;
        for (std::size_t ox = 0; ox < out_w; ++ox) dst[ox] += k * src[ox];
      }
    }
  }
}

}  // namespace

Tensor4 sum_channels(const Tensor4& input) {
  const Shape& s = input.shape();
  Tensor4 out(Shape{s.n, 1, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    std::span<double> dst = out.plane(n, 0);
    for (std::size_t c = 0; c < s.c; ++c) {
      std::span<const double> src = input.plane(n, c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  return out;
}

Tensor4 conv2d(const Tensor4& input, const KernelBank& bank) {
  const Shape& s = input.shape();
  if (s.h < bank.kh()) {
    throw DimensionError(fmt::format("conv2d: input height {} is smaller than kernel height {}",
                                     s.h, bank.kh()));
  }
  if (s.w < bank.kw()) {
    throw DimensionError(fmt::format("conv2d: input width {} is smaller than kernel width {}",
                                     s.w, bank.kw()));
  }
  if (bank.mode() == ConvMode::Standard && bank.depth() != s.c) {
    throw DimensionError(fmt::format(
        "conv2d: input has {} channels but the bank expects {} (channel axis)", s.c,
        bank.depth()));
  }

  const Tensor4 summed =
      bank.mode() == ConvMode::ChannelSum ? sum_channels(input) : Tensor4();
  const Tensor4& source = bank.mode() == ConvMode::ChannelSum ? summed : input;
  const std::size_t depth = source.shape().c;

  const std::size_t out_h = s.h - bank.kh() + 1;
  const std::size_t out_w = s.w - bank.kw() + 1;
  Tensor4 out(Shape{s.n, bank.filters(), out_h, out_w});
  const std::size_t kernel_plane = bank.kh() * bank.kw();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t f = 0; f < bank.filters(); ++f) {
      std::span<const double> filter = bank.filter(f);
      for (std::size_t c = 0; c < depth; ++c) {
        correlate_accumulate(source.plane(n, c), s.w,
                             filter.subspan(c * kernel_plane, kernel_plane),
                             bank.kh(), bank.kw(), out.plane(n, f), out_h, out_w);
      }
    }
  }
  return out;
}

PoolResult maxpool2_indexed(const Tensor4& input) {
  const Shape& s = input.shape();
  if (s.h % 2 != 0) {
    throw DimensionError(fmt::format("maxpool2: height {} is odd", s.h));
  }
  if (s.w % 2 != 0) {
    throw DimensionError(fmt::format("maxpool2: width {} is odd", s.w));
  }
  const std::size_t out_h = s.h / 2;
  const std::size_t out_w = s.w / 2;
  PoolResult result{Tensor4(Shape{s.n, s.c, out_h, out_w}), {}};
  result.argmax.resize(result.output.size());

  std::span<const double> in = input.data();
  std::span<double> out = result.output.data();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < s.n * s.c; ++plane) {
    const std::size_t base = plane * s.h * s.w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox, ++o) {
        const std::size_t top = base + 2 * oy * s.w + 2 * ox;
        const std::size_t window[4] = {top, top + 1, top + s.w, top + s.w + 1};
        std::size_t best = window[0];
        for (std::size_t k = 1; k < 4; ++k) {
          if (in[window[k]] > in[best]) best = window[k];
        }
        out[o] = in[best];
        result.argmax[o] = best;
      }
    }
  }
  return result;
}

Tensor4 maxpool2(const Tensor4& input) { return maxpool2_indexed(input).output; }

Tensor4 relu(Tensor4 input) {
  for (double& v : input.data()) v = v > 0.0 ? v : 0.0;
  return input;
}

Logits::Logits(std::size_t samples, std::size_t classes)
    : samples_(samples), classes_(classes), values_(samples * classes, 0.0) {}

Logits::Logits(std::size_t samples, std::size_t classes, std::vector<double> values)
    : samples_(samples), classes_(classes), values_(std::move(values)) {
  if (values_.size() != samples * classes) {
    throw DimensionError(fmt::format("logits length {} does not match {} x {}",
                                     values_.size(), samples, classes));
  }
}

double preprocess_divisor(std::span<const double> logits) {
  if (logits.empty()) return 1.0;
  const double count = static_cast<double>(logits.size());
  double mean = 0.0;
  for (double v : logits) mean += v;
  mean /= count;
  double variance = 0.0;
  for (double v : logits) variance += (v - mean) * (v - mean);
  variance /= count;
  const double deviation = std::sqrt(variance);
  return deviation < 1e-12 ? 1.0 : deviation;
}

std::vector<double> softmax_preprocess(std::span<const double> logits,
                                       double divisor) {
  std::vector<double> scaled(logits.begin(), logits.end());
  if (scaled.empty()) return scaled;
  for (double& v : scaled) v /= divisor;
  const double top = *std::max_element(scaled.begin(), scaled.end());
  for (double& v : scaled) v -= top;
  return scaled;
}

std::vector<double> softmax_preprocess(std::span<const double> logits) {
  return softmax_preprocess(logits, preprocess_divisor(logits));
}

Logits preprocess(const Logits& logits) {
  Logits out(logits.samples(), logits.classes());
  for (std::size_t i = 0; i < logits.samples(); ++i) {
    const std::vector<double> row = softmax_preprocess(logits.row(i));
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double top = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

double sample_cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw IndexError(fmt::format("label {} outside [0, {})", label, logits.size()));
  }
  const std::vector<double> p = softmax(logits);
  return -std::log(std::max(p[static_cast<std::size_t>(label)], kProbabilityFloor));
}

double softmax_cross_entropy(const Logits& logits, std::span<const int> labels) {
  if (labels.size() != logits.samples()) {
    throw DimensionError(fmt::format("{} labels for {} samples", labels.size(),
                                     logits.samples()));
  }
  if (logits.samples() == 0) {
    throw DimensionError("softmax_cross_entropy: empty batch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < logits.samples(); ++i) {
    total += sample_cross_entropy(logits.row(i), labels[i]);
  }
  return total / static_cast<double>(logits.samples());
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace blindlab
