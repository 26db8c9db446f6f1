#pragma once

// Numerical kernels: convolution in two channel semantics, 2x2 max-pooling,
// ReLU, the softmax preprocessing step and softmax cross-entropy.
//
// All kernels are pure, single-threaded and use a fixed reduction order, so
// repeated calls on equal inputs give bitwise-equal results.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "blindlab/tensor.hpp"

namespace blindlab {

enum class ConvMode {
  // Input channels are summed into one map before each 2-D filter is
  // applied. Filters carry no input-channel axis.
  ChannelSum,
  // Conventional multi-channel convolution.
  Standard,
};

std::string_view to_string(ConvMode mode);
// Accepts "channel-sum" and "standard". Throws ConfigError otherwise.
ConvMode parse_conv_mode(std::string_view text);

// Weights of one convolution layer. Filters are stored contiguously, each
// spanning depth() * kh() * kw() scalars, where depth() is 1 for ChannelSum
// banks and the input channel count for Standard banks.
class KernelBank {
 public:
  KernelBank() = default;

  static KernelBank channel_sum(std::size_t filters, std::size_t kh,
                                std::size_t kw);
  static KernelBank standard(std::size_t filters, std::size_t in_channels,
                             std::size_t kh, std::size_t kw);

  ConvMode mode() const { return mode_; }
  std::size_t filters() const { return filters_; }
  std::size_t depth() const { return depth_; }
  std::size_t kh() const { return kh_; }
  std::size_t kw() const { return kw_; }
  std::size_t filter_size() const { return depth_ * kh_ * kw_; }
  std::size_t size() const { return weights_.size(); }

  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }

  std::span<double> filter(std::size_t f) {
    return weights().subspan(f * filter_size(), filter_size());
  }
  std::span<const double> filter(std::size_t f) const {
    return weights().subspan(f * filter_size(), filter_size());
  }

  friend bool operator==(const KernelBank&, const KernelBank&) = default;

 private:
  KernelBank(ConvMode mode, std::size_t filters, std::size_t depth,
             std::size_t kh, std::size_t kw);

  ConvMode mode_ = ConvMode::Standard;
  std::size_t filters_ = 0;
  std::size_t depth_ = 0;
  std::size_t kh_ = 0;
  std::size_t kw_ = 0;
  std::vector<double> weights_;
};

// Valid (unpadded), stride-1 cross-correlation without bias.
// Output shape is (n, filters, h - kh + 1, w - kw + 1).
Tensor4 conv2d(const Tensor4& input, const KernelBank& bank);

// Elementwise sum over channels: (n, c, h, w) -> (n, 1, h, w).
Tensor4 sum_channels(const Tensor4& input);

// 2x2 window, stride 2, per-channel maximum. h and w must be even.
Tensor4 maxpool2(const Tensor4& input);

struct PoolResult {
  Tensor4 output;
  // For each output element, the flat input index holding the maximum.
  // Ties resolve to the first maximal position in scan order.
  std::vector<std::size_t> argmax;
};
PoolResult maxpool2_indexed(const Tensor4& input);

Tensor4 relu(Tensor4 input);

// Row-major (samples, classes) matrix of class scores.
class Logits {
 public:
  Logits() = default;
  Logits(std::size_t samples, std::size_t classes);
  Logits(std::size_t samples, std::size_t classes, std::vector<double> values);

  std::size_t samples() const { return samples_; }
  std::size_t classes() const { return classes_; }

  std::span<double> row(std::size_t i) {
    return std::span<double>(values_).subspan(i * classes_, classes_);
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * classes_, classes_);
  }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const Logits&, const Logits&) = default;

 private:
  std::size_t samples_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> values_;
};

// Divisor used by softmax_preprocess: the population standard deviation of
// the logits, or 1 when that deviation is below 1e-12.
double preprocess_divisor(std::span<const double> logits);

// Divides by preprocess_divisor() and subtracts the maximum of the result.
std::vector<double> softmax_preprocess(std::span<const double> logits);

// Same scaling with an externally supplied divisor.
std::vector<double> softmax_preprocess(std::span<const double> logits,
                                       double divisor);

// Row-wise softmax_preprocess.
Logits preprocess(const Logits& logits);

std::vector<double> softmax(std::span<const double> logits);

// Probability floor applied before the logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

// -log(max(softmax(row)[label], 1e-12)) for one sample.
double sample_cross_entropy(std::span<const double> logits, int label);

// Batch mean of sample_cross_entropy. Throws IndexError for labels outside
// [0, classes) and DimensionError when labels.size() != samples.
double softmax_cross_entropy(const Logits& logits, std::span<const int> labels);

// Index of the largest entry; the first index wins ties.
std::size_t argmax(std::span<const double> values);

}  // namespace blindlab
