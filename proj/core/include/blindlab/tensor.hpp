#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace blindlab {

// Extents of a rank-4 (batch, channel, height, width) array.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t size() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  constexpr std::size_t sample() const { return c * h * w; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

// Dense NCHW tensor of doubles, row-major.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape shape, double fill = 0.0);
  // Throws DimensionError when data.size() != shape.size().
  Tensor4(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[offset(n, c, y, x)];
  }
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[offset(n, c, y, x)];
  }

  // One (h, w) feature map.
  std::span<double> plane(std::size_t n, std::size_t c) {
    return std::span<double>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
  }
  std::span<const double> plane(std::size_t n, std::size_t c) const {
    return std::span<const double>(data_).subspan(offset(n, c, 0, 0),
                                                  shape_.plane());
  }

  // All channels of one batch entry.
  std::span<double> sample(std::size_t n) {
    return std::span<double>(data_).subspan(n * shape_.sample(), shape_.sample());
  }
  std::span<const double> sample(std::size_t n) const {
    return std::span<const double>(data_).subspan(n * shape_.sample(),
                                                  shape_.sample());
  }

  bool all_finite() const;

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  std::size_t offset(std::size_t n, std::size_t c, std::size_t y,
                     std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{};
  std::vector<double> data_;
};

// Concatenates tensors along the batch axis; all other extents must agree.
Tensor4 concat_batch(std::span<const Tensor4> parts);

}  // namespace blindlab
