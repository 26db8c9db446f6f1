#include "blindlab/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "blindlab/errors.hpp"

namespace blindlab {

std::string to_string(const Shape& shape) {
  return fmt::format("({}, {}, {}, {})", shape.n, shape.c, shape.h, shape.w);
}

Tensor4::Tensor4(Shape shape, double fill)
    : shape_(shape), data_(shape.size(), fill) {}

Tensor4::Tensor4(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw DimensionError(fmt::format("tensor data length {} does not match shape {}",
                                     data_.size(), to_string(shape_)));
  }
}

bool Tensor4::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor4 concat_batch(std::span<const Tensor4> parts) {
  if (parts.empty()) return {};
  Shape shape = parts.front().shape();
  shape.n = 0;
  for (const Tensor4& part : parts) {
    const Shape& s = part.shape();
    if (s.c != shape.c || s.h != shape.h || s.w != shape.w) {
      throw DimensionError(fmt::format("cannot concatenate {} with {}",
                                       to_string(s), to_string(parts.front().shape())));
    }
    shape.n += s.n;
  }
  std::vector<double> data;
  data.reserve(shape.size());
  for (const Tensor4& part : parts) {
    data.insert(data.end(), part.data().begin(), part.data().end());
  }
  return Tensor4(shape, std::move(data));
}

}  // namespace blindlab
