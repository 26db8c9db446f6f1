#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "blindlab/ops.hpp"
#include "blindlab/tensor.hpp"

namespace blindlab {

struct LabeledDataset;

// Per-sample input extents.
struct Geometry {
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;

  friend constexpr bool operator==(const Geometry&, const Geometry&) = default;
};

inline constexpr Geometry kMnistGeometry{1, 28, 28};
inline constexpr Geometry kCifarGeometry{3, 32, 32};

enum class LayerKind { Conv, Pool };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  // Conv only.
  ConvMode mode = ConvMode::Standard;
  std::size_t filters = 0;
  std::size_t kh = 0;
  std::size_t kw = 0;
  bool activation = false;

  static LayerSpec conv(ConvMode mode, std::size_t filters, std::size_t kh,
                        std::size_t kw, bool activation) {
    return {LayerKind::Conv, mode, filters, kh, kw, activation};
  }
  static LayerSpec pool() { return {LayerKind::Pool}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// A bias-free stack of convolution and 2x2 max-pool layers whose last conv
// layer emits one 1x1 map per class. Weights start at zero.
class NetworkModel {
 public:
  NetworkModel() = default;
  // Checks the layer pipeline against the geometry and throws ConfigError
  // if it does not end in (classes, 1, 1).
  NetworkModel(Geometry geometry, std::size_t classes,
               std::vector<LayerSpec> layers);

  const Geometry& geometry() const { return geometry_; }
  std::size_t classes() const { return classes_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }

  // One bank per Conv layer, in pipeline order.
  std::span<KernelBank> banks() { return banks_; }
  std::span<const KernelBank> banks() const { return banks_; }
  std::size_t conv_layers() const { return banks_.size(); }
  std::size_t filter_count() const;
  std::size_t parameter_count() const;

  friend bool operator==(const NetworkModel&, const NetworkModel&) = default;

 private:
  Geometry geometry_{};
  std::size_t classes_ = 0;
  std::vector<LayerSpec> layers_;
  std::vector<KernelBank> banks_;
};

// Kernel extents (k1, k2, k3) along one spatial axis for the
// conv -> pool -> conv -> pool -> conv pipeline such that the final conv
// output is 1 wide. Candidates for k1 and k2 are tried from 5 down to 1 and
// the first admissible pair wins.
std::optional<std::array<std::size_t, 3>> kernel_schedule(std::size_t extent);

struct CnnOptions {
  std::array<std::size_t, 2> hidden_filters{16, 16};
};

// conv (no activation) -> pool -> conv (ReLU) -> pool -> conv (no
// activation) with kernels from kernel_schedule(). Weights are zero; call
// init_weights() next. Throws ConfigError when no schedule exists.
NetworkModel build_cnn(Geometry geometry, std::size_t classes,
                       ConvMode mode, CnnOptions options = {});

// Every weight drawn from Uniform(-1, 1) using RngStream(seed).
[[nodiscard]] NetworkModel init_weights(NetworkModel model, std::uint64_t seed);

// Throws DimensionError (naming the axis) unless the batch's channel,
// height and width extents match the model geometry.
void check_geometry(const NetworkModel& model, const Tensor4& batch);

// Raw (n, classes) scores. Throws DimensionError on a geometry mismatch.
Logits forward(const NetworkModel& model, const Tensor4& batch);

// Mean softmax cross-entropy of the preprocessed logits.
double loss(const NetworkModel& model, const Tensor4& batch,
            std::span<const int> labels);

// Fraction of examples whose argmax logit equals the label.
double evaluate(const NetworkModel& model, const LabeledDataset& dataset,
                std::size_t batch_size = 256);

// Flattened copy of every weight, bank after bank.
std::vector<double> flatten_weights(const NetworkModel& model);

// Plain-text serialization; weights are written with 17 significant digits
// so a save/load round trip is exact.
void save_model(const NetworkModel& model, std::ostream& out);
NetworkModel load_model(std::istream& in);

}  // namespace blindlab
