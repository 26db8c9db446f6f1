#include "blindlab/network.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "blindlab/dataset.hpp"
#include "blindlab/errors.hpp"
#include "blindlab/rng.hpp"

namespace blindlab {

NetworkModel::NetworkModel(Geometry geometry, std::size_t classes,
                           std::vector<LayerSpec> layers)
    : geometry_(geometry), classes_(classes), layers_(std::move(layers)) {
  if (classes_ == 0) throw ConfigError("network needs at least one class");
  std::size_t c = geometry.channels;
  std::size_t h = geometry.height;
  std::size_t w = geometry.width;
  if (c == 0 || h == 0 || w == 0) throw ConfigError("input geometry has a zero extent");

  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& layer = layers_[i];
    if (layer.kind == LayerKind::Pool) {
      if (h % 2 != 0 || w % 2 != 0) {
        throw ConfigError(fmt::format("layer {}: cannot pool a {}x{} map", i, h, w));
      }
      h /= 2;
      w /= 2;
      continue;
    }
    if (layer.filters == 0 || layer.kh == 0 || layer.kw == 0) {
      throw ConfigError(fmt::format("layer {}: conv needs filters and kernel extents", i));
    }
    if (layer.kh > h || layer.kw > w) {
      throw ConfigError(fmt::format("layer {}: {}x{} kernel does not fit a {}x{} map", i,
                                    layer.kh, layer.kw, h, w));
    }
    banks_.push_back(layer.mode == ConvMode::ChannelSum
                         ? KernelBank::channel_sum(layer.filters, layer.kh, layer.kw)
                         : KernelBank::standard(layer.filters, c, layer.kh, layer.kw));
    c = layer.filters;
    h = h - layer.kh + 1;
    w = w - layer.kw + 1;
  }
  if (banks_.empty() || layers_.back().kind != LayerKind::Conv) {
    throw ConfigError("network must end with a conv layer");
  }
  if (c != classes_ || h != 1 || w != 1) {
    throw ConfigError(fmt::format("network emits ({}, {}, {}) but needs ({}, 1, 1)", c, h,
                                  w, classes_));
  }
}

std::size_t NetworkModel::filter_count() const {
  std::size_t total = 0;
  for (const KernelBank& bank : banks_) total += bank.filters();
  return total;
}

std::size_t NetworkModel::parameter_count() const {
  std::size_t total = 0;
  for (const KernelBank& bank : banks_) total += bank.size();
  return total;
}

std::optional<std::array<std::size_t, 3>> kernel_schedule(std::size_t extent) {
  for (std::size_t k1 = 5; k1 >= 1; --k1) {
    if (k1 > extent) continue;
    const std::size_t a = extent - k1 + 1;
    if (a % 2 != 0) continue;
    const std::size_t b = a / 2;
    for (std::size_t k2 = 5; k2 >= 1; --k2) {
      if (k2 > b) continue;
      const std::size_t c = b - k2 + 1;
      if (c % 2 != 0) continue;
      return std::array<std::size_t, 3>{k1, k2, c / 2};
    }
  }
  return std::nullopt;
}

NetworkModel build_cnn(Geometry geometry, std::size_t classes, ConvMode mode,
                       CnnOptions options) {
  const auto rows = kernel_schedule(geometry.height);
  const auto cols = kernel_schedule(geometry.width);
  if (!rows || !cols) {
    throw ConfigError(fmt::format("no conv/pool kernel schedule reduces {}x{} to 1x1",
                                  geometry.height, geometry.width));
  }
  std::vector<LayerSpec> layers{
      LayerSpec::conv(mode, options.hidden_filters[0], (*rows)[0], (*cols)[0], false),
      LayerSpec::pool(),
      LayerSpec::conv(mode, options.hidden_filters[1], (*rows)[1], (*cols)[1], true),
      LayerSpec::pool(),
      LayerSpec::conv(mode, classes, (*rows)[2], (*cols)[2], false),
  };
  return NetworkModel(geometry, classes, std::move(layers));
}

NetworkModel init_weights(NetworkModel model, std::uint64_t seed) {
  RngStream rng(seed);
  for (KernelBank& bank : model.banks()) {
    for (double& w : bank.weights()) w = rng.uniform(-1.0, 1.0);
  }
  return model;
}

void check_geometry(const NetworkModel& model, const Tensor4& batch) {
  const Shape& s = batch.shape();
  const Geometry& g = model.geometry();
  if (s.c != g.channels) {
    throw DimensionError(fmt::format("batch has {} channels, model expects {} (channel axis)",
                                     s.c, g.channels));
  }
  if (s.h != g.height) {
    throw DimensionError(fmt::format("batch height {} does not match model height {}", s.h,
                                     g.height));
  }
  if (s.w != g.width) {
    throw DimensionError(fmt::format("batch width {} does not match model width {}", s.w,
                                     g.width));
  }
}

Logits forward(const NetworkModel& model, const Tensor4& batch) {
  check_geometry(model, batch);
  Tensor4 x = batch;
  std::size_t bank = 0;
  for (const LayerSpec& layer : model.layers()) {
    if (layer.kind == LayerKind::Pool) {
      x = maxpool2(x);
      continue;
    }
    x = conv2d(x, model.banks()[bank++]);
    if (layer.activation) x = relu(std::move(x));
  }
  const std::size_t n = batch.shape().n;
  std::vector<double> values(x.data().begin(), x.data().end());
  return Logits(n, model.classes(), std::move(values));
}

double loss(const NetworkModel& model, const Tensor4& batch, std::span<const int> labels) {
  return softmax_cross_entropy(preprocess(forward(model, batch)), labels);
}

double evaluate(const NetworkModel& model, const LabeledDataset& dataset,
                std::size_t batch_size) {
  if (dataset.size() == 0) throw UndefinedInputError("evaluate: empty dataset");
  batch_size = std::max<std::size_t>(batch_size, 1);
  std::size_t correct = 0;
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t stop = std::min(dataset.size(), start + batch_size);
    indices.resize(stop - start);
    for (std::size_t i = start; i < stop; ++i) indices[i - start] = i;
    const Batch batch = gather(dataset, indices);
    const Logits logits = forward(model, batch.images);
    for (std::size_t i = 0; i < logits.samples(); ++i) {
      if (static_cast<int>(argmax(logits.row(i))) == batch.labels[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

std::vector<double> flatten_weights(const NetworkModel& model) {
  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (const KernelBank& bank : model.banks()) {
    flat.insert(flat.end(), bank.weights().begin(), bank.weights().end());
  }
  return flat;
}

namespace {

constexpr std::string_view kModelMagic = "blindlab-model";
constexpr int kModelVersion = 1;

template <typename T>
T read_field(std::istream& in, std::string_view what) {
  T value{};
  if (!(in >> value)) throw FormatError(fmt::format("model file: cannot read {}", what));
  return value;
}

void expect_token(std::istream& in, std::string_view token) {
  const auto got = read_field<std::string>(in, token);
  if (got != token) {
    throw FormatError(fmt::format("model file: expected '{}', found '{}'", token, got));
  }
}

}  // namespace

void save_model(const NetworkModel& model, std::ostream& out) {
  const Geometry& g = model.geometry();
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << fmt::format("geometry {} {} {}\n", g.channels, g.height, g.width);
  out << fmt::format("classes {}\n", model.classes());
  out << fmt::format("layers {}\n", model.layers().size());
  for (const LayerSpec& layer : model.layers()) {
    if (layer.kind == LayerKind::Pool) {
      out << "pool\n";
    } else {
      out << fmt::format("conv {} {} {} {} {}\n", to_string(layer.mode), layer.filters,
                         layer.kh, layer.kw, layer.activation ? 1 : 0);
    }
  }
  out << fmt::format("weights {}\n", model.parameter_count());
  for (const KernelBank& bank : model.banks()) {
    for (double w : bank.weights()) out << fmt::format("{:.17g}\n", w);
  }
}

NetworkModel load_model(std::istream& in) {
  expect_token(in, kModelMagic);
  if (read_field<int>(in, "version") != kModelVersion) {
    throw FormatError("model file: unsupported version");
  }
  expect_token(in, "geometry");
  Geometry g;
  g.channels = read_field<std::size_t>(in, "channels");
  g.height = read_field<std::size_t>(in, "height");
  g.width = read_field<std::size_t>(in, "width");
  expect_token(in, "classes");
  const auto classes = read_field<std::size_t>(in, "classes");
  expect_token(in, "layers");
  const auto count = read_field<std::size_t>(in, "layer count");
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < count; ++i) {
    const auto kind = read_field<std::string>(in, "layer kind");
    if (kind == "pool") {
      layers.push_back(LayerSpec::pool());
    } else if (kind == "conv") {
      const ConvMode mode = parse_conv_mode(read_field<std::string>(in, "conv mode"));
      const auto filters = read_field<std::size_t>(in, "filters");
      const auto kh = read_field<std::size_t>(in, "kh");
      const auto kw = read_field<std::size_t>(in, "kw");
      const auto act = read_field<int>(in, "activation");
      layers.push_back(LayerSpec::conv(mode, filters, kh, kw, act != 0));
    } else {
      throw FormatError(fmt::format("model file: unknown layer kind '{}'", kind));
    }
  }
  NetworkModel model(g, classes, std::move(layers));
  expect_token(in, "weights");
  if (read_field<std::size_t>(in, "weight count") != model.parameter_count()) {
    throw FormatError("model file: weight count does not match the layers");
  }
  for (KernelBank& bank : model.banks()) {
    for (double& w : bank.weights()) {
      // operator>> rejects "nan"/"inf", which keeps loaded weights finite.
      w = read_field<double>(in, "weight");
    }
  }
  return model;
}

}  // namespace blindlab
