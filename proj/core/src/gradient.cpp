#include "blindlab/gradient.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "blindlab/errors.hpp"

namespace blindlab {

ForwardPass forward_with_cache(const NetworkModel& model, const Tensor4& batch,
                               std::span<const int> labels) {
  check_geometry(model, batch);
  ForwardPass pass;
  ForwardCache& cache = pass.cache;

  Tensor4 x = batch;
  std::size_t bank = 0;
  for (const LayerSpec& layer : model.layers()) {
    if (layer.kind == LayerKind::Pool) {
      PoolResult pooled = maxpool2_indexed(x);
      cache.layers.emplace_back(PoolRecord{x.shape(), std::move(pooled.argmax)});
      x = std::move(pooled.output);
      continue;
    }
    const KernelBank& weights = model.banks()[bank];
    ConvRecord record;
    record.bank = bank++;
    record.activation = layer.activation;
    if (weights.mode() == ConvMode::ChannelSum) record.summed = sum_channels(x);
    record.pre_activation = conv2d(x, weights);
    record.input = std::move(x);
    x = layer.activation ? relu(record.pre_activation) : record.pre_activation;
    cache.layers.emplace_back(std::move(record));
  }

  const std::size_t n = batch.shape().n;
  cache.raw = Logits(n, model.classes(),
                     std::vector<double>(x.data().begin(), x.data().end()));
  cache.scaled = Logits(n, model.classes());
  cache.probabilities = Logits(n, model.classes());
  cache.divisors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    cache.divisors[i] = preprocess_divisor(cache.raw.row(i));
    const std::vector<double> scaled = softmax_preprocess(cache.raw.row(i), cache.divisors[i]);
    std::copy(scaled.begin(), scaled.end(), cache.scaled.row(i).begin());
    const std::vector<double> p = softmax(scaled);
    std::copy(p.begin(), p.end(), cache.probabilities.row(i).begin());
  }
  pass.loss = softmax_cross_entropy(cache.scaled, labels);
  return pass;
}

bool GradientSet::all_finite() const {
  return std::all_of(banks.begin(), banks.end(), [](const std::vector<double>& bank) {
    return std::all_of(bank.begin(), bank.end(), [](double v) { return std::isfinite(v); });
  });
}

std::size_t GradientSet::size() const {
  std::size_t total = 0;
  for (const auto& bank : banks) total += bank.size();
  return total;
}

GradientSet zero_gradients(const NetworkModel& model) {
  GradientSet grads;
  for (const KernelBank& bank : model.banks()) grads.banks.emplace_back(bank.size(), 0.0);
  return grads;
}

namespace {

// dW += correlate(source, upstream) and, when wanted, d(source).
void conv_backward(const KernelBank& bank, const Tensor4& source, const Tensor4& upstream,
                   std::span<double> weight_grad, Tensor4* source_grad) {
  const Shape& in = source.shape();
  const Shape& out = upstream.shape();
  const std::size_t kh = bank.kh();
  const std::size_t kw = bank.kw();
  const std::size_t kernel_plane = kh * kw;
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t f = 0; f < bank.filters(); ++f) {
      std::span<const double> dout = upstream.plane(n, f);
      std::span<const double> filter = bank.filter(f);
      std::span<double> dfilter = weight_grad.subspan(f * bank.filter_size(), bank.filter_size());
      for (std::size_t c = 0; c < in.c; ++c) {
        std::span<const double> src = source.plane(n, c);
        for (std::size_t ky = 0; ky < kh; ++ky) {
          for (std::size_t kx = 0; kx < kw; ++kx) {
            double acc = 0.0;
            for (std::size_t oy = 0; oy < out.h; ++oy) {
              const double* s = src.data() + (oy + ky) * in.w + kx;
              const double* d = dout.data() + oy * out.w;
              for (std::size_t ox = 0; ox < out.w; ++ox) acc += d[ox] * s[ox];
            }
            dfilter[c * kernel_plane + ky * kw + kx] += acc;
          }
        }
        if (source_grad == nullptr) continue;
        std::span<double> dsrc = source_grad->plane(n, c);
        for (std::size_t ky = 0; ky < kh; ++ky) {
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const double k = filter[c * kernel_plane + ky * kw + kx];
            for (std::size_t oy = 0; oy < out.h; ++oy) {
              double* s = dsrc.data() + (oy + ky) * in.w + kx;
              const double* d = dout.data() + oy * out.w;
              for (std::size_t ox = 0; ox < out.w; ++ox) s[ox] += k * d[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

GradientSet backward(const NetworkModel& model, const ForwardCache& cache,
                     std::span<const int> labels, double upstream) {
  const std::size_t n = cache.probabilities.samples();
  const std::size_t classes = cache.probabilities.classes();
  if (labels.size() != n) {
    throw DimensionError(fmt::format("backward: {} labels for {} samples", labels.size(), n));
  }

  // d loss / d raw logits. The clamped branch of the loss is flat.
  Tensor4 grad(Shape{n, classes, 1, 1});
  const double scale = upstream / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || label >= classes) {
      throw IndexError(fmt::format("label {} outside [0, {})", labels[i], classes));
    }
    std::span<const double> p = cache.probabilities.row(i);
    if (p[label] < kProbabilityFloor) continue;
    std::span<double> g = grad.sample(i);
    for (std::size_t k = 0; k < classes; ++k) {
      const double target = k == label ? 1.0 : 0.0;
      g[k] = (p[k] - target) * scale / cache.divisors[i];
    }
  }

  GradientSet grads = zero_gradients(model);
  for (std::size_t li = cache.layers.size(); li-- > 0;) {
    const bool need_input_grad = li > 0;
    if (const auto* pool = std::get_if<PoolRecord>(&cache.layers[li])) {
      Tensor4 routed(pool->input_shape);
      std::span<double> dst = routed.data();
      std::span<const double> src = grad.data();
      for (std::size_t o = 0; o < src.size(); ++o) dst[pool->argmax[o]] += src[o];
      grad = std::move(routed);
      continue;
    }
    const auto& conv = std::get<ConvRecord>(cache.layers[li]);
    if (conv.activation) {
      std::span<const double> pre = conv.pre_activation.data();
      std::span<double> g = grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(pre[i] > 0.0)) g[i] = 0.0;
      }
    }
    const KernelBank& bank = model.banks()[conv.bank];
    const bool summed = bank.mode() == ConvMode::ChannelSum;
    const Tensor4& source = summed ? conv.summed : conv.input;
    if (!need_input_grad) {
      conv_backward(bank, source, grad, grads.banks[conv.bank], nullptr);
      continue;
    }
    Tensor4 source_grad(source.shape());
    conv_backward(bank, source, grad, grads.banks[conv.bank], &source_grad);
    if (summed) {
      // Every input channel feeds the summed map with unit weight.
      const Shape& s = conv.input.shape();
      Tensor4 input_grad(s);
      for (std::size_t b = 0; b < s.n; ++b) {
        std::span<const double> d = source_grad.plane(b, 0);
        for (std::size_t c = 0; c < s.c; ++c) {
          std::copy(d.begin(), d.end(), input_grad.plane(b, c).begin());
        }
      }
      grad = std::move(input_grad);
    } else {
      grad = std::move(source_grad);
    }
  }
  return grads;
}

double loss_with_divisors(const NetworkModel& model, const Tensor4& batch,
                          std::span<const int> labels, std::span<const double> divisors) {
  const Logits raw = forward(model, batch);
  if (divisors.size() != raw.samples()) {
    throw DimensionError(fmt::format("{} divisors for {} samples", divisors.size(),
                                     raw.samples()));
  }
  Logits scaled(raw.samples(), raw.classes());
  for (std::size_t i = 0; i < raw.samples(); ++i) {
    const std::vector<double> row = softmax_preprocess(raw.row(i), divisors[i]);
    std::copy(row.begin(), row.end(), scaled.row(i).begin());
  }
  return softmax_cross_entropy(scaled, labels);
}

GradientSet finite_difference_gradient(const NetworkModel& model, const Tensor4& batch,
                                       std::span<const int> labels, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw ConfigError(fmt::format("finite difference step must be positive, got {}", epsilon));
  }
  const Logits raw = forward(model, batch);
  std::vector<double> divisors(raw.samples());
  for (std::size_t i = 0; i < raw.samples(); ++i) divisors[i] = preprocess_divisor(raw.row(i));

  NetworkModel probe = model;
  GradientSet grads = zero_gradients(model);
  for (std::size_t b = 0; b < probe.conv_layers(); ++b) {
    std::span<double> weights = probe.banks()[b].weights();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double original = weights[i];
      weights[i] = original + epsilon;
      const double up = loss_with_divisors(probe, batch, labels, divisors);
      weights[i] = original - epsilon;
      const double down = loss_with_divisors(probe, batch, labels, divisors);
      weights[i] = original;
      grads.banks[b][i] = (up - down) / (2.0 * epsilon);
    }
  }
  return grads;
}

}  // namespace blindlab
