#include <cmath>
#include <sstream>

#include "blindlab/dataset.hpp"
#include "blindlab/errors.hpp"
#include "blindlab/network.hpp"
#include "blindlab/rng.hpp"
#include "doctest.h"

using namespace blindlab;

namespace {

Tensor4 random_batch(Shape shape, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor4 t(shape);
  for (double& v : t.data()) v = rng.uniform01();
  return t;
}

// Output extents of every layer, observed by running the pipeline.
std::vector<Shape> trace_shapes(const NetworkModel& model, Tensor4 x) {
  std::vector<Shape> shapes;
  std::size_t bank = 0;
  for (const LayerSpec& layer : model.layers()) {
    x = layer.kind == LayerKind::Pool ? maxpool2(x) : conv2d(x, model.banks()[bank++]);
    shapes.push_back(x.shape());
  }
  return shapes;
}

}  // namespace

TEST_SUITE("network") {
  TEST_CASE("MNIST shape schedule") {
    const NetworkModel model = build_cnn(kMnistGeometry, 10, ConvMode::Standard);
    const auto shapes = trace_shapes(model, Tensor4(Shape{1, 1, 28, 28}));
    REQUIRE(shapes.size() == 5);
    CHECK(shapes[0] == Shape{1, 16, 24, 24});
    CHECK(shapes[1] == Shape{1, 16, 12, 12});
    CHECK(shapes[2] == Shape{1, 16, 8, 8});
    CHECK(shapes[3] == Shape{1, 16, 4, 4});
    CHECK(shapes[4] == Shape{1, 10, 1, 1});
    CHECK(model.banks()[0].kh() == 5);
    CHECK(model.banks()[1].kh() == 5);
    CHECK(model.banks()[2].kh() == 4);
  }

  TEST_CASE("CIFAR-10 shape schedule") {
    const NetworkModel model = build_cnn(kCifarGeometry, 10, ConvMode::ChannelSum);
    const auto shapes = trace_shapes(model, Tensor4(Shape{1, 3, 32, 32}));
    CHECK(shapes[0] == Shape{1, 16, 28, 28});
    CHECK(shapes[1] == Shape{1, 16, 14, 14});
    CHECK(shapes[2] == Shape{1, 16, 10, 10});
    CHECK(shapes[3] == Shape{1, 16, 5, 5});
    CHECK(shapes[4] == Shape{1, 10, 1, 1});
  }

  TEST_CASE("layer pipeline follows conv-pool-conv(relu)-pool-conv") {
    const NetworkModel model = build_cnn(kMnistGeometry, 10, ConvMode::ChannelSum);
    const auto& layers = model.layers();
    REQUIRE(layers.size() == 5);
    CHECK(layers[0].kind == LayerKind::Conv);
    CHECK_FALSE(layers[0].activation);
    CHECK(layers[1].kind == LayerKind::Pool);
    CHECK(layers[2].activation);
    CHECK(layers[3].kind == LayerKind::Pool);
    CHECK_FALSE(layers[4].activation);
    CHECK(layers[4].filters == 10);
  }

  TEST_CASE("kernel schedule") {
    CHECK(kernel_schedule(28) == std::array<std::size_t, 3>{5, 5, 4});
    CHECK(kernel_schedule(32) == std::array<std::size_t, 3>{5, 5, 5});
    CHECK(kernel_schedule(10) == std::array<std::size_t, 3>{5, 2, 1});
    CHECK_FALSE(kernel_schedule(1).has_value());
    CHECK_THROWS_AS(build_cnn(Geometry{1, 1, 1}, 10, ConvMode::Standard), ConfigError);
  }

  TEST_CASE("parameter counts") {
    CHECK(build_cnn(kMnistGeometry, 10, ConvMode::ChannelSum).parameter_count() ==
          16 * 25 + 16 * 25 + 10 * 16);
    CHECK(build_cnn(kMnistGeometry, 10, ConvMode::Standard).parameter_count() ==
          16 * 1 * 25 + 16 * 16 * 25 + 10 * 16 * 16);
    CHECK(build_cnn(kCifarGeometry, 10, ConvMode::Standard).parameter_count() ==
          16 * 3 * 25 + 16 * 16 * 25 + 10 * 16 * 25);
    CHECK(build_cnn(kMnistGeometry, 10, ConvMode::ChannelSum).filter_count() == 42);
  }

  TEST_CASE("pipelines that do not end in 1x1 class maps are rejected") {
    CHECK_THROWS_AS(NetworkModel(Geometry{1, 4, 4}, 10,
                                 {LayerSpec::conv(ConvMode::Standard, 10, 3, 3, false)}),
                    ConfigError);
    CHECK_THROWS_AS(NetworkModel(Geometry{1, 3, 3}, 2, {LayerSpec::pool()}), ConfigError);
  }

  TEST_CASE("zero network yields zero logits and ln(classes) loss") {
    const NetworkModel model = build_cnn(kMnistGeometry, 10, ConvMode::Standard);
    const Tensor4 batch = random_batch(Shape{3, 1, 28, 28}, 1);
    const Logits logits = forward(model, batch);
    for (double v : logits.values()) CHECK(v == 0.0);
    const std::vector<int> labels{0, 4, 9};
    CHECK(loss(model, batch, labels) == doctest::Approx(std::log(10.0)).epsilon(1e-15));
  }

  TEST_CASE("init_weights is seeded and in range") {
    const NetworkModel zero = build_cnn(kMnistGeometry, 10, ConvMode::Standard);
    const NetworkModel a = init_weights(zero, 5);
    const NetworkModel b = init_weights(zero, 5);
    const NetworkModel c = init_weights(zero, 6);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    for (double w : flatten_weights(a)) {
      CHECK(w > -1.0);
      CHECK(w < 1.0);
    }
  }

  TEST_CASE("forward shape, determinism and batch independence") {
    const NetworkModel model =
        init_weights(build_cnn(kMnistGeometry, 10, ConvMode::Standard), 9);
    const Tensor4 first = random_batch(Shape{1, 1, 28, 28}, 2);
    const Tensor4 second = random_batch(Shape{1, 1, 28, 28}, 3);
    const std::vector<Tensor4> parts{first, second};
    const Tensor4 both = concat_batch(parts);

    const Logits joint = forward(model, both);
    CHECK(joint.samples() == 2);
    CHECK(joint.classes() == 10);
    CHECK(forward(model, both) == joint);

    const Logits a = forward(model, first);
    const Logits b = forward(model, second);
    for (std::size_t k = 0; k < 10; ++k) {
      CHECK(joint.row(0)[k] == a.row(0)[k]);
      CHECK(joint.row(1)[k] == b.row(0)[k]);
    }
  }

  TEST_CASE("geometry mismatch is a dimension error") {
    const NetworkModel model = build_cnn(kMnistGeometry, 10, ConvMode::Standard);
    CHECK_THROWS_WITH_AS(forward(model, Tensor4(Shape{1, 3, 28, 28})),
                         doctest::Contains("channel"), DimensionError);
    CHECK_THROWS_WITH_AS(forward(model, Tensor4(Shape{1, 1, 27, 28})),
                         doctest::Contains("height"), DimensionError);
  }

  TEST_CASE("evaluate: constant logits predict class 0") {
    const NetworkModel model = build_cnn(kMnistGeometry, 10, ConvMode::Standard);
    LabeledDataset data;
    data.images = random_batch(Shape{8, 1, 28, 28}, 4);
    data.labels = {0, 1, 0, 3, 0, 5, 6, 7};
    CHECK(evaluate(model, data, 3) == doctest::Approx(3.0 / 8.0));
  }

  TEST_CASE("evaluate: hand-built perfect classifier") {
    // Two 1x1 "images" and a 1x1 conv whose filters reproduce the label.
    NetworkModel model(Geometry{1, 1, 1}, 2,
                       {LayerSpec::conv(ConvMode::Standard, 2, 1, 1, false)});
    model.banks()[0].weights()[0] = -1.0;
    model.banks()[0].weights()[1] = 1.0;
    LabeledDataset data;
    data.classes = 2;
    data.images = Tensor4(Shape{2, 1, 1, 1}, {-0.5, 0.5});
    data.labels = {0, 1};
    CHECK(evaluate(model, data, 1) == 1.0);
  }

  TEST_CASE("evaluate is independent of batch partitioning and order") {
    const NetworkModel model =
        init_weights(build_cnn(kMnistGeometry, 10, ConvMode::ChannelSum), 10);
    LabeledDataset data;
    data.images = random_batch(Shape{37, 1, 28, 28}, 5);
    RngStream rng(6);
    for (int i = 0; i < 37; ++i) data.labels.push_back(static_cast<int>(rng.below(10)));
    const double reference = evaluate(model, data, 1);
    for (std::size_t batch : {2, 5, 16, 37, 100}) CHECK(evaluate(model, data, batch) == reference);

    std::vector<std::size_t> reversed(37);
    for (std::size_t i = 0; i < 37; ++i) reversed[i] = 36 - i;
    const Batch flipped = gather(data, reversed);
    LabeledDataset permuted{flipped.images, flipped.labels, 10};
    CHECK(evaluate(model, permuted, 8) == reference);
  }

  TEST_CASE("model text round trip is exact") {
    const NetworkModel model =
        init_weights(build_cnn(kCifarGeometry, 10, ConvMode::Standard), 12);
    std::stringstream text;
    save_model(model, text);
    CHECK(load_model(text) == model);
  }

  TEST_CASE("malformed model text is rejected") {
    std::stringstream bad("blindlab-model 1\ngeometry 1 28 28\nclasses ten\n");
    CHECK_THROWS_AS(load_model(bad), FormatError);
  }
}
