#include <cmath>
#include <numeric>

#include "blindlab/errors.hpp"
#include "blindlab/ops.hpp"
#include "blindlab/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace blindlab;

namespace {

Tensor4 random_tensor(Shape shape, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor4 t(shape);
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

KernelBank random_bank(KernelBank bank, std::uint64_t seed) {
  RngStream rng(seed);
  for (double& v : bank.weights()) v = rng.uniform(-1.0, 1.0);
  return bank;
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("data length must match the shape") {
    CHECK_THROWS_AS(Tensor4(Shape{1, 1, 2, 2}, std::vector<double>(3)), DimensionError);
    CHECK(Tensor4(Shape{2, 3, 4, 5}).size() == 120);
  }

  TEST_CASE("row-major NCHW indexing") {
    std::vector<double> values(2 * 2 * 2 * 3);
    std::iota(values.begin(), values.end(), 0.0);
    Tensor4 t(Shape{2, 2, 2, 3}, values);
    CHECK(t.at(0, 0, 0, 2) == 2);
    CHECK(t.at(0, 1, 0, 0) == 6);
    CHECK(t.at(1, 0, 1, 1) == 16);
    CHECK(t.plane(1, 1)[0] == 18);
  }
}

TEST_SUITE("conv2d") {
  TEST_CASE("standard bank on a 3x3 ramp") {
    std::vector<double> values(9);
    std::iota(values.begin(), values.end(), 1.0);
    const Tensor4 input(Shape{1, 1, 3, 3}, values);
    KernelBank bank = KernelBank::standard(1, 1, 2, 2);
    for (double& w : bank.weights()) w = 1.0;
    const Tensor4 out = conv2d(input, bank);
    CHECK(out.shape() == Shape{1, 1, 2, 2});
    CHECK(out.data()[0] == 12);
    CHECK(out.data()[1] == 16);
    CHECK(out.data()[2] == 24);
    CHECK(out.data()[3] == 28);
  }

  TEST_CASE("channel-sum bank sums input channels first") {
    const Tensor4 input(Shape{1, 2, 3, 3}, 1.0);
    KernelBank bank = KernelBank::channel_sum(1, 2, 2);
    for (double& w : bank.weights()) w = 1.0;
    const Tensor4 out = conv2d(input, bank);
    CHECK(out.shape() == Shape{1, 1, 2, 2});
    for (double v : out.data()) CHECK(v == 8);
  }

  TEST_CASE("modes agree bitwise on single-channel input") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Tensor4 input = random_tensor(Shape{3, 1, 9, 7}, seed);
      KernelBank sum = random_bank(KernelBank::channel_sum(4, 3, 2), seed + 100);
      KernelBank standard = KernelBank::standard(4, 1, 3, 2);
      std::copy(sum.weights().begin(), sum.weights().end(), standard.weights().begin());
      CHECK(conv2d(input, sum) == conv2d(input, standard));
    }
  }

  TEST_CASE("matches brute-force summation in both modes") {
    const Tensor4 input = random_tensor(Shape{2, 3, 8, 6}, 7);
    const KernelBank sum = random_bank(KernelBank::channel_sum(5, 3, 3), 8);
    const KernelBank standard = random_bank(KernelBank::standard(5, 3, 2, 3), 9);
    CHECK(oracle::max_abs_diff(conv2d(input, sum).data(), oracle::brute_conv(input, sum).data()) <
          1e-12);
    CHECK(oracle::max_abs_diff(conv2d(input, standard).data(),
                               oracle::brute_conv(input, standard).data()) < 1e-12);
  }

  TEST_CASE("linear in the input") {
    for (const bool channel_sum : {true, false}) {
      const Tensor4 x = random_tensor(Shape{2, 2, 6, 6}, 11);
      const Tensor4 y = random_tensor(Shape{2, 2, 6, 6}, 12);
      const KernelBank bank = random_bank(
          channel_sum ? KernelBank::channel_sum(3, 3, 3) : KernelBank::standard(3, 2, 3, 3), 13);
      const double a = 0.7, b = -1.3;
      Tensor4 mixed(x.shape());
      for (std::size_t i = 0; i < mixed.size(); ++i) {
        mixed.data()[i] = a * x.data()[i] + b * y.data()[i];
      }
      const Tensor4 lhs = conv2d(mixed, bank);
      const Tensor4 cx = conv2d(x, bank);
      const Tensor4 cy = conv2d(y, bank);
      for (std::size_t i = 0; i < lhs.size(); ++i) {
        const double rhs = a * cx.data()[i] + b * cy.data()[i];
        CHECK(std::abs(lhs.data()[i] - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)));
      }
    }
  }

  TEST_CASE("shape errors name the axis") {
    const Tensor4 small(Shape{1, 1, 2, 5});
    const KernelBank tall = KernelBank::standard(1, 1, 3, 1);
    CHECK_THROWS_WITH_AS(conv2d(small, tall), doctest::Contains("height"), DimensionError);
    const KernelBank wide = KernelBank::standard(1, 1, 1, 6);
    CHECK_THROWS_WITH_AS(conv2d(small, wide), doctest::Contains("width"), DimensionError);
    const KernelBank deep = KernelBank::standard(1, 3, 1, 1);
    CHECK_THROWS_WITH_AS(conv2d(small, deep), doctest::Contains("channel"), DimensionError);
  }

  TEST_CASE("banks reject empty geometry") {
    CHECK_THROWS_AS(KernelBank::channel_sum(0, 1, 1), DimensionError);
    CHECK_THROWS_AS(KernelBank::standard(1, 1, 0, 1), DimensionError);
    CHECK(KernelBank::channel_sum(4, 3, 2).depth() == 1);
    CHECK(KernelBank::standard(4, 7, 3, 2).size() == 4 * 7 * 3 * 2);
  }
}

TEST_SUITE("maxpool2") {
  TEST_CASE("2x2 window maximum") {
    const Tensor4 input(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
    const Tensor4 out = maxpool2(input);
    CHECK(out.shape() == Shape{1, 1, 1, 1});
    CHECK(out.data()[0] == 4);
  }

  TEST_CASE("constant input stays constant") {
    const Tensor4 out = maxpool2(Tensor4(Shape{2, 3, 6, 4}, 0.25));
    CHECK(out.shape() == Shape{2, 3, 3, 2});
    for (double v : out.data()) CHECK(v == 0.25);
  }

  TEST_CASE("per-channel maxima") {
    const Tensor4 input(Shape{1, 2, 2, 2}, {1, 2, 3, 4, -1, -2, -3, -4});
    const Tensor4 out = maxpool2(input);
    CHECK(out.data()[0] == 4);
    CHECK(out.data()[1] == -1);
  }

  TEST_CASE("each output is the max of its window") {
    const Tensor4 input = random_tensor(Shape{3, 4, 8, 6}, 21);
    const PoolResult pooled = maxpool2_indexed(input);
    const Shape& s = pooled.output.shape();
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t y = 0; y < s.h; ++y)
          for (std::size_t x = 0; x < s.w; ++x) {
            const double expected = std::max(
                std::max(input.at(n, c, 2 * y, 2 * x), input.at(n, c, 2 * y, 2 * x + 1)),
                std::max(input.at(n, c, 2 * y + 1, 2 * x), input.at(n, c, 2 * y + 1, 2 * x + 1)));
            CHECK(pooled.output.at(n, c, y, x) == expected);
          }
    for (std::size_t o = 0; o < pooled.argmax.size(); ++o) {
      CHECK(input.data()[pooled.argmax[o]] == pooled.output.data()[o]);
    }
  }

  TEST_CASE("ties resolve to the first position") {
    const PoolResult pooled = maxpool2_indexed(Tensor4(Shape{1, 1, 2, 2}, {5, 5, 5, 5}));
    CHECK(pooled.argmax[0] == 0);
  }

  TEST_CASE("odd extents are rejected") {
    CHECK_THROWS_WITH_AS(maxpool2(Tensor4(Shape{1, 1, 3, 2})), doctest::Contains("height"),
                         DimensionError);
    CHECK_THROWS_WITH_AS(maxpool2(Tensor4(Shape{1, 1, 2, 5})), doctest::Contains("width"),
                         DimensionError);
  }
}

TEST_SUITE("relu") {
  TEST_CASE("definition") {
    const Tensor4 out = relu(Tensor4(Shape{1, 1, 1, 3}, {-1, 0, 2}));
    CHECK(out.data()[0] == 0);
    CHECK(out.data()[1] == 0);
    CHECK(out.data()[2] == 2);
  }

  TEST_CASE("all-negative input gives zeros") {
    const Tensor4 out = relu(Tensor4(Shape{2, 2, 2, 2}, -3.0));
    for (double v : out.data()) CHECK(v == 0.0);
  }

  TEST_CASE("idempotent") {
    const Tensor4 x = random_tensor(Shape{2, 3, 4, 5}, 31);
    CHECK(relu(relu(x)) == relu(x));
  }
}

TEST_SUITE("softmax") {
  TEST_CASE("zero logits stay zero") {
    const std::vector<double> z{0, 0, 0};
    CHECK(preprocess_divisor(z) == 1.0);
    CHECK(softmax_preprocess(z) == std::vector<double>{0, 0, 0});
  }

  TEST_CASE("[2, 4, 6] against the population-std oracle") {
    const std::vector<double> logits{2, 4, 6};
    CHECK(preprocess_divisor(logits) == doctest::Approx(oracle::population_std(logits)).epsilon(1e-15));
    // Frozen from the oracle: (v - 6) / sqrt(8/3).
    const std::vector<double> expected{-2.4494897427831783, -1.2247448713915894, 0.0};
    const std::vector<double> got = softmax_preprocess(logits);
    for (std::size_t i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-14));
  }

  TEST_CASE("exactly one zero at the argmax, the rest non-positive") {
    RngStream rng(41);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> z(10);
      for (double& v : z) v = rng.uniform(-20.0, 20.0);
      const std::vector<double> p = softmax_preprocess(z);
      CHECK(p[argmax(z)] == 0.0);
      CHECK(std::count(p.begin(), p.end(), 0.0) == 1);
      for (double v : p) CHECK(v <= 0.0);
    }
  }

  TEST_CASE("probabilities sum to one and ignore the shift") {
    RngStream rng(43);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> z(10);
      for (double& v : z) v = rng.uniform(-5.0, 5.0);
      const std::vector<double> shifted = softmax_preprocess(z);
      const std::vector<double> p = softmax(shifted);
      CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
      const double divisor = preprocess_divisor(z);
      std::vector<double> scaled(z);
      for (double& v : scaled) v /= divisor;
      const std::vector<double> q = softmax(scaled);
      for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
    }
  }

  TEST_CASE("uniform logits give ln 10") {
    const Logits logits(1, 10, std::vector<double>(10, 0.0));
    const std::vector<int> labels{3};
    CHECK(softmax_cross_entropy(logits, labels) == doctest::Approx(std::log(10.0)).epsilon(1e-15));
  }

  TEST_CASE("saturated true class gives near-zero loss") {
    std::vector<double> row(10, -50.0);
    row[4] = 0.0;
    const Logits logits(1, 10, row);
    const std::vector<int> labels{4};
    CHECK(softmax_cross_entropy(logits, labels) < 1e-6);
  }

  TEST_CASE("clamped probability keeps the loss finite") {
    std::vector<double> row(10, 0.0);
    row[0] = -1e6;
    const Logits logits(1, 10, row);
    const std::vector<int> labels{0};
    CHECK(softmax_cross_entropy(logits, labels) == doctest::Approx(-std::log(1e-12)));
  }

  TEST_CASE("batch loss is the mean of per-sample losses") {
    const std::vector<double> a{0.5, -1.0, 0.0, 2.0};
    const std::vector<double> b{-0.3, 0.0, -2.5, -1.0};
    std::vector<double> both(a);
    both.insert(both.end(), b.begin(), b.end());
    const Logits logits(2, 4, both);
    const std::vector<int> labels{3, 1};
    const double expected = 0.5 * (oracle::cross_entropy(a, 3) + oracle::cross_entropy(b, 1));
    CHECK(softmax_cross_entropy(logits, labels) == doctest::Approx(expected).epsilon(1e-14));
  }

  TEST_CASE("out-of-range labels raise IndexError") {
    const Logits logits(1, 3);
    CHECK_THROWS_AS(softmax_cross_entropy(logits, std::vector<int>{3}), IndexError);
    CHECK_THROWS_AS(softmax_cross_entropy(logits, std::vector<int>{-1}), IndexError);
  }

  TEST_CASE("argmax prefers the first of equal entries") {
    CHECK(argmax(std::vector<double>{1, 3, 3, 2}) == 1);
    CHECK(argmax(std::vector<double>{0, 0, 0}) == 0);
  }
}
