#include <doctest.h>

#include <cmath>

#include "respore/layers.hpp"
#include "respore/rng.hpp"
#include "support/oracles.hpp"

using namespace respore;
using oracle::random_tensor;
using oracle::rel_err;

namespace {

// scalar projection J = sum(R .* f(...)) used for finite-difference checks
double project(const Tensor& r, const Tensor& y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.count(); ++i) acc += r.data()[i] * y.data()[i];
  return acc;
}

Conv2d random_conv(int out_c, int in_c, int kh, int kw, Rng& rng) {
  Conv2d p(out_c, in_c, kh, kw);
  double* w = p.weights.data_mut();
  for (std::size_t i = 0; i < p.weights.count(); ++i) w[i] = rng.uniform(-1.0, 1.0);
  for (auto& b : p.bias) b = rng.uniform(-0.5, 0.5);
  return p;
}

}  // namespace

TEST_CASE("conv2d forward shapes and identity") {
  Rng rng(101);

  SUBCASE("7x7x64 kernel preserves 80x80") {
    Tensor x = random_tensor(Shape{1, 1, 80, 80}, rng);
    Conv2d p = random_conv(64, 1, 7, 7, rng);
    auto [y, cache] = conv2d_forward(x, p);
    CHECK(y.shape() == Shape{1, 64, 80, 80});
  }

  SUBCASE("1x1 identity kernel returns the input") {
    Tensor x = random_tensor(Shape{2, 1, 5, 6}, rng);
    Conv2d p(1, 1, 1, 1);
    p.weights.at_mut(0, 0, 0, 0) = 1.0;
    auto [y, cache] = conv2d_forward(x, p);
    for (std::size_t i = 0; i < x.count(); ++i) {
      CHECK(y.data()[i] == x.data()[i]);
    }
  }

  SUBCASE("hand-unrolled 3x3 all-ones convolution") {
    Tensor x(Shape{1, 1, 3, 3}, 1.0);
    Conv2d p(1, 1, 3, 3);
    for (int u = 0; u < 3; ++u)
      for (int v = 0; v < 3; ++v) p.weights.at_mut(0, 0, u, v) = 1.0;
    auto [y, cache] = conv2d_forward(x, p);
    CHECK(y.at(0, 0, 1, 1) == 9.0);
    CHECK(y.at(0, 0, 0, 0) == 4.0);
    CHECK(y.at(0, 0, 0, 2) == 4.0);
    CHECK(y.at(0, 0, 2, 0) == 4.0);
    CHECK(y.at(0, 0, 2, 2) == 4.0);
    CHECK(y.at(0, 0, 0, 1) == 6.0);
  }

  SUBCASE("channel mismatch raises") {
    Tensor x(Shape{1, 2, 4, 4}, 0.0);
    Conv2d p(3, 1, 3, 3);
    CHECK_THROWS_AS(conv2d_forward(x, p), ShapeError);
  }

  SUBCASE("even kernels rejected") {
    CHECK_THROWS_AS(Conv2d(1, 1, 2, 2), ShapeError);
    CHECK_THROWS_AS(Conv2d(1, 1, 3, 4), ShapeError);
  }
}

TEST_CASE("conv2d matches the definitional sum bit for bit") {
  Rng rng(202);
  const struct {
    Shape x;
    int out_c, k;
  } cases[] = {
      {{2, 3, 9, 11}, 4, 3}, {{1, 1, 8, 8}, 2, 7},   {{3, 2, 5, 5}, 3, 1},
      {{1, 4, 12, 7}, 2, 3}, {{2, 2, 10, 10}, 5, 7},
  };
  for (const auto& tc : cases) {
    CAPTURE(tc.x.str());
    Tensor x = random_tensor(tc.x, rng);
    Conv2d p = random_conv(tc.out_c, tc.x.c, tc.k, tc.k, rng);

    auto [y, cache] = conv2d_forward(x, p);
    const Tensor y_ref = oracle::conv2d_forward_naive(x, p);
    REQUIRE(y.shape() == y_ref.shape());
    for (std::size_t i = 0; i < y.count(); ++i) {
      REQUIRE(y.data()[i] == y_ref.data()[i]);
    }

    Tensor gy = random_tensor(y.shape(), rng);
    const ConvGrads g = conv2d_backward(gy, cache, p);
    const ConvGrads g_ref = oracle::conv2d_backward_naive(gy, x, p);
    for (std::size_t i = 0; i < g.x.count(); ++i) {
      REQUIRE(g.x.data()[i] == g_ref.x.data()[i]);
    }
    for (std::size_t i = 0; i < g.weights.count(); ++i) {
      REQUIRE(g.weights.data()[i] == g_ref.weights.data()[i]);
    }
    for (std::size_t i = 0; i < g.bias.size(); ++i) {
      REQUIRE(g.bias[i] == g_ref.bias[i]);
    }
  }
}

TEST_CASE("conv2d backward") {
  Rng rng(303);

  SUBCASE("zero upstream gradient gives zero gradients") {
    Tensor x = random_tensor(Shape{2, 2, 6, 6}, rng);
    Conv2d p = random_conv(3, 2, 3, 3, rng);
    auto [y, cache] = conv2d_forward(x, p);
    const ConvGrads g = conv2d_backward(zeros_like(y), cache, p);
    for (std::size_t i = 0; i < g.x.count(); ++i) CHECK(g.x.data()[i] == 0.0);
    for (std::size_t i = 0; i < g.weights.count(); ++i) CHECK(g.weights.data()[i] == 0.0);
    for (double b : g.bias) CHECK(b == 0.0);
  }

  SUBCASE("identity 1x1 conv passes the gradient through") {
    Tensor x = random_tensor(Shape{1, 1, 4, 4}, rng);
    Conv2d p(1, 1, 1, 1);
    p.weights.at_mut(0, 0, 0, 0) = 1.0;
    auto [y, cache] = conv2d_forward(x, p);
    Tensor gy = random_tensor(y.shape(), rng);
    const ConvGrads g = conv2d_backward(gy, cache, p);
    for (std::size_t i = 0; i < gy.count(); ++i) {
      CHECK(g.x.data()[i] == gy.data()[i]);
    }
  }

  SUBCASE("finite differences on a random 4x4 input, 3x3 kernel") {
    Tensor x = random_tensor(Shape{1, 2, 4, 4}, rng);
    Conv2d p = random_conv(2, 2, 3, 3, rng);
    Tensor r = random_tensor(Shape{1, 2, 4, 4}, rng);
    auto [y0, cache] = conv2d_forward(x, p);
    const ConvGrads g = conv2d_backward(r, cache, p);
    const double step = 1e-5;

    // weights
    for (std::size_t k = 0; k < p.weights.count(); ++k) {
      const double fd = oracle::central_diff(
          [&](double val) {
            Conv2d q = p;
            Tensor wcopy(q.weights.shape(), 0.0);
            std::copy_n(p.weights.data(), p.weights.count(), wcopy.data_mut());
            wcopy.data_mut()[k] = val;
            q.weights = wcopy;
            auto [y, c2] = conv2d_forward(x, q);
            return project(r, y);
          },
          p.weights.data()[k], step);
      CHECK(rel_err(g.weights.data()[k], fd, 1e-8) < 1e-6);
    }
    // bias
    for (std::size_t k = 0; k < p.bias.size(); ++k) {
      const double fd = oracle::central_diff(
          [&](double val) {
            Conv2d q = p;
            q.bias[k] = val;
            auto [y, c2] = conv2d_forward(x, q);
            return project(r, y);
          },
          p.bias[k], step);
      CHECK(rel_err(g.bias[k], fd, 1e-8) < 1e-6);
    }
    // input
    for (std::size_t k = 0; k < x.count(); ++k) {
      const double fd = oracle::central_diff(
          [&](double val) {
            Tensor xc(x.shape(), 0.0);
            std::copy_n(x.data(), x.count(), xc.data_mut());
            xc.data_mut()[k] = val;
            auto [y, c2] = conv2d_forward(xc, p);
            return project(r, y);
          },
          x.data()[k], step);
      CHECK(rel_err(g.x.data()[k], fd, 1e-8) < 1e-6);
    }
  }

  SUBCASE("grad_y shape mismatch raises") {
    Tensor x = random_tensor(Shape{1, 1, 4, 4}, rng);
    Conv2d p = random_conv(2, 1, 3, 3, rng);
    auto [y, cache] = conv2d_forward(x, p);
    Tensor bad(Shape{1, 2, 5, 4}, 0.0);
    CHECK_THROWS_AS(conv2d_backward(bad, cache, p), ShapeError);
  }
}

TEST_CASE("batchnorm forward") {
  Rng rng(404);

  SUBCASE("train mode normalizes per channel") {
    Tensor x = random_tensor(Shape{4, 3, 5, 5}, rng, -2.0, 3.0);
    BatchNorm p(3);
    auto [y, cache] = batchnorm_forward(x, p, Mode::train);
    const double m = 4 * 5 * 5;
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0, var = 0.0;
      for (int n = 0; n < 4; ++n)
        for (int i = 0; i < 5; ++i)
          for (int j = 0; j < 5; ++j) mean += y.at(n, c, i, j);
      mean /= m;
      for (int n = 0; n < 4; ++n)
        for (int i = 0; i < 5; ++i)
          for (int j = 0; j < 5; ++j) {
            const double d = y.at(n, c, i, j) - mean;
            var += d * d;
          }
      var /= m;
      CHECK(std::abs(mean) < 1e-10);
      CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // epsilon shrinks it
    }
  }

  SUBCASE("constant input maps to beta") {
    Tensor x(Shape{2, 2, 3, 3}, 42.0);
    BatchNorm p(2);
    p.beta = {0.5, -1.5};
    auto [y, cache] = batchnorm_forward(x, p, Mode::train);
    for (int n = 0; n < 2; ++n)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          CHECK(y.at(n, 0, i, j) == 0.5);
          CHECK(y.at(n, 1, i, j) == -1.5);
        }
  }

  SUBCASE("infer mode with identity statistics is near-identity") {
    Tensor x = random_tensor(Shape{1, 2, 4, 4}, rng);
    BatchNorm p(2);
    auto [y, cache] = batchnorm_forward(x, p, Mode::infer);
    for (std::size_t i = 0; i < x.count(); ++i) {
      CHECK(rel_err(y.data()[i], x.data()[i], 1e-6) < 1e-4);
    }
  }

  SUBCASE("running statistics update") {
    Tensor x = random_tensor(Shape{2, 1, 4, 4}, rng, 1.0, 3.0);
    BatchNorm p(1);
    double mean = 0.0;
    for (std::size_t i = 0; i < x.count(); ++i) mean += x.data()[i];
    mean /= static_cast<double>(x.count());
    double var = 0.0;
    for (std::size_t i = 0; i < x.count(); ++i) {
      const double d = x.data()[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(x.count());

    auto [y, cache] = batchnorm_forward(x, p, Mode::train);
    CHECK(p.running_mean[0] == doctest::Approx(0.1 * mean).epsilon(1e-12));
    CHECK(p.running_var[0] == doctest::Approx(0.9 + 0.1 * var).epsilon(1e-12));

    // infer mode must not touch them
    const double rm = p.running_mean[0], rv = p.running_var[0];
    auto [y2, cache2] = batchnorm_forward(x, p, Mode::infer);
    CHECK(p.running_mean[0] == rm);
    CHECK(p.running_var[0] == rv);
  }

  SUBCASE("single-element channel slices are legal") {
    Tensor x(Shape{1, 2, 1, 1}, 3.0);
    BatchNorm p(2);
    auto [y, cache] = batchnorm_forward(x, p, Mode::train);
    CHECK(y.at(0, 0, 0, 0) == 0.0);  // zero variance resolved by epsilon
  }

  SUBCASE("channel mismatch raises") {
    Tensor x(Shape{1, 3, 2, 2}, 0.0);
    BatchNorm p(2);
    CHECK_THROWS_AS(batchnorm_forward(x, p, Mode::train), ShapeError);
  }
}

TEST_CASE("batchnorm backward") {
  Rng rng(505);

  SUBCASE("zero upstream gradient") {
    Tensor x = random_tensor(Shape{2, 2, 3, 3}, rng);
    BatchNorm p(2);
    auto [y, cache] = batchnorm_forward(x, p, Mode::train);
    const BnGrads g = batchnorm_backward(zeros_like(y), cache, p);
    for (std::size_t i = 0; i < g.x.count(); ++i) CHECK(g.x.data()[i] == 0.0);
    for (double v : g.gamma) CHECK(v == 0.0);
    for (double v : g.beta) CHECK(v == 0.0);
  }

  SUBCASE("grad_beta is the per-channel sum of grad_y") {
    Tensor x = random_tensor(Shape{2, 3, 4, 4}, rng);
    BatchNorm p(3);
    auto [y, cache] = batchnorm_forward(x, p, Mode::train);
    Tensor gy = random_tensor(y.shape(), rng);
    const BnGrads g = batchnorm_backward(gy, cache, p);
    for (int c = 0; c < 3; ++c) {
      double sum = 0.0;
      for (int n = 0; n < 2; ++n)
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) sum += gy.at(n, c, i, j);
      CHECK(g.beta[c] == doctest::Approx(sum).epsilon(1e-12));
    }
  }

  SUBCASE("finite differences on a random (2,3,4,4) input") {
    Tensor x = random_tensor(Shape{2, 3, 4, 4}, rng, -1.5, 1.5);
    BatchNorm base(3);
    for (auto& g : base.gamma) g = rng.uniform(0.5, 1.5);
    for (auto& b : base.beta) b = rng.uniform(-0.5, 0.5);
    Tensor r = random_tensor(x.shape(), rng);
    const double step = 1e-5;

    BatchNorm p0 = base;
    auto [y0, cache] = batchnorm_forward(x, p0, Mode::train);
    const BnGrads g = batchnorm_backward(r, cache, base);

    auto loss_with_x = [&](const Tensor& xv) {
      BatchNorm p = base;
      auto [y, c2] = batchnorm_forward(xv, p, Mode::train);
      return project(r, y);
    };
    for (std::size_t k = 0; k < x.count(); ++k) {
      const double fd = oracle::central_diff(
          [&](double val) {
            Tensor xc(x.shape(), 0.0);
            std::copy_n(x.data(), x.count(), xc.data_mut());
            xc.data_mut()[k] = val;
            return loss_with_x(xc);
          },
          x.data()[k], step);
      CHECK(rel_err(g.x.data()[k], fd, 1e-8) < 1e-5);
    }
    for (int c = 0; c < 3; ++c) {
      const double fd_gamma = oracle::central_diff(
          [&](double val) {
            BatchNorm p = base;
            p.gamma[c] = val;
            auto [y, c2] = batchnorm_forward(x, p, Mode::train);
            return project(r, y);
          },
          base.gamma[c], step);
      CHECK(rel_err(g.gamma[c], fd_gamma, 1e-8) < 1e-5);
      const double fd_beta = oracle::central_diff(
          [&](double val) {
            BatchNorm p = base;
            p.beta[c] = val;
            auto [y, c2] = batchnorm_forward(x, p, Mode::train);
            return project(r, y);
          },
          base.beta[c], step);
      CHECK(rel_err(g.beta[c], fd_beta, 1e-8) < 1e-5);
    }
  }

  SUBCASE("infer-mode cache is rejected") {
    Tensor x = random_tensor(Shape{1, 1, 3, 3}, rng);
    BatchNorm p(1);
    auto [y, cache] = batchnorm_forward(x, p, Mode::infer);
    CHECK_THROWS_AS(batchnorm_backward(y, cache, p), UsageError);
  }
}

TEST_CASE("relu") {
  SUBCASE("definition") {
    Tensor x(Shape{1, 1, 1, 3}, 0.0);
    x.at_mut(0, 0, 0, 0) = -1.0;
    x.at_mut(0, 0, 0, 1) = 0.0;
    x.at_mut(0, 0, 0, 2) = 2.0;
    auto [y, cache] = relu_forward(x);
    CHECK(y.at(0, 0, 0, 0) == 0.0);
    CHECK(y.at(0, 0, 0, 1) == 0.0);
    CHECK(y.at(0, 0, 0, 2) == 2.0);

    Tensor gy(Shape{1, 1, 1, 3}, 1.0);
    const Tensor gx = relu_backward(gy, cache);
    CHECK(gx.at(0, 0, 0, 0) == 0.0);
    CHECK(gx.at(0, 0, 0, 1) == 0.0);  // subgradient at 0 is 0
    CHECK(gx.at(0, 0, 0, 2) == 1.0);
  }

  SUBCASE("idempotence") {
    Rng rng(606);
    Tensor x = random_tensor(Shape{2, 3, 4, 4}, rng);
    auto [y1, c1] = relu_forward(x);
    auto [y2, c2] = relu_forward(y1);
    for (std::size_t i = 0; i < x.count(); ++i) {
      CHECK(y1.data()[i] == y2.data()[i]);
    }
  }

  SUBCASE("finite differences away from kinks") {
    Rng rng(707);
    Tensor x = random_tensor(Shape{1, 2, 5, 5}, rng);
    Tensor r = random_tensor(x.shape(), rng);
    auto [y, cache] = relu_forward(x);
    const Tensor gx = relu_backward(r, cache);
    const double step = 1e-5;
    for (std::size_t k = 0; k < x.count(); ++k) {
      if (std::abs(x.data()[k]) <= 1e-3) continue;
      const double fd = oracle::central_diff(
          [&](double val) {
            Tensor xc(x.shape(), 0.0);
            std::copy_n(x.data(), x.count(), xc.data_mut());
            xc.data_mut()[k] = val;
            auto [yv, c2] = relu_forward(xc);
            return project(r, yv);
          },
          x.data()[k], step);
      CHECK(rel_err(gx.data()[k], fd, 1e-8) < 1e-6);
    }
  }
}

TEST_CASE("mse loss") {
  Rng rng(808);

  SUBCASE("perfect fit") {
    Tensor x = random_tensor(Shape{3, 1, 4, 4}, rng);
    auto [loss, grad] = mse_loss(x, x);
    CHECK(loss == 0.0);
    for (std::size_t i = 0; i < grad.count(); ++i) CHECK(grad.data()[i] == 0.0);
  }

  SUBCASE("hand arithmetic, batch of one") {
    Tensor pred(Shape{1, 1, 1, 2}, 0.0);
    Tensor label(Shape{1, 1, 1, 2}, 1.0);
    auto [loss, grad] = mse_loss(pred, label);
    CHECK(loss == 2.0);  // (0-1)^2 + (0-1)^2, N = 1
    CHECK(grad.at(0, 0, 0, 0) == -2.0);
    CHECK(grad.at(0, 0, 0, 1) == -2.0);
  }

  SUBCASE("gradient matches finite differences") {
    Tensor pred = random_tensor(Shape{2, 1, 3, 3}, rng);
    Tensor label = random_tensor(pred.shape(), rng);
    auto [loss, grad] = mse_loss(pred, label);
    const double step = 1e-5;
    for (std::size_t k = 0; k < pred.count(); ++k) {
      const double fd = oracle::central_diff(
          [&](double val) {
            Tensor pc(pred.shape(), 0.0);
            std::copy_n(pred.data(), pred.count(), pc.data_mut());
            pc.data_mut()[k] = val;
            return mse_loss(pc, label).first;
          },
          pred.data()[k], step);
      CHECK(rel_err(grad.data()[k], fd, 1e-8) < 1e-7);
    }
  }

  SUBCASE("shape mismatch raises") {
    Tensor a(Shape{1, 1, 2, 2}, 0.0);
    Tensor b(Shape{1, 1, 2, 3}, 0.0);
    CHECK_THROWS_AS(mse_loss(a, b), ShapeError);
  }
}

TEST_CASE("forward kernels preserve spatial size") {
  Rng rng(909);
  Tensor x = random_tensor(Shape{2, 3, 13, 9}, rng);
  Conv2d conv = random_conv(4, 3, 3, 3, rng);
  auto [yc, cc] = conv2d_forward(x, conv);
  CHECK(yc.shape().h == 13);
  CHECK(yc.shape().w == 9);
  BatchNorm bn(3);
  auto [yb, cb] = batchnorm_forward(x, bn, Mode::train);
  CHECK(yb.shape() == x.shape());
  auto [yr, cr] = relu_forward(x);
  CHECK(yr.shape() == x.shape());
}
