#pragma once

#include <utility>
#include <vector>

#include "respore/tensor.hpp"

namespace respore {

// Parameters of one 2-D convolution: stride 1, zero padding sized to keep
// the spatial dimensions ("same"). Kernel sides must be odd so the padding
// is symmetric.
struct Conv2d {
  Tensor weights;            // (out_c, in_c, kh, kw)
  std::vector<double> bias;  // out_c

  Conv2d() = default;
  Conv2d(int out_c, int in_c, int kh, int kw);

  int out_c() const { return weights.shape().n; }
  int in_c() const { return weights.shape().c; }
  int kh() const { return weights.shape().h; }
  int kw() const { return weights.shape().w; }
};

// Per-channel batch normalization state.
struct BatchNorm {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  BatchNorm() = default;
  explicit BatchNorm(int channels)
      : gamma(channels, 1.0),
        beta(channels, 0.0),
        running_mean(channels, 0.0),
        running_var(channels, 1.0) {}

  int channels() const { return static_cast<int>(gamma.size()); }
};

enum class Mode { train, infer };

struct ConvCache {
  Tensor x;
};

struct BnCache {
  Tensor x;
  std::vector<double> mean;     // batch mean per channel
  std::vector<double> inv_std;  // 1/sqrt(var + eps) per channel
  bool train_mode = false;
};

struct ReluCache {
  Tensor x;
};

struct ConvGrads {
  Tensor x;                  // gradient w.r.t. the input
  Tensor weights;            // gradient w.r.t. the kernel
  std::vector<double> bias;  // gradient w.r.t. the bias
};

struct BnGrads {
  Tensor x;
  std::vector<double> gamma;
  std::vector<double> beta;
};

// y[n,o,i,j] = bias[o] + sum over (c,u,v) of w[o,c,u,v] * x_padded[...].
// Contributions accumulate in (c,u,v) order per output element; padding
// terms are skipped (they are exact zeros).
std::pair<Tensor, ConvCache> conv2d_forward(const Tensor& x, const Conv2d& p);

// Exact partial derivatives of conv2d_forward. Accumulation orders per
// element: grad_x over (o,u,v); grad_w and grad_b over (n,i,j).
ConvGrads conv2d_backward(const Tensor& grad_y, const ConvCache& cache,
                          const Conv2d& p);

// Train mode normalizes with batch statistics over (n,h,w) per channel
// (biased variance) and updates running stats as
// running <- (1-momentum)*running + momentum*batch. Infer mode uses the
// running stats and leaves p untouched.
std::pair<Tensor, BnCache> batchnorm_forward(const Tensor& x, BatchNorm& p,
                                             Mode mode);

// Gradient of the train-mode forward. A cache from infer mode is a usage
// error.
BnGrads batchnorm_backward(const Tensor& grad_y, const BnCache& cache,
                           const BatchNorm& p);

std::pair<Tensor, ReluCache> relu_forward(const Tensor& x);

// Subgradient at 0 is 0.
Tensor relu_backward(const Tensor& grad_y, const ReluCache& cache);

// loss = (1/N) * sum over samples of the per-sample sum of squared pixel
// errors, N = batch size. grad_pred = -(2/N)*(label - pred).
std::pair<double, Tensor> mse_loss(const Tensor& pred, const Tensor& label);

}  // namespace respore
