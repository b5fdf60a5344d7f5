#include "respore/network.hpp"

#include <cmath>

#include "respore/errors.hpp"
#include "respore/rng.hpp"

namespace respore {

Network build_network(const NetworkConfig& cfg) {
  if (cfg.base_width < 1) {
    throw InputError("base_width must be >= 1, got " +
                     std::to_string(cfg.base_width));
  }
  if (cfg.input_h < 7 || cfg.input_w < 7) {
    throw InputError("input size must be at least 7x7");
  }
  Network net;
  net.cfg = cfg;
  net.conv1 = Conv2d(cfg.base_width, 1, 7, 7);
  net.bn1 = BatchNorm(cfg.base_width);

  const auto widths = cfg.stage_widths();
  int in_c = cfg.base_width;
  for (int stage = 0; stage < 4; ++stage) {
    const int out_c = widths[stage];
    for (int k = 0; k < 2; ++k) {
      ResidualBlock blk;
      blk.conv_a = Conv2d(out_c, in_c, 3, 3);
      blk.bn_a = BatchNorm(out_c);
      blk.conv_b = Conv2d(out_c, out_c, 3, 3);
      blk.bn_b = BatchNorm(out_c);
      blk.has_projection = (k == 0);  // alternating: project, then identity
      if (blk.has_projection) {
        blk.proj = Conv2d(out_c, in_c, 1, 1);
        blk.proj_bn = BatchNorm(out_c);
      }
      net.blocks.push_back(std::move(blk));
      in_c = out_c;
    }
  }
  net.conv6 = Conv2d(1, in_c, 3, 3);
  return net;
}

namespace {

void init_conv(Conv2d& c, Rng& rng, InitScheme scheme) {
  double sigma = 0.001;
  if (scheme == InitScheme::fan_in) {
    const double fan_in = static_cast<double>(c.in_c()) * c.kh() * c.kw();
    sigma = std::sqrt(2.0 / fan_in);
  }
  double* w = c.weights.data_mut();
  const std::size_t count = c.weights.count();
  for (std::size_t i = 0; i < count; ++i) w[i] = rng.normal(0.0, sigma);
  std::fill(c.bias.begin(), c.bias.end(), 0.0);
}

void reset_bn(BatchNorm& bn) {
  std::fill(bn.gamma.begin(), bn.gamma.end(), 1.0);
  std::fill(bn.beta.begin(), bn.beta.end(), 0.0);
  std::fill(bn.running_mean.begin(), bn.running_mean.end(), 0.0);
  std::fill(bn.running_var.begin(), bn.running_var.end(), 1.0);
}

}  // namespace

void init_weights(Network& net, std::uint64_t seed, InitScheme scheme) {
  net.cfg.seed = seed;
  Rng rng(mix_seed(seed, 0x77656967687473ULL));  // "weights"
  init_conv(net.conv1, rng, scheme);
  reset_bn(net.bn1);
  for (auto& blk : net.blocks) {
    init_conv(blk.conv_a, rng, scheme);
    reset_bn(blk.bn_a);
    init_conv(blk.conv_b, rng, scheme);
    reset_bn(blk.bn_b);
    if (blk.has_projection) {
      init_conv(blk.proj, rng, scheme);
      reset_bn(blk.proj_bn);
    }
  }
  init_conv(net.conv6, rng, scheme);
}

namespace {

// One residual block. `caches` may be null (infer mode).
Tensor block_forward(ResidualBlock& blk, const Tensor& x, Mode mode,
                     BlockCache* cache) {
  auto [a, conv_a_cache] = conv2d_forward(x, blk.conv_a);
  auto [an, bn_a_cache] = batchnorm_forward(a, blk.bn_a, mode);
  auto [ar, relu_a_cache] = relu_forward(an);
  auto [b, conv_b_cache] = conv2d_forward(ar, blk.conv_b);
  auto [bn, bn_b_cache] = batchnorm_forward(b, blk.bn_b, mode);

  Tensor shortcut;
  if (blk.has_projection) {
    auto [s, proj_cache] = conv2d_forward(x, blk.proj);
    auto [sn, proj_bn_cache] = batchnorm_forward(s, blk.proj_bn, mode);
    shortcut = std::move(sn);
    if (cache) {
      cache->proj = std::move(proj_cache);
      cache->proj_bn = std::move(proj_bn_cache);
    }
  } else {
    shortcut = x;
  }

  Tensor summed = add(bn, shortcut);
  auto [out, relu_out_cache] = relu_forward(summed);
  if (cache) {
    cache->conv_a = std::move(conv_a_cache);
    cache->bn_a = std::move(bn_a_cache);
    cache->relu_a = std::move(relu_a_cache);
    cache->conv_b = std::move(conv_b_cache);
    cache->bn_b = std::move(bn_b_cache);
    cache->relu_out = std::move(relu_out_cache);
  }
  return out;
}

}  // namespace

std::pair<Tensor, ForwardCaches> forward(Network& net, const Tensor& x,
                                         Mode mode) {
  const Shape xs = x.shape();
  if (xs.c != 1) {
    throw ShapeError("network input must have 1 channel, got " +
                     std::to_string(xs.c));
  }
  if (mode == Mode::train &&
      (xs.h != net.cfg.input_h || xs.w != net.cfg.input_w)) {
    throw ShapeError("train-mode input must be " +
                     std::to_string(net.cfg.input_h) + "x" +
                     std::to_string(net.cfg.input_w) + ", got " +
                     std::to_string(xs.h) + "x" + std::to_string(xs.w));
  }
  if (xs.h < 7 || xs.w < 7) {
    throw ShapeError("input spatial size must be at least 7x7");
  }

  ForwardCaches caches;
  const bool keep = (mode == Mode::train);
  if (keep) caches.blocks.resize(net.blocks.size());

  auto [c1, conv1_cache] = conv2d_forward(x, net.conv1);
  auto [c1n, bn1_cache] = batchnorm_forward(c1, net.bn1, mode);
  auto [h, relu1_cache] = relu_forward(c1n);
  if (keep) {
    caches.conv1 = std::move(conv1_cache);
    caches.bn1 = std::move(bn1_cache);
    caches.relu1 = std::move(relu1_cache);
  }
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    h = block_forward(net.blocks[i], h, mode, keep ? &caches.blocks[i] : nullptr);
  }
  auto [y, conv6_cache] = conv2d_forward(h, net.conv6);
  if (keep) {
    caches.conv6 = std::move(conv6_cache);
    caches.valid = true;
  }
  return {std::move(y), std::move(caches)};
}

namespace {

Tensor block_backward(const ResidualBlock& blk, const Tensor& grad_out,
                      const BlockCache& cache, BlockGrads& g) {
  g.has_projection = blk.has_projection;
  const Tensor g_sum = relu_backward(grad_out, cache.relu_out);

  // main path
  BnGrads bnb = batchnorm_backward(g_sum, cache.bn_b, blk.bn_b);
  g.bn_b = {std::move(bnb.gamma), std::move(bnb.beta)};
  ConvGrads cb = conv2d_backward(bnb.x, cache.conv_b, blk.conv_b);
  g.conv_b = {std::move(cb.weights), std::move(cb.bias)};
  Tensor g_relu_a = relu_backward(cb.x, cache.relu_a);
  BnGrads bna = batchnorm_backward(g_relu_a, cache.bn_a, blk.bn_a);
  g.bn_a = {std::move(bna.gamma), std::move(bna.beta)};
  ConvGrads ca = conv2d_backward(bna.x, cache.conv_a, blk.conv_a);
  g.conv_a = {std::move(ca.weights), std::move(ca.bias)};

  // shortcut path; gradients add at the junction
  if (blk.has_projection) {
    BnGrads bnp = batchnorm_backward(g_sum, cache.proj_bn, blk.proj_bn);
    g.proj_bn = {std::move(bnp.gamma), std::move(bnp.beta)};
    ConvGrads cp = conv2d_backward(bnp.x, cache.proj, blk.proj);
    g.proj = {std::move(cp.weights), std::move(cp.bias)};
    return add(ca.x, cp.x);
  }
  return add(ca.x, g_sum);
}

}  // namespace

Gradients backward(const Network& net, const Tensor& grad_y,
                   const ForwardCaches& caches) {
  if (!caches.valid) {
    throw UsageError(
        "backward: caches missing (forward was not run in train mode)");
  }
  Gradients g;
  g.blocks.resize(net.blocks.size());

  ConvGrads c6 = conv2d_backward(grad_y, caches.conv6, net.conv6);
  g.conv6 = {std::move(c6.weights), std::move(c6.bias)};
  Tensor grad = std::move(c6.x);
  for (int i = static_cast<int>(net.blocks.size()) - 1; i >= 0; --i) {
    grad = block_backward(net.blocks[i], grad, caches.blocks[i], g.blocks[i]);
  }
  Tensor g_relu1 = relu_backward(grad, caches.relu1);
  BnGrads bn1 = batchnorm_backward(g_relu1, caches.bn1, net.bn1);
  g.bn1 = {std::move(bn1.gamma), std::move(bn1.beta)};
  ConvGrads c1 = conv2d_backward(bn1.x, caches.conv1, net.conv1);
  g.conv1 = {std::move(c1.weights), std::move(c1.bias)};
  g.input = std::move(c1.x);
  return g;
}

namespace {

std::span<double> tensor_span(Tensor& t) {
  return {t.data_mut(), t.count()};
}
std::span<double> vec_span(std::vector<double>& v) {
  return {v.data(), v.size()};
}

}  // namespace

std::vector<std::span<double>> learnable_arrays(Network& net) {
  std::vector<std::span<double>> out;
  auto conv = [&](Conv2d& c) {
    out.push_back(tensor_span(c.weights));
    out.push_back(vec_span(c.bias));
  };
  auto bn = [&](BatchNorm& b) {
    out.push_back(vec_span(b.gamma));
    out.push_back(vec_span(b.beta));
  };
  conv(net.conv1);
  bn(net.bn1);
  for (auto& blk : net.blocks) {
    conv(blk.conv_a);
    bn(blk.bn_a);
    conv(blk.conv_b);
    bn(blk.bn_b);
    if (blk.has_projection) {
      conv(blk.proj);
      bn(blk.proj_bn);
    }
  }
  conv(net.conv6);
  return out;
}

std::vector<std::span<double>> learnable_arrays(Gradients& grads) {
  std::vector<std::span<double>> out;
  auto conv = [&](ConvParamGrads& c) {
    out.push_back(tensor_span(c.weights));
    out.push_back(vec_span(c.bias));
  };
  auto bn = [&](BnParamGrads& b) {
    out.push_back(vec_span(b.gamma));
    out.push_back(vec_span(b.beta));
  };
  conv(grads.conv1);
  bn(grads.bn1);
  for (auto& blk : grads.blocks) {
    conv(blk.conv_a);
    bn(blk.bn_a);
    conv(blk.conv_b);
    bn(blk.bn_b);
    if (blk.has_projection) {
      conv(blk.proj);
      bn(blk.proj_bn);
    }
  }
  conv(grads.conv6);
  return out;
}

std::vector<std::span<double>> state_arrays(Network& net) {
  std::vector<std::span<double>> out;
  auto conv = [&](Conv2d& c) {
    out.push_back(tensor_span(c.weights));
    out.push_back(vec_span(c.bias));
  };
  auto bn = [&](BatchNorm& b) {
    out.push_back(vec_span(b.gamma));
    out.push_back(vec_span(b.beta));
    out.push_back(vec_span(b.running_mean));
    out.push_back(vec_span(b.running_var));
  };
  conv(net.conv1);
  bn(net.bn1);
  for (auto& blk : net.blocks) {
    conv(blk.conv_a);
    bn(blk.bn_a);
    conv(blk.conv_b);
    bn(blk.bn_b);
    if (blk.has_projection) {
      conv(blk.proj);
      bn(blk.proj_bn);
    }
  }
  conv(net.conv6);
  return out;
}

std::size_t learnable_count(Network& net) {
  std::size_t total = 0;
  for (const auto& s : learnable_arrays(net)) total += s.size();
  return total;
}

std::size_t state_count(Network& net) {
  std::size_t total = 0;
  for (const auto& s : state_arrays(net)) total += s.size();
  return total;
}

int main_path_conv_count(const Network& net) {
  return 2 + 2 * static_cast<int>(net.blocks.size());
}

int projection_conv_count(const Network& net) {
  int count = 0;
  for (const auto& blk : net.blocks) count += blk.has_projection ? 1 : 0;
  return count;
}

}  // namespace respore
