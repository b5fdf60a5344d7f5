#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "respore/layers.hpp"
#include "respore/tensor.hpp"

namespace respore {

struct NetworkConfig {
  int base_width = 64;
  int input_h = 80;
  int input_w = 80;
  std::uint64_t seed = 0;

  // Channel widths of the four residual stages.
  std::array<int, 4> stage_widths() const {
    return {base_width, 2 * base_width, 4 * base_width, 8 * base_width};
  }
  bool operator==(const NetworkConfig&) const = default;
};

// Two 3x3 convolutions with batch norm; shortcut is either a 1x1
// projection conv (with its own batch norm, no activation) or the
// identity. The residual sum feeds the block's final ReLU.
struct ResidualBlock {
  Conv2d conv_a;
  BatchNorm bn_a;
  Conv2d conv_b;
  BatchNorm bn_b;
  bool has_projection = false;
  Conv2d proj;
  BatchNorm proj_bn;
};

// conv1 (7x7) -> 4 stages of 2 residual blocks at widths w,2w,4w,8w ->
// conv6 (3x3, single filter, bias, no norm/activation). Projection
// shortcuts sit on blocks 0,2,4,6; identity shortcuts on 1,3,5,7.
// 18 learnable main-path convolutions at any width; the 4 projection
// convolutions are counted separately.
struct Network {
  NetworkConfig cfg;
  Conv2d conv1;
  BatchNorm bn1;
  std::vector<ResidualBlock> blocks;
  Conv2d conv6;
};

struct BlockCache {
  ConvCache conv_a;
  BnCache bn_a;
  ReluCache relu_a;
  ConvCache conv_b;
  BnCache bn_b;
  ConvCache proj;
  BnCache proj_bn;
  ReluCache relu_out;
};

struct ForwardCaches {
  ConvCache conv1;
  BnCache bn1;
  ReluCache relu1;
  std::vector<BlockCache> blocks;
  ConvCache conv6;
  bool valid = false;  // only train-mode forwards retain caches
};

struct ConvParamGrads {
  Tensor weights;
  std::vector<double> bias;
};

struct BnParamGrads {
  std::vector<double> gamma;
  std::vector<double> beta;
};

struct BlockGrads {
  ConvParamGrads conv_a;
  BnParamGrads bn_a;
  ConvParamGrads conv_b;
  BnParamGrads bn_b;
  bool has_projection = false;
  ConvParamGrads proj;
  BnParamGrads proj_bn;
};

// Mirrors the learnable parameters of a Network, plus the gradient with
// respect to the network input.
struct Gradients {
  ConvParamGrads conv1;
  BnParamGrads bn1;
  std::vector<BlockGrads> blocks;
  ConvParamGrads conv6;
  Tensor input;
};

enum class InitScheme {
  gaussian_fixed,  // N(0, 0.001) on every conv weight
  fan_in,          // N(0, sqrt(2/fan_in)) per conv
};

Network build_network(const NetworkConfig& cfg);

// Deterministic per seed: conv weights drawn from one stream in graph
// order; biases 0, gamma 1, beta 0, running mean 0, running var 1.
void init_weights(Network& net, std::uint64_t seed,
                  InitScheme scheme = InitScheme::gaussian_fixed);

// Train mode requires the configured input size and retains caches;
// infer mode accepts any spatial size >= 7 and retains none.
std::pair<Tensor, ForwardCaches> forward(Network& net, const Tensor& x,
                                         Mode mode);

Gradients backward(const Network& net, const Tensor& grad_y,
                   const ForwardCaches& caches);

// State arrays in fixed graph order. `learnable_arrays` excludes batch-norm
// running statistics; `state_arrays` includes them (serialization order).
std::vector<std::span<double>> learnable_arrays(Network& net);
std::vector<std::span<double>> learnable_arrays(Gradients& grads);
std::vector<std::span<double>> state_arrays(Network& net);

std::size_t learnable_count(Network& net);
std::size_t state_count(Network& net);

// Number of learnable main-path convolutions (excludes projections).
int main_path_conv_count(const Network& net);
int projection_conv_count(const Network& net);

}  // namespace respore
