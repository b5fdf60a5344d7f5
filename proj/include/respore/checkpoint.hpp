#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "respore/network.hpp"

namespace respore {

// First/second ADAM moments in learnable graph order, plus the timestep.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

// Tag recorded in checkpoints naming the loss convention the weights were
// trained under: per-sample sum of squared pixel errors, averaged over the
// mini-batch.
inline constexpr std::uint8_t kLossConventionSampleSumBatchMean = 1;

struct LoadedCheckpoint {
  Network net;
  std::optional<AdamState> optimizer;
  std::uint8_t loss_convention = kLossConventionSampleSumBatchMean;
};

// Binary container, little-endian doubles, fixed graph order. Layout is
// documented in docs/formats.md. save -> load -> save is byte-identical.
void save_checkpoint(Network& net, const std::string& path,
                     const AdamState* optimizer = nullptr);

LoadedCheckpoint load_checkpoint(const std::string& path);

// As above, but rejects checkpoints whose configuration differs from
// `expected` with a WidthMismatchError.
LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const NetworkConfig& expected);

}  // namespace respore
