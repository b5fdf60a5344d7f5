#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "respore/checkpoint.hpp"
#include "respore/data.hpp"
#include "respore/network.hpp"

namespace respore {

struct TrainConfig {
  int epochs = 25;
  int batch_size = 10;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double split_fraction = 0.8;  // train share of the patch set
  std::uint64_t shuffle_seed = 1;
  int checkpoint_interval = 0;  // epochs between interval checkpoints, 0 = off
};

// One bias-corrected ADAM update across aligned parameter/gradient arrays.
// Increments state.t once per call.
void adam_step(const std::vector<std::span<double>>& params,
               const std::vector<std::span<double>>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps);

// Patch-level split: indices shuffled once under `seed`, first
// floor(fraction*n) are training. Disjoint by construction.
struct DataSplit {
  std::vector<int> train;
  std::vector<int> val;
};
DataSplit split_dataset(std::size_t n, double fraction, std::uint64_t seed);

inline std::size_t iterations_per_epoch(std::size_t train_count, int batch) {
  return train_count / batch;  // incomplete final mini-batch is dropped
}

struct LossRecord {
  std::uint64_t iteration = 0;
  int epoch = 0;
  bool is_val = false;
  double loss = 0.0;
};
using LossHistory = std::vector<LossRecord>;

// `iteration,epoch,split,loss` with split in {train, val}.
void save_loss_csv(const LossHistory& history, const std::string& path);

using EpochHook =
    std::function<void(int epoch, Network& net, const AdamState& adam)>;

struct TrainOutput {
  LossHistory history;
  AdamState adam;
};

// Mini-batch training: per-epoch shuffled batches, forward(train), MSE
// loss, backward, ADAM step. Deterministic under fixed seeds. Aborts with
// TrainingDiverged on a non-finite loss. Validation loss (infer mode,
// running batch-norm statistics) is recorded once per epoch.
TrainOutput train(const PatchDataset& ds, Network& net, const TrainConfig& cfg,
                  const EpochHook& hook = {});

}  // namespace respore
