#include "respore/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "respore/rng.hpp"

namespace respore {

void adam_step(const std::vector<std::span<double>>& params,
               const std::vector<std::span<double>>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: parameter/gradient array count mismatch");
  }
  std::size_t total = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size()) {
      throw ShapeError("adam_step: array " + std::to_string(k) +
                       " size mismatch");
    }
    total += params[k].size();
  }
  if (state.m.empty()) {
    state.m.assign(total, 0.0);
    state.v.assign(total, 0.0);
    state.t = 0;
  }
  if (state.m.size() != total || state.v.size() != total) {
    throw ShapeError("adam_step: optimizer state size mismatch");
  }

  state.t += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  std::size_t off = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* p = params[k].data();
    const double* g = grads[k].data();
    double* m = state.m.data() + off;
    double* v = state.v.data() + off;
    const std::size_t count = params[k].size();
    for (std::size_t i = 0; i < count; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
    off += count;
  }
}

DataSplit split_dataset(std::size_t n, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw InputError("split fraction must be in [0,1]");
  }
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0x73706c6974ULL));  // "split"
  rng.shuffle(idx);
  const std::size_t train_n = static_cast<std::size_t>(fraction * n);
  DataSplit split;
  split.train.assign(idx.begin(), idx.begin() + train_n);
  split.val.assign(idx.begin() + train_n, idx.end());
  return split;
}

void save_loss_csv(const LossHistory& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open loss CSV for writing: " + path);
  out << "iteration,epoch,split,loss\n";
  for (const auto& rec : history) {
    out << rec.iteration << "," << rec.epoch << ","
        << (rec.is_val ? "val" : "train") << "," << fmt_double(rec.loss)
        << "\n";
  }
  if (!out) throw IoError("failed writing loss CSV: " + path);
}

namespace {

double validation_loss(const PatchDataset& ds, Network& net,
                       const std::vector<int>& val, int batch_size) {
  double total = 0.0;
  std::size_t done = 0;
  while (done < val.size()) {
    const std::size_t count = std::min<std::size_t>(batch_size, val.size() - done);
    auto [x, y] = materialize_batch(ds, val, done, count);
    auto [pred, caches] = forward(net, x, Mode::infer);
    // per-sample pixel sums, pooled over the whole validation set
    auto [loss, grad] = mse_loss(pred, y);
    total += loss * static_cast<double>(count);
    done += count;
  }
  return total / static_cast<double>(val.size());
}

}  // namespace

TrainOutput train(const PatchDataset& ds, Network& net, const TrainConfig& cfg,
                  const EpochHook& hook) {
  if (ds.entries.empty()) throw InputError("train: dataset is empty");
  if (cfg.batch_size < 1) throw InputError("train: batch_size must be >= 1");
  if (cfg.learning_rate < 0.0) throw InputError("train: negative learning rate");
  if (cfg.beta1 <= 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 <= 0.0 ||
      cfg.beta2 >= 1.0) {
    throw InputError("train: ADAM betas must lie in (0,1)");
  }

  DataSplit split =
      split_dataset(ds.entries.size(), cfg.split_fraction, cfg.shuffle_seed);
  if (split.train.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw InputError("train: " + std::to_string(split.train.size()) +
                     " training patches < batch size " +
                     std::to_string(cfg.batch_size));
  }

  TrainOutput out;
  out.adam.m.assign(learnable_count(net), 0.0);
  out.adam.v.assign(learnable_count(net), 0.0);
  out.adam.t = 0;

  const std::size_t iters = iterations_per_epoch(split.train.size(), cfg.batch_size);
  std::uint64_t iteration = 0;
  auto params = learnable_arrays(net);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> perm = split.train;
    Rng rng(mix_seed(cfg.shuffle_seed, 0x65706f6368ULL + epoch));  // "epoch"
    rng.shuffle(perm);
    for (std::size_t b = 0; b < iters; ++b) {
      auto [x, y] =
          materialize_batch(ds, perm, b * cfg.batch_size, cfg.batch_size);
      auto [pred, caches] = forward(net, x, Mode::train);
      auto [loss, grad_pred] = mse_loss(pred, y);
      ++iteration;
      if (!std::isfinite(loss)) {
        std::string ids;
        for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.batch_size); ++k) {
          ids += (k ? "," : "") + std::to_string(perm[b * cfg.batch_size + k]);
        }
        throw TrainingDiverged("non-finite loss " + fmt_double(loss) +
                               " at iteration " + std::to_string(iteration) +
                               " (epoch " + std::to_string(epoch) +
                               ", batch entries " + ids + ")");
      }
      Gradients grads = backward(net, grad_pred, caches);
      auto grad_spans = learnable_arrays(grads);
      adam_step(params, grad_spans, out.adam, cfg.learning_rate, cfg.beta1,
                cfg.beta2, cfg.adam_epsilon);
      out.history.push_back({iteration, epoch, false, loss});
    }
    if (!split.val.empty()) {
      const double vloss = validation_loss(ds, net, split.val, cfg.batch_size);
      if (!std::isfinite(vloss)) {
        throw TrainingDiverged("non-finite validation loss at epoch " +
                               std::to_string(epoch));
      }
      out.history.push_back({iteration, epoch, true, vloss});
    }
    if (hook) hook(epoch, net, out.adam);
  }
  return out;
}

}  // namespace respore
