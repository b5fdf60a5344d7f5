#include "respore/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "respore/checkpoint.hpp"
#include "respore/data.hpp"
#include "respore/eval.hpp"
#include "respore/network.hpp"
#include "respore/postprocess.hpp"
#include "respore/trainer.hpp"

namespace respore {

namespace {

namespace fs = std::filesystem;

// Per-item outcome log written next to each command's outputs.
class RunSummary {
 public:
  explicit RunSummary(const fs::path& dir) : path_(dir / "run_summary.txt") {}

  void ok(const std::string& item) { lines_.push_back("ok " + item); }
  void fail(const std::string& item, const std::string& why) {
    lines_.push_back("fail " + item + ": " + why);
    failed_ = true;
  }
  bool any_failed() const { return failed_; }

  // returns the process exit status
  int finish() {
    std::ofstream out(path_, std::ios::trunc);
    for (const auto& line : lines_) out << line << "\n";
    out << "result " << (failed_ ? "fail" : "ok") << "\n";
    return failed_ ? 1 : 0;
  }

 private:
  fs::path path_;
  std::vector<std::string> lines_;
  bool failed_ = false;
};

std::string stem_of(const std::string& path) {
  return fs::path(path).stem().string();
}

void ensure_outdir(const std::string& outdir) {
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec || !fs::is_directory(outdir)) {
    throw IoError("cannot create output directory: " + outdir);
  }
}

void configure_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

// Manifests produced by `synth` carry the generator ridge width as a
// `# rw <value>` comment so evaluation can derive the match radius.
std::optional<double> manifest_rw(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string hash, key;
    double value;
    if (ss >> hash >> key >> value && hash == "#" && key == "rw") {
      return value;
    }
  }
  return std::nullopt;
}

std::vector<double> parse_grid_spec(const std::string& spec) {
  double lo, hi, step;
  char c1, c2;
  std::istringstream ss(spec);
  if (!(ss >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':') {
    throw InputError("grid spec must be lo:hi:step, got '" + spec + "'");
  }
  return threshold_grid(lo, hi, step);
}

// ---- synth ----

int cmd_synth(int count, int height, int width, const SynthParams& params,
              std::uint64_t seed, const std::string& outdir) {
  ensure_outdir(outdir);
  RunSummary summary(outdir);
  std::vector<ManifestEntry> entries;
  for (int k = 0; k < count; ++k) {
    char img_name[32], csv_name[40];
    std::snprintf(img_name, sizeof(img_name), "img_%04d.pgm", k);
    std::snprintf(csv_name, sizeof(csv_name), "img_%04d_pores.csv", k);
    try {
      auto [img, pores] =
          synth_fingerprint(height, width, params, mix_seed(seed, k));
      save_pgm(img, (fs::path(outdir) / img_name).string());
      save_pores_csv(pores, (fs::path(outdir) / csv_name).string());
      entries.push_back({img_name, csv_name});
      summary.ok(img_name);
    } catch (const std::exception& e) {
      summary.fail(img_name, e.what());
    }
  }
  const std::string manifest_path = (fs::path(outdir) / "manifest.txt").string();
  {
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + manifest_path);
    out << "# rw " << fmt_double(synth_ridge_width(params)) << "\n";
    for (const auto& e : entries) out << e.image_path << "," << e.pores_path << "\n";
  }
  return summary.finish();
}

// ---- train ----

struct TrainArgs {
  std::string manifest;
  std::string outdir;
  int base_width = 64;
  int patch_size = 80;
  int stride = 10;
  std::uint64_t seed = 1;
  std::string init = "paper";
  TrainConfig cfg;
};

int cmd_train(const TrainArgs& args) {
  ensure_outdir(args.outdir);
  RunSummary summary(args.outdir);

  std::vector<GrayImage> images;
  std::vector<LabelMap> labels;
  for (const auto& entry : load_manifest(args.manifest)) {
    try {
      GrayImage img = load_gray(entry.image_path);
      PoreSet pores = load_pores_csv(entry.pores_path);
      labels.push_back(make_label_map(img.h, img.w, pores));
      images.push_back(std::move(img));
      summary.ok(entry.image_path);
    } catch (const std::exception& e) {
      summary.fail(entry.image_path, e.what());
      return summary.finish();
    }
  }

  try {
    PatchDataset ds = build_patch_dataset(std::move(images), std::move(labels),
                                          args.patch_size, args.stride);
    NetworkConfig net_cfg;
    net_cfg.base_width = args.base_width;
    net_cfg.input_h = args.patch_size;
    net_cfg.input_w = args.patch_size;
    Network net = build_network(net_cfg);
    init_weights(net, args.seed,
                 args.init == "fanin" ? InitScheme::fan_in
                                      : InitScheme::gaussian_fixed);

    TrainConfig cfg = args.cfg;
    cfg.shuffle_seed = args.seed;
    const EpochHook hook = [&](int epoch, Network& n, const AdamState& adam) {
      if (cfg.checkpoint_interval > 0 && epoch % cfg.checkpoint_interval == 0) {
        char name[48];
        std::snprintf(name, sizeof(name), "checkpoint_epoch%04d.rckpt", epoch);
        save_checkpoint(n, (fs::path(args.outdir) / name).string(), &adam);
      }
    };
    TrainOutput result = train(ds, net, cfg, hook);
    save_checkpoint(net, (fs::path(args.outdir) / "checkpoint.rckpt").string(),
                    &result.adam);
    save_loss_csv(result.history,
                  (fs::path(args.outdir) / "loss.csv").string());
    summary.ok("training (" + std::to_string(ds.entries.size()) + " patches)");
  } catch (const std::exception& e) {
    summary.fail("training", e.what());
  }
  return summary.finish();
}

// ---- detect ----

struct DetectArgs {
  std::string checkpoint;
  std::string outdir;
  std::string manifest;         // either manifest or explicit images
  std::vector<std::string> images;
  DetectConfig cfg;
  bool save_maps = false;
  bool save_overlays = false;
  int infer_batch = 8;
};

int cmd_detect(const DetectArgs& args) {
  ensure_outdir(args.outdir);
  RunSummary summary(args.outdir);

  std::vector<std::string> image_paths = args.images;
  if (!args.manifest.empty()) {
    for (const auto& e : load_manifest(args.manifest)) {
      image_paths.push_back(e.image_path);
    }
  }
  if (image_paths.empty()) {
    summary.fail("detect", "no input images given");
    return summary.finish();
  }

  LoadedCheckpoint ckpt = load_checkpoint(args.checkpoint);
  Network& net = ckpt.net;

  for (const auto& path : image_paths) {
    try {
      const GrayImage img = load_gray(path);
      const TilePlan plan = tile_for_inference(img, net.cfg.input_h);
      const Tensor batch = tile_batch(img, plan);

      // bounded sub-batches keep peak activation memory flat
      Tensor maps(Shape{plan.rows * plan.cols, 1, plan.size, plan.size}, 0.0);
      const int total = plan.rows * plan.cols;
      for (int from = 0; from < total; from += args.infer_batch) {
        const int count = std::min(args.infer_batch, total - from);
        Tensor chunk(Shape{count, 1, plan.size, plan.size}, 0.0);
        const std::size_t tile_sz =
            static_cast<std::size_t>(plan.size) * plan.size;
        std::copy_n(batch.data() + from * tile_sz, count * tile_sz,
                    chunk.data_mut());
        auto [pred, caches] = forward(net, chunk, Mode::infer);
        std::copy_n(pred.data(), count * tile_sz,
                    maps.data_mut() + from * tile_sz);
      }
      const IntensityMap map = stitch(maps, plan);
      const PoreSet pores = detect_pores(map, args.cfg);

      const std::string stem = stem_of(path);
      save_pores_csv(pores,
                     (fs::path(args.outdir) / (stem + "_pores.csv")).string());
      if (args.save_maps) {
        save_map_raw(map,
                     (fs::path(args.outdir) / (stem + "_map.bin")).string());
        save_map_pgm(map,
                     (fs::path(args.outdir) / (stem + "_map.pgm")).string());
      }
      if (args.save_overlays) {
        save_overlay_ppm(
            img, pores,
            (fs::path(args.outdir) / (stem + "_overlay.ppm")).string());
      }
      summary.ok(path + " (" + std::to_string(pores.size()) + " pores)");
    } catch (const std::exception& e) {
      summary.fail(path, e.what());
    }
  }
  return summary.finish();
}

// ---- eval / sweep ----

struct EvalArgs {
  std::string truth_manifest;
  std::string detections_dir;
  std::string maps_dir;
  std::string outdir;
  double rw = 0.0;  // 0 = read from manifest
  double target_rf = -1.0;
  int window = 5;
  std::string grid_spec = "0.01:0.99:0.01";
};

double resolve_rw(const EvalArgs& args) {
  if (args.rw > 0.0) return args.rw;
  if (auto rw = manifest_rw(args.truth_manifest)) return *rw;
  throw InputError(
      "RW not given and not recorded in the manifest; pass --rw");
}

int cmd_eval(const EvalArgs& args) {
  ensure_outdir(args.outdir);
  RunSummary summary(args.outdir);
  const double rw = resolve_rw(args);
  const double radius = rw / 2.0;

  std::vector<ImageReport> reports;
  std::vector<IntensityMap> maps;
  std::vector<PoreSet> truths;
  const bool sweeping = args.target_rf >= 0.0;

  for (const auto& entry : load_manifest(args.truth_manifest)) {
    const std::string stem = stem_of(entry.image_path);
    try {
      const PoreSet truth = load_pores_csv(entry.pores_path);
      const std::string det_path =
          (fs::path(args.detections_dir) / (stem + "_pores.csv")).string();
      const PoreSet detected = load_pores_csv(det_path);
      const MatchResult m = match_pores(detected, truth, radius);
      reports.push_back({stem, compute_metrics(m)});
      if (sweeping) {
        const std::string map_path =
            (fs::path(args.maps_dir) / (stem + "_map.bin")).string();
        maps.push_back(load_map_raw(map_path));
        truths.push_back(truth);
      }
      summary.ok(stem);
    } catch (const std::exception& e) {
      summary.fail(stem, e.what());
    }
  }

  if (!summary.any_failed()) {
    save_report_csv(reports, (fs::path(args.outdir) / "report.csv").string());
    const Metrics agg = micro_average(reports);
    std::printf("RT %.2f%% RF %.2f%% (micro over %zu images)\n",
                agg.rt_defined ? agg.rt * 100.0 : 0.0, agg.rf * 100.0,
                reports.size());
    if (sweeping) {
      DetectConfig base;
      base.window = args.window;
      const auto curve = sweep_threshold(maps, truths, radius,
                                         parse_grid_spec(args.grid_spec), base);
      save_sweep_csv(curve, (fs::path(args.outdir) / "sweep.csv").string());
      const auto op = pick_operating_point(curve, args.target_rf / 100.0);
      std::ofstream op_out(fs::path(args.outdir) / "operating_point.txt",
                           std::ios::trunc);
      if (op) {
        op_out << "th " << fmt_double(op->th) << "\nRT "
               << fmt_double(op->metrics.rt * 100.0) << "\nRF "
               << fmt_double(op->metrics.rf * 100.0) << "\n";
        std::printf("operating point: th=%s RT %.2f%% RF %.2f%%\n",
                    fmt_double(op->th).c_str(), op->metrics.rt * 100.0,
                    op->metrics.rf * 100.0);
      } else {
        op_out << "none (no threshold meets RF target)\n";
        summary.fail("operating_point",
                     "no grid threshold meets the RF target");
      }
    }
  }
  return summary.finish();
}

int cmd_sweep(const EvalArgs& args) {
  ensure_outdir(args.outdir);
  RunSummary summary(args.outdir);
  const double rw = resolve_rw(args);
  const double radius = rw / 2.0;

  std::vector<IntensityMap> maps;
  std::vector<PoreSet> truths;
  for (const auto& entry : load_manifest(args.truth_manifest)) {
    const std::string stem = stem_of(entry.image_path);
    try {
      truths.push_back(load_pores_csv(entry.pores_path));
      maps.push_back(load_map_raw(
          (fs::path(args.maps_dir) / (stem + "_map.bin")).string()));
      summary.ok(stem);
    } catch (const std::exception& e) {
      summary.fail(stem, e.what());
    }
  }
  if (!summary.any_failed()) {
    DetectConfig base;
    base.window = args.window;
    const auto curve = sweep_threshold(maps, truths, radius,
                                       parse_grid_spec(args.grid_spec), base);
    save_sweep_csv(curve, (fs::path(args.outdir) / "sweep.csv").string());
    if (args.target_rf >= 0.0) {
      const auto op = pick_operating_point(curve, args.target_rf / 100.0);
      if (op) {
        std::printf("operating point: th=%s RT %.2f%% RF %.2f%%\n",
                    fmt_double(op->th).c_str(), op->metrics.rt * 100.0,
                    op->metrics.rf * 100.0);
      } else {
        summary.fail("operating_point",
                     "no grid threshold meets the RF target");
      }
    }
  }
  return summary.finish();
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Residual-network fingerprint pore detection pipeline"};
  app.require_subcommand(1);
  app.set_config("--config");

  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads for parallel sections (default: all cores; "
                 "OMP_NUM_THREADS is honored too)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  int s_count = 20, s_height = 320, s_width = 240;
  std::uint64_t s_seed = 1;
  SynthParams s_params;
  std::string s_outdir;
  synth->add_option("--count", s_count, "number of images");
  synth->add_option("--height", s_height, "image height in pixels");
  synth->add_option("--width", s_width, "image width in pixels");
  synth->add_option("--ridge-period", s_params.ridge_period,
                    "ridge period in pixels (>= 4)");
  synth->add_option("--pore-density", s_params.pore_density,
                    "pores per 100x100 pixel area");
  synth->add_option("--pore-radius", s_params.pore_radius, "pore radius, px");
  synth->add_option("--noise", s_params.noise, "additive noise stddev");
  synth->add_option("--seed", s_seed, "generator seed");
  synth->add_option("--outdir", s_outdir, "output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a network");
  TrainArgs t;
  bool t_paper = false, t_desk = false;
  train_cmd->add_option("--manifest", t.manifest, "dataset manifest")->required();
  train_cmd->add_option("--outdir", t.outdir, "output directory")->required();
  auto* opt_bw = train_cmd->add_option("--base-width", t.base_width,
                                       "channel width of the first stage");
  auto* opt_ep = train_cmd->add_option("--epochs", t.cfg.epochs, "epochs");
  auto* opt_bs = train_cmd->add_option("--batch", t.cfg.batch_size,
                                       "mini-batch size");
  auto* opt_lr = train_cmd->add_option("--lr", t.cfg.learning_rate,
                                       "base learning rate");
  train_cmd->add_option("--beta1", t.cfg.beta1, "ADAM beta1");
  train_cmd->add_option("--beta2", t.cfg.beta2, "ADAM beta2");
  train_cmd->add_option("--adam-eps", t.cfg.adam_epsilon, "ADAM epsilon");
  train_cmd->add_option("--split", t.cfg.split_fraction,
                        "training share of the patch set");
  train_cmd->add_option("--seed", t.seed, "seed for init and shuffling");
  train_cmd->add_option("--init", t.init, "paper | fanin initializer")
      ->check(CLI::IsMember({"paper", "fanin"}));
  train_cmd->add_option("--checkpoint-interval", t.cfg.checkpoint_interval,
                        "epochs between interval checkpoints (0 = off)");
  train_cmd->add_option("--patch-size", t.patch_size, "training patch size");
  train_cmd->add_option("--stride", t.stride, "training patch step size");
  train_cmd->add_flag("--paper", t_paper,
                      "published protocol: width 64, 25 epochs, batch 10, "
                      "lr 0.001, 80/10 patches");
  train_cmd->add_flag("--desk", t_desk,
                      "laptop-scale preset: width 4, 2 epochs, same protocol");

  // detect
  auto* detect = app.add_subcommand("detect", "detect pores in images");
  DetectArgs d;
  detect->add_option("--checkpoint", d.checkpoint, "trained checkpoint")->required();
  detect->add_option("--outdir", d.outdir, "output directory")->required();
  detect->add_option("--manifest", d.manifest, "dataset manifest with images");
  detect->add_option("--image", d.images, "individual image path(s)");
  detect->add_option("--th", d.cfg.threshold, "detection threshold");
  detect->add_option("--window", d.cfg.window, "max-filter window (odd)");
  detect->add_flag("--dedupe", d.cfg.dedupe,
                   "merge detections within half a window into centroids");
  detect->add_flag("--save-maps", d.save_maps,
                   "write raw + preview intensity maps");
  detect->add_flag("--save-overlays", d.save_overlays,
                   "write overlay images with detected pores circled");
  detect->add_option("--infer-batch", d.infer_batch,
                     "patches per inference batch");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score detections against truth");
  EvalArgs e;
  eval_cmd->add_option("--truth-manifest", e.truth_manifest,
                       "manifest with ground-truth pore CSVs")->required();
  eval_cmd->add_option("--detections-dir", e.detections_dir,
                       "directory with <stem>_pores.csv files")->required();
  eval_cmd->add_option("--outdir", e.outdir, "output directory")->required();
  eval_cmd->add_option("--rw", e.rw,
                       "average ridge width (default: manifest '# rw' note)");
  eval_cmd->add_option("--target-rf", e.target_rf,
                       "RF cap in percent; runs a threshold sweep");
  eval_cmd->add_option("--maps-dir", e.maps_dir,
                       "directory with <stem>_map.bin files (for the sweep)");
  eval_cmd->add_option("--window", e.window, "max-filter window for sweeps");
  eval_cmd->add_option("--grid", e.grid_spec, "sweep grid as lo:hi:step");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "threshold sweep on saved maps");
  EvalArgs sw;
  sweep_cmd->add_option("--truth-manifest", sw.truth_manifest,
                        "manifest with ground-truth pore CSVs")->required();
  sweep_cmd->add_option("--maps-dir", sw.maps_dir,
                        "directory with <stem>_map.bin files")->required();
  sweep_cmd->add_option("--outdir", sw.outdir, "output directory")->required();
  sweep_cmd->add_option("--rw", sw.rw,
                        "average ridge width (default: manifest '# rw' note)");
  sweep_cmd->add_option("--grid", sw.grid_spec, "sweep grid as lo:hi:step");
  sweep_cmd->add_option("--window", sw.window, "max-filter window");
  sweep_cmd->add_option("--target-rf", sw.target_rf,
                        "RF cap in percent; reports the operating point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  configure_threads(threads);

  try {
    if (*synth) {
      return cmd_synth(s_count, s_height, s_width, s_params, s_seed, s_outdir);
    }
    if (*train_cmd) {
      if (t_paper && t_desk) {
        std::cerr << "--paper and --desk are mutually exclusive\n";
        return 1;
      }
      if (t_paper || t_desk) {
        if (!*opt_bw) t.base_width = t_paper ? 64 : 4;
        if (!*opt_ep) t.cfg.epochs = t_paper ? 25 : 2;
        if (!*opt_bs) t.cfg.batch_size = 10;
        if (!*opt_lr) t.cfg.learning_rate = 0.001;
      }
      return cmd_train(t);
    }
    if (*detect) return cmd_detect(d);
    if (*eval_cmd) return cmd_eval(e);
    if (*sweep_cmd) return cmd_sweep(sw);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace respore
