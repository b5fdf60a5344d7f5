#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "respore/errors.hpp"
#include "respore/tensor.hpp"

namespace respore {

// Row-major 2-D grid of reals. Grayscale images keep values in [0, 1];
// label maps in [0, 1]; intensity maps are unbounded network output.
struct Grid2d {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Grid2d() = default;
  Grid2d(int h_, int w_, double fill = 0.0)
      : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}

  double operator()(int i, int j) const {
    return v[static_cast<std::size_t>(i) * w + j];
  }
  double& operator()(int i, int j) {
    return v[static_cast<std::size_t>(i) * w + j];
  }
  std::size_t count() const { return v.size(); }
};

using GrayImage = Grid2d;
using LabelMap = Grid2d;
using IntensityMap = Grid2d;

struct Pore {
  double row = 0.0;
  double col = 0.0;
};
using PoreSet = std::vector<Pore>;

// L(i,j) = max over pores of (1 - d/radius) for d < radius, else 0, with
// d the Euclidean distance from pixel (i,j) to the pore. The pixel nearest
// each pore is set to exactly 1.
LabelMap make_label_map(int h, int w, const PoreSet& pores,
                        double radius = 5.0);

// Overlapping patch grid for training. Offsets are (row, col) origins.
struct PatchSet {
  int size = 80;
  int stride = 10;
  int rows = 0;
  int cols = 0;
  std::vector<std::pair<int, int>> offsets;
};

PatchSet extract_training_patches(const GrayImage& img, const LabelMap& label,
                                  int size = 80, int stride = 10);

// Non-overlapping tiling for inference. The image is edge-replicated up to
// the next multiple of `size` in each dimension; pad_h/pad_w record how
// much to crop after stitching.
struct TilePlan {
  int size = 80;
  int rows = 0;
  int cols = 0;
  int orig_h = 0;
  int orig_w = 0;
  int pad_h = 0;
  int pad_w = 0;
};

TilePlan tile_for_inference(const GrayImage& img, int size = 80);

// Materializes the tiles of `plan` as a (rows*cols, 1, size, size) batch,
// row-major over the grid.
Tensor tile_batch(const GrayImage& img, const TilePlan& plan);

// Patch-level dataset over several images, materialized lazily.
struct PatchDataset {
  int patch_size = 80;
  std::vector<GrayImage> images;
  std::vector<LabelMap> labels;
  struct Entry {
    int image = 0;
    int row = 0;
    int col = 0;
  };
  std::vector<Entry> entries;
};

PatchDataset build_patch_dataset(std::vector<GrayImage> images,
                                 std::vector<LabelMap> labels, int size = 80,
                                 int stride = 10);

// Gathers entries idx[from..from+count) into aligned image/label tensors.
std::pair<Tensor, Tensor> materialize_batch(const PatchDataset& ds,
                                            const std::vector<int>& idx,
                                            std::size_t from,
                                            std::size_t count);

// Synthetic fingerprint: oriented sinusoidal ridge pattern with pores
// implanted as bright Gaussian dots centered on the dark ridge lines.
struct SynthParams {
  double ridge_period = 10.0;  // pixels between ridge lines, >= 4
  double pore_density = 8.0;   // pores per 100x100 pixel area
  double pore_radius = 3.0;    // pixels
  double noise = 0.02;         // additive Gaussian noise stddev
};

// Deterministic under (params, seed). Pore centers land on integer pixels,
// separated by at least 2*pore_radius + 2. Throws GenerationError (with
// the placed count) if the requested density cannot be met.
std::pair<GrayImage, PoreSet> synth_fingerprint(int h, int w,
                                                const SynthParams& params,
                                                std::uint64_t seed);

// Average ridge width implied by the generator: half the ridge period.
inline double synth_ridge_width(const SynthParams& p) {
  return p.ridge_period / 2.0;
}

// ---- file formats ----

// Binary portable graymap or 8-bit grayscale PNG, dispatched on content.
GrayImage load_gray(const std::string& path);
void save_pgm(const GrayImage& img, const std::string& path);

// `row,col` CSV with header; decimals allowed.
PoreSet load_pores_csv(const std::string& path);
void save_pores_csv(const PoreSet& pores, const std::string& path);

struct ManifestEntry {
  std::string image_path;
  std::string pores_path;
};

// One `image-path,pore-csv-path` pair per line; relative paths resolve
// against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::vector<ManifestEntry>& entries,
                   const std::string& path);

// Shortest round-trip decimal formatting used by every CSV writer.
std::string fmt_double(double v);

}  // namespace respore
