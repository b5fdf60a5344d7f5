#pragma once

#include <string>
#include <vector>

#include "respore/data.hpp"
#include "respore/tensor.hpp"

namespace respore {

struct DetectConfig {
  double threshold = 0.4;
  int window = 5;      // odd, >= 3
  bool dedupe = false; // merge detections within Chebyshev (window-1)/2
};

// Places the (rows*cols, 1, size, size) batch of per-patch maps at the
// plan's offsets and crops the replicated padding; output has the original
// image dimensions. The tile->stitch round trip is exact.
IntensityMap stitch(const Tensor& patch_maps, const TilePlan& plan);

// output[i,j] = max of map over the window centered at (i,j), clipped at
// the borders (no padding value is injected).
IntensityMap max_filter(const IntensityMap& map, int window = 5);

// A pixel is a pore iff its value equals the max-filtered value at that
// pixel and strictly exceeds the threshold. All pixels of an equal-valued
// plateau are reported unless cfg.dedupe merges them into their centroid
// (rounded to the nearest pixel).
PoreSet detect_pores(const IntensityMap& map, const DetectConfig& cfg);

// Raw map container: 16-byte header (magic "RESPMAP1", u32 h, u32 w,
// little-endian) followed by h*w little-endian doubles, row-major.
void save_map_raw(const IntensityMap& map, const std::string& path);
IntensityMap load_map_raw(const std::string& path);

// 8-bit preview: affine rescale of [min,max] onto [0,255]; the scale is
// recorded in a `<path>.scale` text sidecar.
void save_map_pgm(const IntensityMap& map, const std::string& path);

// Input image with detected pores marked by green circles (binary PPM).
void save_overlay_ppm(const GrayImage& img, const PoreSet& pores,
                      const std::string& path);

}  // namespace respore
