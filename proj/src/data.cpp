#include "respore/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace respore {

LabelMap make_label_map(int h, int w, const PoreSet& pores, double radius) {
  if (h < 1 || w < 1) throw InputError("label map dimensions must be >= 1");
  if (radius <= 0.0) throw InputError("label radius must be positive");
  for (const auto& p : pores) {
    if (p.row < 0.0 || p.row >= h || p.col < 0.0 || p.col >= w) {
      throw InputError("pore (" + fmt_double(p.row) + "," + fmt_double(p.col) +
                       ") outside " + std::to_string(h) + "x" +
                       std::to_string(w) + " image");
    }
  }
  LabelMap label(h, w, 0.0);
  for (const auto& p : pores) {
    const int i_lo = std::max(0, static_cast<int>(std::ceil(p.row - radius)));
    const int i_hi = std::min(h - 1, static_cast<int>(std::floor(p.row + radius)));
    const int j_lo = std::max(0, static_cast<int>(std::ceil(p.col - radius)));
    const int j_hi = std::min(w - 1, static_cast<int>(std::floor(p.col + radius)));
    for (int i = i_lo; i <= i_hi; ++i) {
      for (int j = j_lo; j <= j_hi; ++j) {
        const double dy = i - p.row;
        const double dx = j - p.col;
        const double d = std::sqrt(dy * dy + dx * dx);
        if (d < radius) {
          const double val = 1.0 - d / radius;
          if (val > label(i, j)) label(i, j) = val;
        }
      }
    }
  }
  // the pixel nearest a pore is marked 1 even for fractional coordinates
  for (const auto& p : pores) {
    const int i = std::clamp(static_cast<int>(std::llround(p.row)), 0, h - 1);
    const int j = std::clamp(static_cast<int>(std::llround(p.col)), 0, w - 1);
    label(i, j) = 1.0;
  }
  return label;
}

PatchSet extract_training_patches(const GrayImage& img, const LabelMap& label,
                                  int size, int stride) {
  if (img.h != label.h || img.w != label.w) {
    throw InputError("image and label dimensions differ");
  }
  if (size < 1 || stride < 1) throw InputError("size and stride must be >= 1");
  if (img.h < size || img.w < size) {
    throw InputError("image " + std::to_string(img.h) + "x" +
                     std::to_string(img.w) + " smaller than patch size " +
                     std::to_string(size));
  }
  PatchSet ps;
  ps.size = size;
  ps.stride = stride;
  ps.rows = (img.h - size) / stride + 1;
  ps.cols = (img.w - size) / stride + 1;
  ps.offsets.reserve(static_cast<std::size_t>(ps.rows) * ps.cols);
  for (int r = 0; r < ps.rows; ++r) {
    for (int c = 0; c < ps.cols; ++c) {
      ps.offsets.emplace_back(r * stride, c * stride);
    }
  }
  return ps;
}

TilePlan tile_for_inference(const GrayImage& img, int size) {
  if (size < 1) throw InputError("tile size must be >= 1");
  if (img.h < 1 || img.w < 1) throw InputError("empty image");
  TilePlan plan;
  plan.size = size;
  plan.orig_h = img.h;
  plan.orig_w = img.w;
  plan.rows = (img.h + size - 1) / size;
  plan.cols = (img.w + size - 1) / size;
  plan.pad_h = plan.rows * size - img.h;
  plan.pad_w = plan.cols * size - img.w;
  return plan;
}

Tensor tile_batch(const GrayImage& img, const TilePlan& plan) {
  if (img.h != plan.orig_h || img.w != plan.orig_w) {
    throw InputError("tile plan does not match image dimensions");
  }
  const int s = plan.size;
  Tensor batch(Shape{plan.rows * plan.cols, 1, s, s}, 0.0);
  double* out = batch.data_mut();
  std::size_t pos = 0;
  for (int gr = 0; gr < plan.rows; ++gr) {
    for (int gc = 0; gc < plan.cols; ++gc) {
      for (int i = 0; i < s; ++i) {
        const int src_i = std::min(gr * s + i, img.h - 1);  // edge replicate
        for (int j = 0; j < s; ++j) {
          const int src_j = std::min(gc * s + j, img.w - 1);
          out[pos++] = img(src_i, src_j);
        }
      }
    }
  }
  return batch;
}

PatchDataset build_patch_dataset(std::vector<GrayImage> images,
                                 std::vector<LabelMap> labels, int size,
                                 int stride) {
  if (images.size() != labels.size()) {
    throw InputError("image/label count mismatch");
  }
  PatchDataset ds;
  ds.patch_size = size;
  ds.images = std::move(images);
  ds.labels = std::move(labels);
  for (std::size_t k = 0; k < ds.images.size(); ++k) {
    const PatchSet ps = extract_training_patches(ds.images[k], ds.labels[k],
                                                 size, stride);
    for (const auto& [r, c] : ps.offsets) {
      ds.entries.push_back({static_cast<int>(k), r, c});
    }
  }
  return ds;
}

std::pair<Tensor, Tensor> materialize_batch(const PatchDataset& ds,
                                            const std::vector<int>& idx,
                                            std::size_t from,
                                            std::size_t count) {
  if (from + count > idx.size()) throw InputError("batch range out of bounds");
  if (count == 0) throw InputError("empty batch");
  const int s = ds.patch_size;
  Tensor x(Shape{static_cast<int>(count), 1, s, s}, 0.0);
  Tensor y(Shape{static_cast<int>(count), 1, s, s}, 0.0);
  double* xp = x.data_mut();
  double* yp = y.data_mut();
  std::size_t pos = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const auto& e = ds.entries[idx[from + k]];
    const GrayImage& img = ds.images[e.image];
    const LabelMap& lab = ds.labels[e.image];
    for (int i = 0; i < s; ++i) {
      const std::size_t src = static_cast<std::size_t>(e.row + i) * img.w + e.col;
      for (int j = 0; j < s; ++j) {
        xp[pos + j] = img.v[src + j];
        yp[pos + j] = lab.v[src + j];
      }
      pos += s;
    }
  }
  return {std::move(x), std::move(y)};
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace respore
