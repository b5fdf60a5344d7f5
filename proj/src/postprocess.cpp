#include "respore/postprocess.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

namespace respore {

IntensityMap stitch(const Tensor& patch_maps, const TilePlan& plan) {
  const Shape s = patch_maps.shape();
  if (s.n != plan.rows * plan.cols) {
    throw InputError("stitch: got " + std::to_string(s.n) + " patches, plan needs " +
                     std::to_string(plan.rows * plan.cols));
  }
  if (s.c != 1 || s.h != plan.size || s.w != plan.size) {
    throw InputError("stitch: patch shape " + s.str() +
                     " does not match plan tile size " +
                     std::to_string(plan.size));
  }
  IntensityMap out(plan.orig_h, plan.orig_w, 0.0);
  for (int gr = 0; gr < plan.rows; ++gr) {
    for (int gc = 0; gc < plan.cols; ++gc) {
      const double* patch = patch_maps.plane(gr * plan.cols + gc, 0);
      const int i_hi = std::min(plan.size, plan.orig_h - gr * plan.size);
      const int j_hi = std::min(plan.size, plan.orig_w - gc * plan.size);
      for (int i = 0; i < i_hi; ++i) {
        double* dst = &out(gr * plan.size + i, gc * plan.size);
        const double* src = patch + static_cast<std::size_t>(i) * plan.size;
        std::memcpy(dst, src, sizeof(double) * j_hi);
      }
    }
  }
  return out;
}

IntensityMap max_filter(const IntensityMap& map, int window) {
  if (window < 1 || window % 2 == 0) {
    throw InputError("max_filter window must be odd and >= 1");
  }
  const int r = (window - 1) / 2;
  const int h = map.h, w = map.w;
  // separable: horizontal pass then vertical pass, windows clipped
  IntensityMap rows(h, w, 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int lo = std::max(0, j - r);
      const int hi = std::min(w - 1, j + r);
      double m = map(i, lo);
      for (int k = lo + 1; k <= hi; ++k) m = std::max(m, map(i, k));
      rows(i, j) = m;
    }
  }
  IntensityMap out(h, w, 0.0);
  for (int i = 0; i < h; ++i) {
    const int lo = std::max(0, i - r);
    const int hi = std::min(h - 1, i + r);
    for (int j = 0; j < w; ++j) {
      double m = rows(lo, j);
      for (int k = lo + 1; k <= hi; ++k) m = std::max(m, rows(k, j));
      out(i, j) = m;
    }
  }
  return out;
}

namespace {

// Union-find merge of detections within Chebyshev distance `reach`,
// replaced by their (rounded) centroids. Chains merge transitively.
PoreSet dedupe_detections(const PoreSet& raw, int reach) {
  const std::size_t n = raw.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (std::abs(raw[a].row - raw[b].row) <= reach &&
          std::abs(raw[a].col - raw[b].col) <= reach) {
        parent[find(static_cast<int>(a))] = find(static_cast<int>(b));
      }
    }
  }
  std::vector<double> sum_r(n, 0.0), sum_c(n, 0.0);
  std::vector<int> count(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    const int root = find(static_cast<int>(a));
    sum_r[root] += raw[a].row;
    sum_c[root] += raw[a].col;
    count[root] += 1;
  }
  PoreSet out;
  for (std::size_t a = 0; a < n; ++a) {
    if (count[a] == 0) continue;
    out.push_back({static_cast<double>(std::llround(sum_r[a] / count[a])),
                   static_cast<double>(std::llround(sum_c[a] / count[a]))});
  }
  return out;
}

}  // namespace

PoreSet detect_pores(const IntensityMap& map, const DetectConfig& cfg) {
  if (cfg.window < 3 || cfg.window % 2 == 0) {
    throw InputError("detect window must be odd and >= 3");
  }
  const IntensityMap peaks = max_filter(map, cfg.window);
  PoreSet detections;
  for (int i = 0; i < map.h; ++i) {
    for (int j = 0; j < map.w; ++j) {
      if (map(i, j) == peaks(i, j) && map(i, j) > cfg.threshold) {
        detections.push_back({static_cast<double>(i), static_cast<double>(j)});
      }
    }
  }
  if (cfg.dedupe && !detections.empty()) {
    return dedupe_detections(detections, (cfg.window - 1) / 2);
  }
  return detections;
}

namespace {

constexpr char kMapMagic[8] = {'R', 'E', 'S', 'P', 'M', 'A', 'P', '1'};

void put_u32le(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

void save_map_raw(const IntensityMap& map, const std::string& path) {
  std::string buf;
  buf.reserve(16 + map.count() * 8);
  buf.append(kMapMagic, 8);
  put_u32le(buf, static_cast<std::uint32_t>(map.h));
  put_u32le(buf, static_cast<std::uint32_t>(map.w));
  for (double d : map.v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open map for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing map: " + path);
}

IntensityMap load_map_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open map: " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (data.size() < 16 || std::memcmp(data.data(), kMapMagic, 8) != 0) {
    throw IoError("not a raw intensity map: " + path);
  }
  auto get_u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[off + i])) << (8 * i);
    return v;
  };
  const std::uint32_t h = get_u32(8);
  const std::uint32_t w = get_u32(12);
  const std::size_t expect = 16 + static_cast<std::size_t>(h) * w * 8;
  if (h < 1 || w < 1 || data.size() != expect) {
    throw IoError("raw intensity map size mismatch: " + path);
  }
  IntensityMap map(static_cast<int>(h), static_cast<int>(w), 0.0);
  std::size_t off = 16;
  for (double& d : map.v) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[off + i])) << (8 * i);
    d = std::bit_cast<double>(bits);
    off += 8;
  }
  return map;
}

void save_map_pgm(const IntensityMap& map, const std::string& path) {
  double lo = map.v.empty() ? 0.0 : map.v[0];
  double hi = lo;
  for (double d : map.v) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  GrayImage img(map.h, map.w, 0.0);
  if (hi > lo) {
    for (std::size_t i = 0; i < map.count(); ++i) {
      img.v[i] = (map.v[i] - lo) / (hi - lo);
    }
  }
  save_pgm(img, path);
  std::ofstream side(path + ".scale", std::ios::trunc);
  if (!side) throw IoError("cannot write scale sidecar for: " + path);
  side << "min " << fmt_double(lo) << "\nmax " << fmt_double(hi) << "\n";
}

void save_overlay_ppm(const GrayImage& img, const PoreSet& pores,
                      const std::string& path) {
  std::vector<unsigned char> rgb(img.count() * 3);
  for (std::size_t i = 0; i < img.count(); ++i) {
    const auto g = static_cast<unsigned char>(
        std::llround(std::clamp(img.v[i], 0.0, 1.0) * 255.0));
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = g;
  }
  const double radius = 4.0;
  for (const auto& p : pores) {
    const int i_lo = std::max(0, static_cast<int>(std::floor(p.row - radius - 1)));
    const int i_hi = std::min(img.h - 1, static_cast<int>(std::ceil(p.row + radius + 1)));
    const int j_lo = std::max(0, static_cast<int>(std::floor(p.col - radius - 1)));
    const int j_hi = std::min(img.w - 1, static_cast<int>(std::ceil(p.col + radius + 1)));
    for (int i = i_lo; i <= i_hi; ++i) {
      for (int j = j_lo; j <= j_hi; ++j) {
        const double dy = i - p.row;
        const double dx = j - p.col;
        const double d = std::sqrt(dy * dy + dx * dx);
        if (std::abs(d - radius) <= 0.75) {
          const std::size_t k = (static_cast<std::size_t>(i) * img.w + j) * 3;
          rgb[k] = 0;
          rgb[k + 1] = 255;
          rgb[k + 2] = 0;
        }
      }
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open overlay for writing: " + path);
  out << "P6\n" << img.w << " " << img.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()),
            static_cast<std::streamsize>(rgb.size()));
  if (!out) throw IoError("failed writing overlay: " + path);
}

}  // namespace respore
