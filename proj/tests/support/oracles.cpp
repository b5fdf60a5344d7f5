#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

using respore::Conv2d;
using respore::ConvGrads;
using respore::IntensityMap;
using respore::LabelMap;
using respore::PoreSet;
using respore::Rng;
using respore::Shape;
using respore::Tensor;

Tensor conv2d_forward_naive(const Tensor& x, const Conv2d& p) {
  const Shape xs = x.shape();
  const int n = xs.n, in_c = xs.c, h = xs.h, w = xs.w;
  const int out_c = p.out_c(), kh = p.kh(), kw = p.kw();
  const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  Tensor y(Shape{n, out_c, h, w}, 0.0);
  for (int s = 0; s < n; ++s) {
    for (int o = 0; o < out_c; ++o) {
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          double acc = p.bias[o];
          for (int c = 0; c < in_c; ++c) {
            for (int u = 0; u < kh; ++u) {
              for (int v = 0; v < kw; ++v) {
                const int r = i + u - ph;
                const int q = j + v - pw;
                if (r < 0 || r >= h || q < 0 || q >= w) continue;
                acc += p.weights(o, c, u, v) * x(s, c, r, q);
              }
            }
          }
          y.at_mut(s, o, i, j) = acc;
        }
      }
    }
  }
  return y;
}

ConvGrads conv2d_backward_naive(const Tensor& grad_y, const Tensor& x,
                                const Conv2d& p) {
  const Shape xs = x.shape();
  const int n = xs.n, in_c = xs.c, h = xs.h, w = xs.w;
  const int out_c = p.out_c(), kh = p.kh(), kw = p.kw();
  const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;

  ConvGrads g{Tensor(xs, 0.0), Tensor(p.weights.shape(), 0.0),
              std::vector<double>(out_c, 0.0)};

  for (int o = 0; o < out_c; ++o) {
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) acc += grad_y(s, o, i, j);
      }
    }
    g.bias[o] = acc;
  }

  for (int o = 0; o < out_c; ++o) {
    for (int c = 0; c < in_c; ++c) {
      for (int u = 0; u < kh; ++u) {
        for (int v = 0; v < kw; ++v) {
          double acc = 0.0;
          for (int s = 0; s < n; ++s) {
            for (int i = 0; i < h; ++i) {
              const int r = i + u - ph;
              if (r < 0 || r >= h) continue;
              for (int j = 0; j < w; ++j) {
                const int q = j + v - pw;
                if (q < 0 || q >= w) continue;
                acc += grad_y(s, o, i, j) * x(s, c, r, q);
              }
            }
          }
          g.weights.at_mut(o, c, u, v) = acc;
        }
      }
    }
  }

  for (int s = 0; s < n; ++s) {
    for (int c = 0; c < in_c; ++c) {
      for (int pp = 0; pp < h; ++pp) {
        for (int q = 0; q < w; ++q) {
          double acc = 0.0;
          for (int o = 0; o < out_c; ++o) {
            for (int u = 0; u < kh; ++u) {
              for (int v = 0; v < kw; ++v) {
                const int i = pp - u + ph;
                const int j = q - v + pw;
                if (i < 0 || i >= h || j < 0 || j >= w) continue;
                acc += p.weights(o, c, u, v) * grad_y(s, o, i, j);
              }
            }
          }
          g.x.at_mut(s, c, pp, q) = acc;
        }
      }
    }
  }
  return g;
}

IntensityMap max_filter_naive(const IntensityMap& map, int window) {
  const int r = (window - 1) / 2;
  IntensityMap out(map.h, map.w, 0.0);
  for (int i = 0; i < map.h; ++i) {
    for (int j = 0; j < map.w; ++j) {
      double m = map(i, j);
      for (int di = -r; di <= r; ++di) {
        for (int dj = -r; dj <= r; ++dj) {
          const int a = i + di, b = j + dj;
          if (a < 0 || a >= map.h || b < 0 || b >= map.w) continue;
          m = std::max(m, map(a, b));
        }
      }
      out(i, j) = m;
    }
  }
  return out;
}

PoreSet detect_pores_naive(const IntensityMap& map, double threshold,
                           int window) {
  const IntensityMap peaks = max_filter_naive(map, window);
  PoreSet out;
  for (int i = 0; i < map.h; ++i) {
    for (int j = 0; j < map.w; ++j) {
      if (map(i, j) == peaks(i, j) && map(i, j) > threshold) {
        out.push_back({static_cast<double>(i), static_cast<double>(j)});
      }
    }
  }
  return out;
}

LabelMap label_map_naive(int h, int w, const PoreSet& pores, double radius) {
  LabelMap label(h, w, 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double best = 0.0;
      for (const auto& p : pores) {
        const double dy = i - p.row;
        const double dx = j - p.col;
        const double d = std::sqrt(dy * dy + dx * dx);
        if (d < radius) best = std::max(best, 1.0 - d / radius);
      }
      label(i, j) = best;
    }
  }
  for (const auto& p : pores) {
    const int i = std::clamp(static_cast<int>(std::llround(p.row)), 0, h - 1);
    const int j = std::clamp(static_cast<int>(std::llround(p.col)), 0, w - 1);
    label(i, j) = 1.0;
  }
  return label;
}

double central_diff(const std::function<double(double)>& f, double x,
                    double step) {
  return (f(x + step) - f(x - step)) / (2.0 * step);
}

double rel_err(double a, double b, double floor) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

Tensor random_tensor(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(shape, 0.0);
  double* p = t.data_mut();
  for (std::size_t i = 0; i < t.count(); ++i) p[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace oracle
