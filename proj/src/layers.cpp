#include "respore/layers.hpp"

#include <algorithm>
#include <cmath>

namespace respore {

namespace {

int clamp_lo(int v, int lo) { return v < lo ? lo : v; }
int clamp_hi(int v, int hi) { return v > hi ? hi : v; }

// grad_w accumulation for one (o, c) pair, kernel size fixed at compile
// time. Requires w >= KW. Keeps kh*kw accumulator chains live across the
// j sweep; per kernel element the contribution order is (n, i, j)
// ascending, matching the definitional sum.
template <int KH, int KW>
void conv_grad_w_plane(const double* gy_base, const double* x_base, int n,
                       int h, int w, int gy_stride, int x_stride,
                       double* acc) {
  const int ph = (KH - 1) / 2;
  const int pw = (KW - 1) / 2;
  const int j_int_lo = pw;
  const int j_int_hi = w - KW + pw;  // inclusive
  for (int s = 0; s < n; ++s) {
    const double* gy_plane = gy_base + static_cast<std::size_t>(s) * gy_stride;
    const double* x_plane = x_base + static_cast<std::size_t>(s) * x_stride;
    for (int i = 0; i < h; ++i) {
      const double* gy_row = gy_plane + static_cast<std::size_t>(i) * w;
      const double* x_rows[KH];
      bool u_valid[KH];
      for (int u = 0; u < KH; ++u) {
        const int r = i + u - ph;
        u_valid[u] = (r >= 0 && r < h);
        x_rows[u] = u_valid[u] ? x_plane + static_cast<std::size_t>(r) * w
                               : nullptr;
      }
      // left edge columns (w >= KW, so no upper v clamp needed here)
      for (int j = 0; j < j_int_lo; ++j) {
        const double g = gy_row[j];
        for (int u = 0; u < KH; ++u) {
          if (!u_valid[u]) continue;
          for (int v = pw - j; v < KW; ++v) {
            acc[u * KW + v] += g * x_rows[u][j + v - pw];
          }
        }
      }
      // interior: all (u,v) offsets hit valid columns
      for (int j = j_int_lo; j <= j_int_hi; ++j) {
        const double g = gy_row[j];
        for (int u = 0; u < KH; ++u) {
          if (!u_valid[u]) continue;
          const double* xr = x_rows[u] + j - pw;
          for (int v = 0; v < KW; ++v) acc[u * KW + v] += g * xr[v];
        }
      }
      // right edge columns
      for (int j = j_int_hi + 1; j < w; ++j) {
        const double g = gy_row[j];
        for (int u = 0; u < KH; ++u) {
          if (!u_valid[u]) continue;
          const int v_hi = w - 1 + pw - j;  // < KW here
          for (int v = 0; v <= v_hi; ++v) {
            acc[u * KW + v] += g * x_rows[u][j + v - pw];
          }
        }
      }
    }
  }
}

// Runtime-size fallback, same accumulation order.
void conv_grad_w_plane_generic(const double* gy_base, const double* x_base,
                               int n, int h, int w, int kh, int kw,
                               int gy_stride, int x_stride, double* acc) {
  const int ph = (kh - 1) / 2;
  const int pw = (kw - 1) / 2;
  for (int s = 0; s < n; ++s) {
    const double* gy_plane = gy_base + static_cast<std::size_t>(s) * gy_stride;
    const double* x_plane = x_base + static_cast<std::size_t>(s) * x_stride;
    for (int i = 0; i < h; ++i) {
      const double* gy_row = gy_plane + static_cast<std::size_t>(i) * w;
      for (int j = 0; j < w; ++j) {
        const double g = gy_row[j];
        for (int u = 0; u < kh; ++u) {
          const int r = i + u - ph;
          if (r < 0 || r >= h) continue;
          const double* x_row = x_plane + static_cast<std::size_t>(r) * w;
          const int v_lo = clamp_lo(pw - j, 0);
          const int v_hi = clamp_hi(w - 1 + pw - j, kw - 1);
          for (int v = v_lo; v <= v_hi; ++v) {
            acc[u * kw + v] += g * x_row[j + v - pw];
          }
        }
      }
    }
  }
}

}  // namespace

Conv2d::Conv2d(int out_c, int in_c, int kh, int kw)
    : weights(Shape{out_c, in_c, kh, kw}, 0.0), bias(out_c, 0.0) {
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ShapeError("conv kernel sides must be odd for same padding, got " +
                     std::to_string(kh) + "x" + std::to_string(kw));
  }
}

std::pair<Tensor, ConvCache> conv2d_forward(const Tensor& x, const Conv2d& p) {
  const Shape xs = x.shape();
  if (xs.c != p.in_c()) {
    throw ShapeError("conv2d_forward: input has " + std::to_string(xs.c) +
                     " channels, kernel expects " + std::to_string(p.in_c()));
  }
  const int n = xs.n, in_c = xs.c, h = xs.h, w = xs.w;
  const int out_c = p.out_c(), kh = p.kh(), kw = p.kw();
  const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;

  Tensor y(Shape{n, out_c, h, w}, 0.0);
  const std::size_t plane = static_cast<std::size_t>(h) * w;

#pragma omp parallel for collapse(2) schedule(static)
  for (int s = 0; s < n; ++s) {
    for (int o = 0; o < out_c; ++o) {
      double* y_plane = y.plane_mut(s, o);
      const double b = p.bias[o];
      for (std::size_t t = 0; t < plane; ++t) y_plane[t] = b;
      for (int c = 0; c < in_c; ++c) {
        const double* x_plane = x.plane(s, c);
        const double* w_plane = p.weights.plane(o, c);
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) {
            const double wv = w_plane[u * kw + v];
            const int i_lo = clamp_lo(ph - u, 0);
            const int i_hi = clamp_hi(h - 1 + ph - u, h - 1);
            const int j_lo = clamp_lo(pw - v, 0);
            const int j_hi = clamp_hi(w - 1 + pw - v, w - 1);
            for (int i = i_lo; i <= i_hi; ++i) {
              double* y_row = y_plane + static_cast<std::size_t>(i) * w;
              const double* x_row =
                  x_plane + static_cast<std::size_t>(i + u - ph) * w + (v - pw);
              for (int j = j_lo; j <= j_hi; ++j) y_row[j] += wv * x_row[j];
            }
          }
        }
      }
    }
  }
  return {std::move(y), ConvCache{x}};
}

ConvGrads conv2d_backward(const Tensor& grad_y, const ConvCache& cache,
                          const Conv2d& p) {
  const Tensor& x = cache.x;
  const Shape xs = x.shape();
  const Shape gs = grad_y.shape();
  if (gs.n != xs.n || gs.c != p.out_c() || gs.h != xs.h || gs.w != xs.w) {
    throw ShapeError("conv2d_backward: grad_y shape " + gs.str() +
                     " does not match forward output (" +
                     std::to_string(xs.n) + "," + std::to_string(p.out_c()) +
                     "," + std::to_string(xs.h) + "," + std::to_string(xs.w) +
                     ")");
  }
  const int n = xs.n, in_c = xs.c, h = xs.h, w = xs.w;
  const int out_c = p.out_c(), kh = p.kh(), kw = p.kw();
  const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  ConvGrads g{Tensor(xs, 0.0), Tensor(p.weights.shape(), 0.0),
              std::vector<double>(out_c, 0.0)};

  // grad_b[o] = sum of grad_y over (n, i, j)
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out_c; ++o) {
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
      const double* gy_plane = grad_y.plane(s, o);
      for (std::size_t t = 0; t < plane; ++t) acc += gy_plane[t];
    }
    g.bias[o] = acc;
  }

  // grad_w[o,c,u,v] = sum over (n, i, j) of gy[n,o,i,j] * x_pad[n,c,i+u,j+v]
  const int gy_stride = static_cast<int>(plane) * out_c;
  const int x_stride = static_cast<int>(plane) * in_c;
#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < out_c; ++o) {
    for (int c = 0; c < in_c; ++c) {
      double* acc = g.weights.plane_mut(o, c);
      const double* gy_base = grad_y.plane(0, o);
      const double* x_base = x.plane(0, c);
      if (kh == 3 && kw == 3 && w >= 3) {
        conv_grad_w_plane<3, 3>(gy_base, x_base, n, h, w, gy_stride, x_stride,
                                acc);
      } else if (kh == 1 && kw == 1) {
        conv_grad_w_plane<1, 1>(gy_base, x_base, n, h, w, gy_stride, x_stride,
                                acc);
      } else if (kh == 7 && kw == 7 && w >= 7) {
        conv_grad_w_plane<7, 7>(gy_base, x_base, n, h, w, gy_stride, x_stride,
                                acc);
      } else {
        conv_grad_w_plane_generic(gy_base, x_base, n, h, w, kh, kw, gy_stride,
                                  x_stride, acc);
      }
    }
  }

  // grad_x[n,c,p,q] = sum over (o,u,v) of w[o,c,u,v] * gy[n,o,p-u+ph,q-v+pw]
#pragma omp parallel for collapse(2) schedule(static)
  for (int s = 0; s < n; ++s) {
    for (int c = 0; c < in_c; ++c) {
      double* gx_plane = g.x.plane_mut(s, c);
      for (int o = 0; o < out_c; ++o) {
        const double* gy_plane = grad_y.plane(s, o);
        const double* w_plane = p.weights.plane(o, c);
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) {
            const double wv = w_plane[u * kw + v];
            // valid output rows p with i = p - u + ph inside the image
            const int p_lo = clamp_lo(u - ph, 0);
            const int p_hi = clamp_hi(h - 1 + u - ph, h - 1);
            const int q_lo = clamp_lo(v - pw, 0);
            const int q_hi = clamp_hi(w - 1 + v - pw, w - 1);
            for (int pp = p_lo; pp <= p_hi; ++pp) {
              double* gx_row = gx_plane + static_cast<std::size_t>(pp) * w;
              const double* gy_row =
                  gy_plane + static_cast<std::size_t>(pp - u + ph) * w +
                  (pw - v);
              for (int q = q_lo; q <= q_hi; ++q) gx_row[q] += wv * gy_row[q];
            }
          }
        }
      }
    }
  }
  return g;
}

std::pair<Tensor, BnCache> batchnorm_forward(const Tensor& x, BatchNorm& p,
                                             Mode mode) {
  const Shape xs = x.shape();
  if (xs.c != p.channels()) {
    throw ShapeError("batchnorm_forward: input has " + std::to_string(xs.c) +
                     " channels, params have " + std::to_string(p.channels()));
  }
  const int n = xs.n, ch = xs.c, h = xs.h, w = xs.w;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double m = static_cast<double>(n) * h * w;

  Tensor y(xs, 0.0);
  BnCache cache;
  cache.x = x;
  cache.train_mode = (mode == Mode::train);
  cache.mean.assign(ch, 0.0);
  cache.inv_std.assign(ch, 0.0);

#pragma omp parallel for schedule(static)
  for (int c = 0; c < ch; ++c) {
    double mu, var;
    if (mode == Mode::train) {
      double sum = 0.0;
      for (int s = 0; s < n; ++s) {
        const double* xp = x.plane(s, c);
        for (std::size_t t = 0; t < plane; ++t) sum += xp[t];
      }
      mu = sum / m;
      double sq = 0.0;
      for (int s = 0; s < n; ++s) {
        const double* xp = x.plane(s, c);
        for (std::size_t t = 0; t < plane; ++t) {
          const double d = xp[t] - mu;
          sq += d * d;
        }
      }
      var = sq / m;
    } else {
      mu = p.running_mean[c];
      var = p.running_var[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + p.epsilon);
    const double gam = p.gamma[c];
    const double bet = p.beta[c];
    for (int s = 0; s < n; ++s) {
      const double* xp = x.plane(s, c);
      double* yp = y.plane_mut(s, c);
      for (std::size_t t = 0; t < plane; ++t) {
        yp[t] = gam * ((xp[t] - mu) * inv_std) + bet;
      }
    }
    cache.mean[c] = mu;
    cache.inv_std[c] = inv_std;
    if (mode == Mode::train) {
      p.running_mean[c] = (1.0 - p.momentum) * p.running_mean[c] + p.momentum * mu;
      p.running_var[c] = (1.0 - p.momentum) * p.running_var[c] + p.momentum * var;
    }
  }
  return {std::move(y), std::move(cache)};
}

BnGrads batchnorm_backward(const Tensor& grad_y, const BnCache& cache,
                           const BatchNorm& p) {
  if (!cache.train_mode) {
    throw UsageError("batchnorm_backward: cache was produced in infer mode");
  }
  const Tensor& x = cache.x;
  if (grad_y.shape() != x.shape()) {
    throw ShapeError("batchnorm_backward: grad_y shape " +
                     grad_y.shape().str() + " does not match input " +
                     x.shape().str());
  }
  const Shape xs = x.shape();
  const int n = xs.n, ch = xs.c;
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  const double m = static_cast<double>(n) * xs.h * xs.w;

  BnGrads g{Tensor(xs, 0.0), std::vector<double>(ch, 0.0),
            std::vector<double>(ch, 0.0)};

#pragma omp parallel for schedule(static)
  for (int c = 0; c < ch; ++c) {
    const double mu = cache.mean[c];
    const double inv_std = cache.inv_std[c];
    double sum_gy = 0.0;
    double sum_gy_xhat = 0.0;
    for (int s = 0; s < n; ++s) {
      const double* gyp = grad_y.plane(s, c);
      const double* xp = x.plane(s, c);
      for (std::size_t t = 0; t < plane; ++t) {
        sum_gy += gyp[t];
        sum_gy_xhat += gyp[t] * ((xp[t] - mu) * inv_std);
      }
    }
    g.beta[c] = sum_gy;
    g.gamma[c] = sum_gy_xhat;
    const double k = p.gamma[c] * inv_std;
    const double mean_gy = sum_gy / m;
    const double mean_gy_xhat = sum_gy_xhat / m;
    for (int s = 0; s < n; ++s) {
      const double* gyp = grad_y.plane(s, c);
      const double* xp = x.plane(s, c);
      double* gxp = g.x.plane_mut(s, c);
      for (std::size_t t = 0; t < plane; ++t) {
        const double xhat = (xp[t] - mu) * inv_std;
        gxp[t] = k * (gyp[t] - mean_gy - xhat * mean_gy_xhat);
      }
    }
  }
  return g;
}

std::pair<Tensor, ReluCache> relu_forward(const Tensor& x) {
  Tensor y(x.shape(), 0.0);
  const double* xp = x.data();
  double* yp = y.data_mut();
  const std::size_t total = x.count();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(total); ++i) {
    yp[i] = xp[i] > 0.0 ? xp[i] : 0.0;
  }
  return {std::move(y), ReluCache{x}};
}

Tensor relu_backward(const Tensor& grad_y, const ReluCache& cache) {
  if (grad_y.shape() != cache.x.shape()) {
    throw ShapeError("relu_backward: grad_y shape " + grad_y.shape().str() +
                     " does not match input " + cache.x.shape().str());
  }
  Tensor gx(grad_y.shape(), 0.0);
  const double* gp = grad_y.data();
  const double* xp = cache.x.data();
  double* op = gx.data_mut();
  const std::size_t total = grad_y.count();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(total); ++i) {
    op[i] = xp[i] > 0.0 ? gp[i] : 0.0;
  }
  return gx;
}

std::pair<double, Tensor> mse_loss(const Tensor& pred, const Tensor& label) {
  if (pred.shape() != label.shape()) {
    throw ShapeError("mse_loss: shape mismatch " + pred.shape().str() +
                     " vs " + label.shape().str());
  }
  const int n = pred.shape().n;
  const std::size_t per_sample = pred.count() / n;
  const double inv_n = 1.0 / n;

  std::vector<double> sample_loss(n, 0.0);
  Tensor grad(pred.shape(), 0.0);
  const double* pp = pred.data();
  const double* lp = label.data();
  double* gp = grad.data_mut();
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n; ++s) {
    const std::size_t base = s * per_sample;
    double acc = 0.0;
    for (std::size_t t = 0; t < per_sample; ++t) {
      const double d = pp[base + t] - lp[base + t];
      acc += d * d;
      gp[base + t] = 2.0 * inv_n * d;
    }
    sample_loss[s] = acc;
  }
  double loss = 0.0;
  for (int s = 0; s < n; ++s) loss += sample_loss[s];
  return {loss * inv_n, std::move(grad)};
}

}  // namespace respore
