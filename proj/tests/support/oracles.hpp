#pragma once

// Independent reference implementations used as test oracles. These are
// deliberately the plainest possible transliterations of the definitions
// and stay separate from the production kernels they check.

#include <functional>
#include <vector>

#include "respore/data.hpp"
#include "respore/layers.hpp"
#include "respore/rng.hpp"
#include "respore/tensor.hpp"

namespace oracle {

// Definitional convolution: per output element, bias first, then the
// (c, u, v)-ordered sum, skipping zero-padding terms.
respore::Tensor conv2d_forward_naive(const respore::Tensor& x,
                                     const respore::Conv2d& p);

// Definitional gradients with the same per-element accumulation orders the
// production kernels document: grad_x over (o,u,v), grad_w/grad_b over
// (n,i,j).
respore::ConvGrads conv2d_backward_naive(const respore::Tensor& grad_y,
                                         const respore::Tensor& x,
                                         const respore::Conv2d& p);

// Brute-force clipped-window maximum.
respore::IntensityMap max_filter_naive(const respore::IntensityMap& map,
                                       int window);

// Brute-force detection rule: equal to the window max and above threshold.
respore::PoreSet detect_pores_naive(const respore::IntensityMap& map,
                                    double threshold, int window);

// Brute-force label map: per pixel, max over every pore of the linear
// decay, then force 1 at rounded pore pixels.
respore::LabelMap label_map_naive(int h, int w, const respore::PoreSet& pores,
                                  double radius);

// Central finite difference of a scalar function at x.
double central_diff(const std::function<double(double)>& f, double x,
                    double step);

// |a - b| / max(|a|, |b|, floor)
double rel_err(double a, double b, double floor = 1e-12);

respore::Tensor random_tensor(respore::Shape shape, respore::Rng& rng,
                              double lo = -1.0, double hi = 1.0);

}  // namespace oracle
