#include <algorithm>
#include <cmath>
#include <numbers>

#include "respore/data.hpp"
#include "respore/rng.hpp"

namespace respore {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Smooth ridge phase field: a dominant linear direction plus a few
// low-frequency sinusoidal perturbations whose gradients stay well below
// 1, so the local ridge period never strays far from the nominal one.
// Ridges are the dark lines where phase = period/2 (mod period).
struct PhaseField {
  double dir_x = 1.0, dir_y = 0.0;
  struct Wave {
    double fx, fy, amp, phase;
  };
  std::vector<Wave> waves;

  double value(double row, double col) const {
    double psi = dir_x * col + dir_y * row;
    for (const auto& wv : waves) {
      psi += wv.amp * std::sin(kTwoPi * (wv.fx * col + wv.fy * row) + wv.phase);
    }
    return psi;
  }

  void gradient(double row, double col, double& d_row, double& d_col) const {
    d_col = dir_x;
    d_row = dir_y;
    for (const auto& wv : waves) {
      const double c =
          wv.amp * kTwoPi * std::cos(kTwoPi * (wv.fx * col + wv.fy * row) + wv.phase);
      d_col += c * wv.fx;
      d_row += c * wv.fy;
    }
  }
};

PhaseField make_phase_field(Rng& rng) {
  PhaseField field;
  const double theta = rng.uniform(0.0, kTwoPi);
  field.dir_x = std::cos(theta);
  field.dir_y = std::sin(theta);
  for (int k = 0; k < 3; ++k) {
    const double freq = rng.uniform(0.002, 0.008);  // cycles per pixel
    const double ang = rng.uniform(0.0, kTwoPi);
    const double grad_mag = rng.uniform(0.03, 0.07);  // contribution to |grad|
    PhaseField::Wave wv;
    wv.fx = freq * std::cos(ang);
    wv.fy = freq * std::sin(ang);
    wv.amp = grad_mag / (kTwoPi * freq);
    wv.phase = rng.uniform(0.0, kTwoPi);
    field.waves.push_back(wv);
  }
  return field;
}

// signed phase offset from the nearest ridge line, in (-period/2, period/2]
double ridge_offset(const PhaseField& field, double period, double row,
                    double col) {
  const double psi = field.value(row, col) - period / 2.0;
  return psi - period * std::round(psi / period);
}

}  // namespace

std::pair<GrayImage, PoreSet> synth_fingerprint(int h, int w,
                                                const SynthParams& params,
                                                std::uint64_t seed) {
  if (h < 1 || w < 1) throw InputError("image dimensions must be >= 1");
  if (params.ridge_period < 4.0) {
    throw InputError("ridge_period must be >= 4 pixels");
  }
  if (params.pore_density < 0.0 || params.pore_radius <= 0.0 ||
      params.noise < 0.0) {
    throw InputError("invalid synthesis parameters");
  }

  Rng rng(mix_seed(seed, 0x73796e7468ULL));  // "synth"
  const PhaseField field = make_phase_field(rng);
  const double period = params.ridge_period;
  constexpr double kRidgeAmp = 0.4;

  GrayImage img(h, w, 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      img(i, j) = 0.5 + kRidgeAmp * std::cos(kTwoPi * field.value(i, j) / period);
    }
  }

  // place pores on ridge lines with a minimum separation
  const int target = static_cast<int>(
      std::llround(params.pore_density * h * w / 10000.0));
  const double margin = params.pore_radius + 2.0;
  const double min_sep = 2.0 * params.pore_radius + 2.0;
  PoreSet pores;
  if (target > 0) {
    if (h - 1 < 2 * margin || w - 1 < 2 * margin) {
      throw GenerationError("image too small to place pores", 0);
    }
    const long max_attempts = 400L * target + 1000L;
    long attempts = 0;
    while (static_cast<int>(pores.size()) < target && attempts < max_attempts) {
      ++attempts;
      double r = rng.uniform(margin, h - 1 - margin);
      double c = rng.uniform(margin, w - 1 - margin);
      // Newton steps toward the nearest ridge line along the phase gradient
      bool ok = true;
      for (int it = 0; it < 4; ++it) {
        const double off = ridge_offset(field, period, r, c);
        double gr, gc;
        field.gradient(r, c, gr, gc);
        const double g2 = gr * gr + gc * gc;
        if (g2 < 1e-12) {
          ok = false;
          break;
        }
        r -= off * gr / g2;
        c -= off * gc / g2;
      }
      if (!ok) continue;
      const double ri = std::llround(r);
      const double ci = std::llround(c);
      if (ri < margin || ri > h - 1 - margin || ci < margin ||
          ci > w - 1 - margin) {
        continue;
      }
      bool separated = true;
      for (const auto& p : pores) {
        const double dy = p.row - ri;
        const double dx = p.col - ci;
        if (dy * dy + dx * dx < min_sep * min_sep) {
          separated = false;
          break;
        }
      }
      if (!separated) continue;
      pores.push_back({ri, ci});
    }
    if (static_cast<int>(pores.size()) < target) {
      throw GenerationError("could only place " +
                                std::to_string(pores.size()) + " of " +
                                std::to_string(target) + " pores",
                            static_cast<int>(pores.size()));
    }
  }

  // implant pores as bright Gaussian dots
  const double sigma = params.pore_radius / 2.0;
  constexpr double kPoreAmp = 0.8;
  const int reach = static_cast<int>(std::ceil(3.0 * sigma));
  for (const auto& p : pores) {
    const int pr = static_cast<int>(p.row);
    const int pc = static_cast<int>(p.col);
    for (int i = std::max(0, pr - reach); i <= std::min(h - 1, pr + reach); ++i) {
      for (int j = std::max(0, pc - reach); j <= std::min(w - 1, pc + reach);
           ++j) {
        const double d2 = static_cast<double>(i - pr) * (i - pr) +
                          static_cast<double>(j - pc) * (j - pc);
        img(i, j) += kPoreAmp * std::exp(-d2 / (2.0 * sigma * sigma));
      }
    }
  }

  if (params.noise > 0.0) {
    for (double& px : img.v) px += rng.normal(0.0, params.noise);
  }
  for (double& px : img.v) px = std::clamp(px, 0.0, 1.0);

  return {std::move(img), std::move(pores)};
}

}  // namespace respore
