#include "respore/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace respore {

MatchResult match_pores(const PoreSet& detected, const PoreSet& truth,
                        double radius) {
  if (radius <= 0.0) throw InputError("match radius must be positive");

  struct Candidate {
    double distance;
    int truth;
    int detected;
  };
  std::vector<Candidate> candidates;
  for (int t = 0; t < static_cast<int>(truth.size()); ++t) {
    for (int d = 0; d < static_cast<int>(detected.size()); ++d) {
      const double dy = detected[d].row - truth[t].row;
      const double dx = detected[d].col - truth[t].col;
      const double dist = std::sqrt(dy * dy + dx * dx);
      if (dist < radius) candidates.push_back({dist, t, d});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.distance != b.distance) return a.distance < b.distance;
              if (a.truth != b.truth) return a.truth < b.truth;
              return a.detected < b.detected;
            });

  MatchResult result;
  std::vector<bool> d_used(detected.size(), false);
  std::vector<bool> t_used(truth.size(), false);
  for (const auto& c : candidates) {
    if (d_used[c.detected] || t_used[c.truth]) continue;
    d_used[c.detected] = true;
    t_used[c.truth] = true;
    result.pairs.push_back({c.detected, c.truth, c.distance});
  }
  for (int d = 0; d < static_cast<int>(detected.size()); ++d) {
    if (!d_used[d]) result.unmatched_detections.push_back(d);
  }
  for (int t = 0; t < static_cast<int>(truth.size()); ++t) {
    if (!t_used[t]) result.unmatched_truth.push_back(t);
  }
  return result;
}

Metrics compute_metrics(const MatchResult& m) {
  Metrics out;
  out.true_detections = m.pairs.size();
  out.false_detections = m.unmatched_detections.size();
  out.truth_total = m.pairs.size() + m.unmatched_truth.size();
  out.detected_total = out.true_detections + out.false_detections;
  out.rt_defined = out.truth_total > 0;
  if (out.rt_defined) {
    out.rt = static_cast<double>(out.true_detections) /
             static_cast<double>(out.truth_total);
  }
  out.rf = out.detected_total > 0
               ? static_cast<double>(out.false_detections) /
                     static_cast<double>(out.detected_total)
               : 0.0;
  return out;
}

std::vector<SweepPoint> sweep_threshold(const IntensityMap& map,
                                        const PoreSet& truth, double radius,
                                        const std::vector<double>& th_grid,
                                        const DetectConfig& base) {
  return sweep_threshold(std::vector<IntensityMap>{map},
                         std::vector<PoreSet>{truth}, radius, th_grid, base);
}

std::vector<SweepPoint> sweep_threshold(const std::vector<IntensityMap>& maps,
                                        const std::vector<PoreSet>& truths,
                                        double radius,
                                        const std::vector<double>& th_grid,
                                        const DetectConfig& base) {
  if (th_grid.empty()) throw InputError("threshold grid is empty");
  if (maps.size() != truths.size()) {
    throw InputError("sweep: map/truth count mismatch");
  }
  std::vector<SweepPoint> curve;
  curve.reserve(th_grid.size());
  for (double th : th_grid) {
    DetectConfig cfg = base;
    cfg.threshold = th;
    MatchResult pooled;
    std::size_t truth_total = 0, true_count = 0, det_total = 0;
    for (std::size_t k = 0; k < maps.size(); ++k) {
      const PoreSet det = detect_pores(maps[k], cfg);
      const MatchResult m = match_pores(det, truths[k], radius);
      truth_total += truths[k].size();
      true_count += m.pairs.size();
      det_total += det.size();
    }
    Metrics metrics;
    metrics.true_detections = true_count;
    metrics.false_detections = det_total - true_count;
    metrics.truth_total = truth_total;
    metrics.detected_total = det_total;
    metrics.rt_defined = truth_total > 0;
    if (metrics.rt_defined) {
      metrics.rt = static_cast<double>(true_count) / truth_total;
    }
    metrics.rf = det_total > 0
                     ? static_cast<double>(det_total - true_count) / det_total
                     : 0.0;
    curve.push_back({th, metrics});
  }
  return curve;
}

std::optional<SweepPoint> pick_operating_point(
    const std::vector<SweepPoint>& curve, double target_rf) {
  std::optional<SweepPoint> best;
  for (const auto& pt : curve) {
    if (pt.metrics.rf > target_rf) continue;
    if (!best || pt.metrics.rt > best->metrics.rt ||
        (pt.metrics.rt == best->metrics.rt && pt.th > best->th)) {
      best = pt;
    }
  }
  return best;
}

std::vector<double> threshold_grid(double lo, double hi, double step) {
  if (step <= 0.0 || hi < lo) throw InputError("bad threshold grid");
  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double th = lo + k * step;
    if (th > hi + step * 1e-9) break;
    grid.push_back(th);
  }
  return grid;
}

namespace {

std::string pct(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", ratio * 100.0);
  return buf;
}

void write_metrics_row(std::ofstream& out, const std::string& name,
                       const Metrics& m) {
  out << name << "," << m.truth_total << "," << m.detected_total << ","
      << m.true_detections << "," << m.false_detections << ","
      << (m.rt_defined ? pct(m.rt) : std::string("NA")) << "," << pct(m.rf)
      << "\n";
}

}  // namespace

Metrics micro_average(const std::vector<ImageReport>& reports) {
  Metrics total;
  for (const auto& r : reports) {
    total.true_detections += r.metrics.true_detections;
    total.false_detections += r.metrics.false_detections;
    total.truth_total += r.metrics.truth_total;
    total.detected_total += r.metrics.detected_total;
  }
  total.rt_defined = total.truth_total > 0;
  if (total.rt_defined) {
    total.rt = static_cast<double>(total.true_detections) / total.truth_total;
  }
  total.rf = total.detected_total > 0
                 ? static_cast<double>(total.false_detections) /
                       total.detected_total
                 : 0.0;
  return total;
}

void save_report_csv(const std::vector<ImageReport>& reports,
                     const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open report for writing: " + path);
  out << "image,truth_count,detected,true,false,RT,RF\n";
  for (const auto& r : reports) write_metrics_row(out, r.image, r.metrics);

  write_metrics_row(out, "ALL_MICRO", micro_average(reports));

  // macro: unweighted mean of per-image rates (images with defined RT only)
  Metrics macro = micro_average(reports);
  double rt_sum = 0.0, rf_sum = 0.0;
  std::size_t rt_n = 0;
  for (const auto& r : reports) {
    if (r.metrics.rt_defined) {
      rt_sum += r.metrics.rt;
      ++rt_n;
    }
    rf_sum += r.metrics.rf;
  }
  macro.rt_defined = rt_n > 0;
  macro.rt = rt_n > 0 ? rt_sum / rt_n : 0.0;
  macro.rf = reports.empty() ? 0.0 : rf_sum / reports.size();
  write_metrics_row(out, "ALL_MACRO", macro);
  if (!out) throw IoError("failed writing report: " + path);
}

void save_sweep_csv(const std::vector<SweepPoint>& curve,
                    const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open sweep CSV for writing: " + path);
  out << "th,RT,RF\n";
  for (const auto& pt : curve) {
    out << fmt_double(pt.th) << ","
        << (pt.metrics.rt_defined ? pct(pt.metrics.rt) : std::string("NA"))
        << "," << pct(pt.metrics.rf) << "\n";
  }
  if (!out) throw IoError("failed writing sweep CSV: " + path);
}

}  // namespace respore
