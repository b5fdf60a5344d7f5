#pragma once

#include <optional>
#include <string>
#include <vector>

#include "respore/data.hpp"
#include "respore/postprocess.hpp"

namespace respore {

struct MatchPair {
  int detected = 0;  // index into the detected set
  int truth = 0;     // index into the ground-truth set
  double distance = 0.0;
};

// One-to-one assignment; every pair distance is strictly below the match
// radius.
struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<int> unmatched_detections;
  std::vector<int> unmatched_truth;
};

// Greedy matching: candidate pairs closer than `radius` sorted by
// (distance, truth index, detected index) ascending, accepted when both
// endpoints are free. Deterministic regardless of input ordering.
MatchResult match_pores(const PoreSet& detected, const PoreSet& truth,
                        double radius);

struct Metrics {
  bool rt_defined = true;  // false iff the ground truth is empty
  double rt = 0.0;         // true detections / ground-truth total
  double rf = 0.0;         // false detections / total detections (0 if none)
  std::size_t true_detections = 0;
  std::size_t false_detections = 0;
  std::size_t truth_total = 0;
  std::size_t detected_total = 0;
};

Metrics compute_metrics(const MatchResult& m);

struct SweepPoint {
  double th = 0.0;
  Metrics metrics;
};

// Metrics per threshold on the grid; map(s) detected with `base`'s window
// (the grid overrides the threshold). The multi-image form pools counts
// across images (micro-average).
std::vector<SweepPoint> sweep_threshold(const IntensityMap& map,
                                        const PoreSet& truth, double radius,
                                        const std::vector<double>& th_grid,
                                        const DetectConfig& base = {});
std::vector<SweepPoint> sweep_threshold(const std::vector<IntensityMap>& maps,
                                        const std::vector<PoreSet>& truths,
                                        double radius,
                                        const std::vector<double>& th_grid,
                                        const DetectConfig& base = {});

// Operating point: the grid threshold maximizing R_T subject to
// R_F <= target_rf, ties resolved toward the larger threshold. Empty when
// no grid point satisfies the cap.
std::optional<SweepPoint> pick_operating_point(
    const std::vector<SweepPoint>& curve, double target_rf);

// Evenly spaced grid [lo, hi] inclusive with the given step.
std::vector<double> threshold_grid(double lo, double hi, double step);

struct ImageReport {
  std::string image;
  Metrics metrics;
};

// `image,truth_count,detected,true,false,RT,RF` rows (rates as percentages
// with two decimals, NA when undefined) followed by pooled-count
// (ALL_MICRO) and per-image-mean (ALL_MACRO) aggregate rows.
void save_report_csv(const std::vector<ImageReport>& reports,
                     const std::string& path);

// `th,RT,RF` rows, percentages with two decimals.
void save_sweep_csv(const std::vector<SweepPoint>& curve,
                    const std::string& path);

// Pooled-count aggregate of several per-image metrics.
Metrics micro_average(const std::vector<ImageReport>& reports);

}  // namespace respore
