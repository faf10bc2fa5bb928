#ifndef TREEMAP_EVALMETRICS_HPP
#define TREEMAP_EVALMETRICS_HPP

#include <cstdint>
#include <vector>

#include "treemap/grid.hpp"
#include "treemap/points.hpp"

namespace treemap {

struct MatchPair {
    int pred = -1;
    int ref = -1;
    double distance = 0.0; // meters
};

// One-to-one assignment between predicted and reference points. Every index
// appears in at most one pair and every pair distance is <= max_dist.
struct Matching {
    std::vector<MatchPair> pairs; // sorted by (pred, ref)
    std::vector<int> unmatched_pred;
    std::vector<int> unmatched_ref;
    double max_dist = 0.0;
};

// Maximum-cardinality matching over pairs within max_dist; among those, one
// of minimum total distance. Ties are resolved deterministically.
Matching match_points(const PointSet& pred, const PointSet& ref, double max_dist);

struct DetectionMetrics {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // 1 - |n_pred - n_ref| / n_pred, clamped to [0, 1]; 0 when n_pred == 0.
    double counting_accuracy = 0.0;
    // Harmonic mean of f1 and counting accuracy; 0 when both are 0.
    double objective = 0.0;
};

DetectionMetrics detection_metrics(const Matching& matching, int64_t n_pred, int64_t n_ref);

// Pixel counts over cells valid in both grids; nonzero counts as covered.
struct PixelMetrics {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

PixelMetrics pixel_metrics(const Grid& pred, const Grid& ref);

struct CoverWindow {
    double pred_frac = 0.0;
    double ref_frac = 0.0;
};

struct CoverR2 {
    double r2 = 0.0;
    std::vector<CoverWindow> windows; // row-major block order
};

// Tiles both grids into window x window blocks (border blocks shrink; blocks
// whose extent drops below 25 m in either direction are dropped) and
// compares per-block cover fractions: pred = share of nonzero pred pixels,
// ref = share of CHM pixels at or above height_threshold, both over pixels
// valid in both grids. Blocks with a valid fraction below min_valid_fraction
// are dropped. r2 = 1 - SS_res/SS_tot about the ref mean; fewer than 2
// blocks or zero ref variance is an error.
CoverR2 cover_fraction_r2(const Grid& pred_cover, const Grid& ref_chm, double window,
                          double height_threshold, double min_valid_fraction = 0.5);

enum class SweepMetric { r2, f1_pixel };

struct SweepRow {
    double threshold = 0.0;
    double score = 0.0;
    // Populated for f1_pixel only, for precision-recall tables.
    double precision = 0.0;
    double recall = 0.0;
};

struct SweepConfig {
    double window = 25.0;           // meters, r2 blocks
    double height_threshold = 3.0;  // meters, CHM cover definition
    double min_valid_fraction = 0.5;
};

struct SweepResult {
    double best_threshold = 0.0;
    double best_score = 0.0;
    std::vector<SweepRow> table;
};

// Thresholds score_grid into binary cover at each threshold (value >=
// threshold, missing preserved) and scores it against the reference CHM.
// Thresholds must be nonempty and ascending; ties go to the lowest
// threshold.
SweepResult sweep_threshold(const Grid& score_grid, const Grid& ref_chm,
                            const std::vector<double>& thresholds, SweepMetric metric,
                            const SweepConfig& cfg);

} // namespace treemap

#endif
