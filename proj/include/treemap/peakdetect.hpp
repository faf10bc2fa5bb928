#ifndef TREEMAP_PEAKDETECT_HPP
#define TREEMAP_PEAKDETECT_HPP

#include "treemap/grid.hpp"
#include "treemap/points.hpp"

namespace treemap {

enum class DetectionMode { fixed, adaptive };

// Sliding-window peak detection. Window sizes are in meters so the same
// parameters transfer between 0.5 m CHMs and 3 m heatmaps. In adaptive mode
// the window grows with the candidate's own value (local height):
//   window(v) = clamp(height_factor * v, window_min, window_max).
struct DetectionParams {
    DetectionMode mode = DetectionMode::fixed;
    double threshold = 0.0; // grid-value units
    double window = 0.0;    // meters, fixed mode
    double window_min = 0.0;
    double window_max = 0.0;
    double height_factor = 0.0; // meters of window per meter of height

    void validate() const;
};

// Suppression radius (meters) for a candidate of the given value: half the
// window for the active mode. Monotone non-decreasing in value when adaptive.
double window_radius(double value, const DetectionParams& params);

// Greedy non-maximum suppression. Every valid pixel at or above the
// threshold is a candidate; candidates are visited by descending value
// (ties by ascending row-major index) and accepted when no already accepted
// point lies within the candidate's own suppression radius (Euclidean
// distance between pixel centers, boundary suppresses). Accepted pixels are
// emitted as world pixel centers carrying their grid value, in acceptance
// (descending value) order.
PointSet detect_peaks(const Grid& grid, const DetectionParams& params);

} // namespace treemap

#endif
