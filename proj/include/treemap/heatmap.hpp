#ifndef TREEMAP_HEATMAP_HPP
#define TREEMAP_HEATMAP_HPP

#include "treemap/grid.hpp"
#include "treemap/peakdetect.hpp"
#include "treemap/points.hpp"

namespace treemap {

// Gaussian target rendering and loss settings. sigma_m is the minimal
// kernel standard deviation in meters; uncertainty scales it as
//   sigma_eff(c) = sigma_m * (1 + max(0, s(c)))
// with s sampled at the point's containing pixel (missing -> 0). Kernels
// are cut off beyond truncation_multiple * sigma_eff; set the multiple to
// infinity to disable truncation (used by the finite-difference checks).
struct HeatmapConfig {
    double sigma_m = 4.0;
    double delta = 0.2;
    double truncation_multiple = 3.0;
    double pixel_size = 3.0; // meters, used when no grid supplies geometry

    void validate() const;
};

// Renders the training target: every point draws a Gaussian kernel of
// amplitude 1 and deviation sigma_eff(c), and pixels take the maximum over
// all kernels (0 where none reaches). The uncertainty grid supplies the
// output geometry. Equals the pixel-wise max of single-point renders
// bit-exactly.
Grid render_targets(const PointSet& points, const Grid& uncertainty, const HeatmapConfig& config);

// Mean-squared heatmap error against the freshly rendered target plus
// delta * mean(s^2), with analytic gradients for both inputs. Gradients of
// the max-pooled target flow only into the arg-max kernel of each pixel
// (ties to the lowest point index), and only where the uncertainty is
// positive. Sums run over pixels valid in both h and s; gradients are 0
// elsewhere.
struct LossResult {
    double value = 0.0;
    Grid grad_h;
    Grid grad_s;
};

LossResult loss(const Grid& h, const PointSet& points, const Grid& s, const HeatmapConfig& config);

// Threshold into a binary cover map: 1 where value >= threshold, 0 below,
// missing preserved.
Grid to_cover(const Grid& heatmap, double threshold);

// Decode a heatmap into tree positions: fixed-window peak detection where
// min_distance is the full suppression window (radius min_distance / 2).
PointSet to_points(const Grid& heatmap, double threshold, double min_distance);

} // namespace treemap

#endif
