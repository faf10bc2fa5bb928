#include "treemap/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "treemap/util.hpp"

namespace treemap {

void HeatmapConfig::validate() const {
    if (!(sigma_m > 0.0))
        throw std::invalid_argument("heatmap: sigma_m must be > 0");
    if (delta < 0.0)
        throw std::invalid_argument("heatmap: delta must be >= 0");
    if (!(truncation_multiple >= 3.0)) // infinity disables truncation
        throw std::invalid_argument("heatmap: truncation_multiple must be >= 3");
    if (!(pixel_size > 0.0))
        throw std::invalid_argument("heatmap: pixel_size must be > 0");
}

namespace {

// Per-point rendering state: effective sigma and the pixel bounding box the
// truncated kernel can touch.
struct KernelInfo {
    double cx, cy;
    double sigma_eff;
    double cutoff2; // squared truncation distance, meters
    int c0, c1, r0, r1;
    int pixel_index; // containing pixel, -1 when outside the grid
};

std::vector<KernelInfo> prepare_kernels(const PointSet& points, const Grid& uncertainty,
                                        const HeatmapConfig& config) {
    std::vector<KernelInfo> kernels;
    kernels.reserve(points.size());
    bool truncated = std::isfinite(config.truncation_multiple);
    for (const Point& p : points.points) {
        KernelInfo k;
        k.cx = p.x;
        k.cy = p.y;
        int c = uncertainty.col_at(p.x);
        int r = uncertainty.row_at(p.y);
        double s = 0.0;
        k.pixel_index = -1;
        if (uncertainty.in_bounds(c, r)) {
            k.pixel_index = static_cast<int>(uncertainty.cell(c, r));
            float sv = uncertainty.at(c, r);
            if (!uncertainty.is_nodata(sv)) s = sv;
        }
        k.sigma_eff = config.sigma_m * (1.0 + std::max(0.0, s));
        if (truncated) {
            double cutoff = config.truncation_multiple * k.sigma_eff;
            k.cutoff2 = cutoff * cutoff;
            double ps = uncertainty.pixel_size;
            k.c0 = std::max(0, (int)std::ceil((p.x - cutoff - uncertainty.origin_x) / ps - 0.5));
            k.c1 = std::min(uncertainty.width - 1,
                            (int)std::floor((p.x + cutoff - uncertainty.origin_x) / ps - 0.5));
            k.r0 = std::max(0, (int)std::ceil((uncertainty.origin_y - p.y - cutoff) / ps - 0.5));
            k.r1 = std::min(uncertainty.height - 1,
                            (int)std::floor((uncertainty.origin_y - p.y + cutoff) / ps - 0.5));
        } else {
            k.cutoff2 = std::numeric_limits<double>::infinity();
            k.c0 = 0;
            k.c1 = uncertainty.width - 1;
            k.r0 = 0;
            k.r1 = uncertainty.height - 1;
        }
        kernels.push_back(k);
    }
    return kernels;
}

} // namespace

Grid render_targets(const PointSet& points, const Grid& uncertainty, const HeatmapConfig& config) {
    uncertainty.validate();
    config.validate();
    if (!points.crs_id.empty() && !uncertainty.crs_id.empty() &&
        points.crs_id != uncertainty.crs_id)
        throw DataError("render_targets: crs mismatch");

    Grid out = Grid::filled(uncertainty.width, uncertainty.height, uncertainty.origin_x,
                            uncertainty.origin_y, uncertainty.pixel_size, 0.0f,
                            uncertainty.crs_id);
    auto kernels = prepare_kernels(points, uncertainty, config);

    parallel_chunks(out.height, [&](int64_t r0, int64_t r1) {
        for (const KernelInfo& k : kernels) {
            int rb = std::max<int>(k.r0, static_cast<int>(r0));
            int re = std::min<int>(k.r1, static_cast<int>(r1) - 1);
            double denom = 2.0 * k.sigma_eff * k.sigma_eff;
            for (int r = rb; r <= re; ++r) {
                double dy = out.center_y(r) - k.cy;
                for (int c = k.c0; c <= k.c1; ++c) {
                    double dx = out.center_x(c) - k.cx;
                    double d2 = dx * dx + dy * dy;
                    if (d2 > k.cutoff2) continue;
                    float g = static_cast<float>(std::exp(-d2 / denom));
                    float& slot = out.at(c, r);
                    if (g > slot) slot = g;
                }
            }
        }
    });
    return out;
}

LossResult loss(const Grid& h, const PointSet& points, const Grid& s,
                const HeatmapConfig& config) {
    h.validate();
    s.validate();
    config.validate();
    if (!h.same_geometry(s))
        throw DataError("loss: h and s geometry mismatch");

    std::size_t n_cells = h.values.size();

    // Target render that also records the arg-max kernel per pixel. Kernels
    // are visited in point index order with a strict comparison so ties
    // resolve toward the lower index; the resulting y matches
    // render_targets exactly.
    auto kernels = prepare_kernels(points, s, config);
    std::vector<float> y(n_cells, 0.0f);
    std::vector<int32_t> argmax(n_cells, -1);
    parallel_chunks(h.height, [&](int64_t r0, int64_t r1) {
        for (std::size_t ki = 0; ki < kernels.size(); ++ki) {
            const KernelInfo& k = kernels[ki];
            int rb = std::max<int>(k.r0, static_cast<int>(r0));
            int re = std::min<int>(k.r1, static_cast<int>(r1) - 1);
            double denom = 2.0 * k.sigma_eff * k.sigma_eff;
            for (int r = rb; r <= re; ++r) {
                double dy = h.center_y(r) - k.cy;
                for (int c = k.c0; c <= k.c1; ++c) {
                    double dx = h.center_x(c) - k.cx;
                    double d2 = dx * dx + dy * dy;
                    if (d2 > k.cutoff2) continue;
                    float g = static_cast<float>(std::exp(-d2 / denom));
                    std::size_t i = h.cell(c, r);
                    if (g > y[i]) {
                        y[i] = g;
                        argmax[i] = static_cast<int32_t>(ki);
                    }
                }
            }
        }
    });

    // Valid set: pixels carrying data in both h and s.
    std::vector<uint8_t> valid(n_cells);
    int64_t n_valid = 0;
    for (std::size_t i = 0; i < n_cells; ++i) {
        valid[i] = !h.is_nodata(h.values[i]) && !s.is_nodata(s.values[i]);
        n_valid += valid[i];
    }
    if (n_valid == 0) throw DataError("loss: no valid pixels");
    double inv_n = 1.0 / static_cast<double>(n_valid);

    LossResult res;
    res.grad_h = Grid::filled(h.width, h.height, h.origin_x, h.origin_y, h.pixel_size, 0.0f,
                              h.crs_id);
    res.grad_s = res.grad_h;

    // Per-row partial sums accumulated in row order keep the reduction
    // independent of the thread count.
    std::vector<double> row_sums(h.height, 0.0);
    parallel_chunks(h.height, [&](int64_t r0, int64_t r1) {
        for (int r = static_cast<int>(r0); r < r1; ++r) {
            double acc = 0.0;
            for (int c = 0; c < h.width; ++c) {
                std::size_t i = h.cell(c, r);
                if (!valid[i]) continue;
                double resid = static_cast<double>(h.values[i]) - y[i];
                double sv = s.values[i];
                acc += resid * resid + config.delta * sv * sv;
                res.grad_h.values[i] = static_cast<float>(2.0 * inv_n * resid);
                res.grad_s.values[i] = static_cast<float>(2.0 * config.delta * inv_n * sv);
            }
            row_sums[r] = acc;
        }
    });
    double total = 0.0;
    for (double v : row_sums) total += v;
    res.value = total * inv_n;

    // Chain term: residuals at a kernel's arg-max pixels pull on the
    // uncertainty in the kernel's containing pixel via
    // d g / d sigma = g * d^2 / sigma^3, active only where s > 0.
    for (std::size_t ki = 0; ki < kernels.size(); ++ki) {
        const KernelInfo& k = kernels[ki];
        if (k.pixel_index < 0) continue;
        std::size_t pi = static_cast<std::size_t>(k.pixel_index);
        if (!valid[pi]) continue;
        if (!(static_cast<double>(s.values[pi]) > 0.0)) continue;
        double sigma = k.sigma_eff;
        double denom = 2.0 * sigma * sigma;
        double contrib = 0.0;
        for (int r = k.r0; r <= k.r1; ++r) {
            double dy = h.center_y(r) - k.cy;
            for (int c = k.c0; c <= k.c1; ++c) {
                std::size_t i = h.cell(c, r);
                if (argmax[i] != static_cast<int32_t>(ki) || !valid[i]) continue;
                double dx = h.center_x(c) - k.cx;
                double d2 = dx * dx + dy * dy;
                if (d2 > k.cutoff2) continue;
                double g = std::exp(-d2 / denom);
                double dg_dsigma = g * d2 / (sigma * sigma * sigma);
                double resid = static_cast<double>(h.values[i]) - y[i];
                contrib += -2.0 * inv_n * resid * dg_dsigma * config.sigma_m;
            }
        }
        res.grad_s.values[pi] += static_cast<float>(contrib);
    }
    return res;
}

Grid to_cover(const Grid& heatmap, double threshold) {
    heatmap.validate();
    Grid out = heatmap;
    float t = static_cast<float>(threshold);
    parallel_chunks(static_cast<int64_t>(out.values.size()), [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            float v = heatmap.values[i];
            if (heatmap.is_nodata(v)) continue;
            out.values[i] = v >= t ? 1.0f : 0.0f;
        }
    });
    return out;
}

PointSet to_points(const Grid& heatmap, double threshold, double min_distance) {
    if (!(min_distance > 0.0))
        throw std::invalid_argument("to_points: min_distance must be > 0");
    DetectionParams params;
    params.mode = DetectionMode::fixed;
    params.threshold = threshold;
    params.window = min_distance;
    return detect_peaks(heatmap, params);
}

} // namespace treemap
