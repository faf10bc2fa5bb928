#include "treemap/chmprep.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "treemap/util.hpp"

namespace treemap {

void DengParams::validate() const {
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("deng: kernel must be odd and >= 1");
    if (steps < 1)
        throw std::invalid_argument("deng: steps must be >= 1");
    if (low_threshold > high_threshold)
        throw std::invalid_argument("deng: low_threshold must be <= high_threshold");
    if (blur_kernel < 1 || blur_kernel % 2 == 0)
        throw std::invalid_argument("deng: blur_kernel must be odd and >= 1");
    if (blur_kernel > 1 && !(blur_sigma > 0.0))
        throw std::invalid_argument("deng: blur_sigma must be > 0");
}

void PreprocParams::validate() const {
    auto check_kernel = [](int k, const char* name) {
        if (k < 0 || (k > 0 && k % 2 == 0))
            throw std::invalid_argument(std::string("preproc: ") + name +
                                        " must be 0 or an odd pixel count");
    };
    check_kernel(avg_kernel, "avg_kernel");
    check_kernel(median_kernel, "median_kernel");
    check_kernel(gauss_kernel, "gauss_kernel");
    if (gauss_kernel > 0 && !(gauss_sigma > 0.0))
        throw std::invalid_argument("preproc: gauss_sigma must be > 0 when gauss_kernel > 0");
    if (deng) deng->validate();
}

namespace {

float window_median(std::vector<float>& vals) {
    std::sort(vals.begin(), vals.end());
    std::size_t k = vals.size();
    if (k % 2 == 1) return vals[k / 2];
    return static_cast<float>((static_cast<double>(vals[k / 2 - 1]) + vals[k / 2]) / 2.0);
}

// Median of the kernel window around (c, r) with replicate padding; the
// (0, 0) offset is excluded when exclude_center is set. Returns false when
// every sample is missing.
bool padded_window_median(const Grid& g, int c, int r, int radius, bool exclude_center,
                          std::vector<float>& scratch, float* out) {
    scratch.clear();
    for (int dy = -radius; dy <= radius; ++dy) {
        int rr = std::clamp(r + dy, 0, g.height - 1);
        for (int dx = -radius; dx <= radius; ++dx) {
            if (exclude_center && dx == 0 && dy == 0) continue;
            int cc = std::clamp(c + dx, 0, g.width - 1);
            float v = g.at(cc, rr);
            if (!g.is_nodata(v)) scratch.push_back(v);
        }
    }
    if (scratch.empty()) return false;
    *out = window_median(scratch);
    return true;
}

} // namespace

Grid blur(const Grid& grid, BlurMethod method, int kernel, double sigma) {
    grid.validate();
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("blur: kernel must be odd and >= 1");
    if (method == BlurMethod::gaussian && !(sigma > 0.0))
        throw std::invalid_argument("blur: gaussian needs sigma > 0");
    if (kernel == 1) return grid;

    int radius = kernel / 2;
    Grid out = grid;

    std::vector<double> weights;
    if (method == BlurMethod::gaussian) {
        weights.resize(static_cast<std::size_t>(kernel) * kernel);
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx)
                weights[(dy + radius) * kernel + (dx + radius)] =
                    std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }

    parallel_chunks(grid.height, [&](int64_t r0, int64_t r1) {
        std::vector<float> scratch;
        scratch.reserve(static_cast<std::size_t>(kernel) * kernel);
        for (int r = static_cast<int>(r0); r < r1; ++r) {
            for (int c = 0; c < grid.width; ++c) {
                float center = grid.at(c, r);
                if (grid.is_nodata(center)) continue; // stays nodata
                switch (method) {
                case BlurMethod::average: {
                    double sum = 0.0;
                    int n = 0;
                    for (int dy = -radius; dy <= radius; ++dy) {
                        int rr = std::clamp(r + dy, 0, grid.height - 1);
                        for (int dx = -radius; dx <= radius; ++dx) {
                            int cc = std::clamp(c + dx, 0, grid.width - 1);
                            float v = grid.at(cc, rr);
                            if (grid.is_nodata(v)) continue;
                            sum += v;
                            ++n;
                        }
                    }
                    out.at(c, r) = static_cast<float>(sum / n);
                    break;
                }
                case BlurMethod::median: {
                    float m;
                    padded_window_median(grid, c, r, radius, false, scratch, &m);
                    out.at(c, r) = m;
                    break;
                }
                case BlurMethod::gaussian: {
                    double sum = 0.0, wsum = 0.0;
                    for (int dy = -radius; dy <= radius; ++dy) {
                        int rr = std::clamp(r + dy, 0, grid.height - 1);
                        for (int dx = -radius; dx <= radius; ++dx) {
                            int cc = std::clamp(c + dx, 0, grid.width - 1);
                            float v = grid.at(cc, rr);
                            if (grid.is_nodata(v)) continue;
                            double w = weights[(dy + radius) * kernel + (dx + radius)];
                            sum += w * v;
                            wsum += w;
                        }
                    }
                    out.at(c, r) = static_cast<float>(sum / wsum);
                    break;
                }
                }
            }
        }
    });
    return out;
}

Grid deng_correct(const Grid& grid, const DengParams& params) {
    grid.validate();
    params.validate();

    Grid work = grid;
    int radius = params.kernel / 2;
    std::size_t n = work.values.size();

    std::vector<float> medians(n);
    std::vector<uint8_t> has_median(n);
    std::vector<uint8_t> pit(n); // 0 none, 1 weak, 2 strong

    for (int step = 0; step < params.steps; ++step) {
        parallel_chunks(work.height, [&](int64_t r0, int64_t r1) {
            std::vector<float> scratch;
            for (int r = static_cast<int>(r0); r < r1; ++r) {
                for (int c = 0; c < work.width; ++c) {
                    std::size_t i = work.cell(c, r);
                    pit[i] = 0;
                    has_median[i] = 0;
                    float v = work.at(c, r);
                    if (work.is_nodata(v)) continue;
                    float m;
                    if (!padded_window_median(work, c, r, radius, true, scratch, &m))
                        continue;
                    medians[i] = m;
                    has_median[i] = 1;
                    double lift = static_cast<double>(m) - v;
                    if (lift > params.high_threshold)
                        pit[i] = 2;
                    else if (lift > params.low_threshold)
                        pit[i] = 1;
                }
            }
        });

        // Hysteresis: keep strong pits plus weak pits 8-connected to one.
        std::deque<std::size_t> queue;
        std::vector<uint8_t> keep(n, 0);
        for (std::size_t i = 0; i < n; ++i)
            if (pit[i] == 2) {
                keep[i] = 1;
                queue.push_back(i);
            }
        while (!queue.empty()) {
            std::size_t i = queue.front();
            queue.pop_front();
            int c = static_cast<int>(i % work.width);
            int r = static_cast<int>(i / work.width);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    int cc = c + dx, rr = r + dy;
                    if (!work.in_bounds(cc, rr)) continue;
                    std::size_t j = work.cell(cc, rr);
                    if (pit[j] != 0 && !keep[j]) {
                        keep[j] = 1;
                        queue.push_back(j);
                    }
                }
            }
        }

        for (std::size_t i = 0; i < n; ++i)
            if (keep[i] && has_median[i]) work.values[i] = medians[i];
    }

    if (params.blur_kernel > 1)
        work = blur(work, BlurMethod::gaussian, params.blur_kernel, params.blur_sigma);
    return work;
}

Grid preprocess(const Grid& grid, const PreprocParams& params) {
    params.validate();
    Grid out = grid;
    if (params.avg_kernel > 0) out = blur(out, BlurMethod::average, params.avg_kernel);
    if (params.median_kernel > 0) out = blur(out, BlurMethod::median, params.median_kernel);
    if (params.gauss_kernel > 0)
        out = blur(out, BlurMethod::gaussian, params.gauss_kernel, params.gauss_sigma);
    if (params.deng) out = deng_correct(out, *params.deng);
    return out;
}

} // namespace treemap
