#include "treemap/peakdetect.hpp"

#include <algorithm>
#include <cmath>

#include "treemap/util.hpp"

namespace treemap {

void DetectionParams::validate() const {
    if (!std::isfinite(threshold))
        throw std::invalid_argument("detect: threshold must be finite");
    if (mode == DetectionMode::fixed) {
        if (!(window > 0.0))
            throw std::invalid_argument("detect: fixed window must be > 0");
    } else {
        if (!(window_min > 0.0) || !(window_max > 0.0))
            throw std::invalid_argument("detect: adaptive windows must be > 0");
        if (window_min > window_max)
            throw std::invalid_argument("detect: window_min must be <= window_max");
        if (!(height_factor > 0.0))
            throw std::invalid_argument("detect: height_factor must be > 0");
    }
}

double window_radius(double value, const DetectionParams& params) {
    params.validate();
    if (params.mode == DetectionMode::fixed) return params.window / 2.0;
    return std::clamp(params.height_factor * value, params.window_min, params.window_max) / 2.0;
}

namespace {

struct Candidate {
    float value;
    int64_t index; // row-major
};

} // namespace

PointSet detect_peaks(const Grid& grid, const DetectionParams& params) {
    grid.validate();
    params.validate();
    if (grid.width == 0 || grid.height == 0)
        throw std::invalid_argument("detect_peaks: empty grid");

    float threshold = static_cast<float>(params.threshold);

    // Candidate collection, chunked by rows with results stitched in row
    // order so the candidate list never depends on the thread count.
    std::vector<std::vector<Candidate>> chunks;
    {
        int rows = grid.height;
        int nchunks = std::min(max_threads(), rows);
        chunks.resize(nchunks);
        int64_t per = (rows + nchunks - 1) / nchunks;
        parallel_chunks(nchunks, [&](int64_t t0, int64_t t1) {
            for (int64_t t = t0; t < t1; ++t) {
                int64_t rbegin = t * per;
                int64_t rend = std::min<int64_t>(rbegin + per, rows);
                auto& local = chunks[t];
                for (int64_t r = rbegin; r < rend; ++r) {
                    for (int c = 0; c < grid.width; ++c) {
                        float v = grid.at(c, static_cast<int>(r));
                        if (!grid.is_nodata(v) && v >= threshold)
                            local.push_back({v, r * grid.width + c});
                    }
                }
            }
        });
    }
    std::vector<Candidate> candidates;
    for (auto& ch : chunks) candidates.insert(candidates.end(), ch.begin(), ch.end());

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.index < b.index;
    });

    double max_radius_m = params.mode == DetectionMode::fixed ? params.window / 2.0
                                                              : params.window_max / 2.0;
    double ps = grid.pixel_size;

    // Accepted points live in a uniform bucket grid with pitch >= the
    // largest suppression radius, so a 3x3 bucket scan covers any query.
    int bucket_px = std::max(1, static_cast<int>(std::ceil(max_radius_m / ps)));
    int bw = (grid.width + bucket_px - 1) / bucket_px;
    int bh = (grid.height + bucket_px - 1) / bucket_px;
    std::vector<std::vector<std::pair<int, int>>> buckets(static_cast<std::size_t>(bw) * bh);

    PointSet out;
    out.crs_id = grid.crs_id;

    for (const Candidate& cand : candidates) {
        int c = static_cast<int>(cand.index % grid.width);
        int r = static_cast<int>(cand.index / grid.width);
        double radius_m = window_radius(cand.value, params);
        double radius2_px = (radius_m / ps) * (radius_m / ps);

        int bc = c / bucket_px, br = r / bucket_px;
        bool blocked = false;
        for (int by = std::max(0, br - 1); by <= std::min(bh - 1, br + 1) && !blocked; ++by) {
            for (int bx = std::max(0, bc - 1); bx <= std::min(bw - 1, bc + 1) && !blocked; ++bx) {
                for (const auto& [qc, qr] : buckets[static_cast<std::size_t>(by) * bw + bx]) {
                    double dx = qc - c, dy = qr - r;
                    if (dx * dx + dy * dy <= radius2_px) {
                        blocked = true;
                        break;
                    }
                }
            }
        }
        if (blocked) continue;

        buckets[static_cast<std::size_t>(br) * bw + bc].emplace_back(c, r);
        out.points.push_back({grid.center_x(c), grid.center_y(r), static_cast<double>(cand.value)});
    }
    return out;
}

} // namespace treemap
