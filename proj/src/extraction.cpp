#include "treemap/extraction.hpp"

#include <cstdio>
#include <stdexcept>

#include "treemap/evalmetrics.hpp"

namespace treemap {

void ExtractionParams::validate() const {
    preproc.validate();
    detect.validate();
}

PointSet extract_points(const Grid& chm, const ExtractionParams& params,
                        const PolygonSet& polygons, double min_height) {
    params.validate();
    Grid prepped = preprocess(chm, params.preproc);
    PointSet peaks = detect_peaks(prepped, params.detect);
    return filter_points(peaks, prepped, polygons, min_height);
}

namespace {

std::string preproc_key(const PreprocParams& p) {
    char buf[256];
    const DengParams d = p.deng.value_or(DengParams{});
    std::snprintf(buf, sizeof buf, "%d|%d|%d|%.17g|%d|%d|%d|%.17g|%.17g|%d|%.17g", p.avg_kernel,
                  p.median_kernel, p.gauss_kernel, p.gauss_sigma, p.deng.has_value() ? 1 : 0,
                  d.kernel, d.steps, d.high_threshold, d.low_threshold, d.blur_kernel,
                  d.blur_sigma);
    return buf;
}

} // namespace

const Grid& PreprocCache::get(const Grid& chm, const PreprocParams& params) {
    std::string key = preproc_key(params);
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->first == key) {
            entries_.splice(entries_.begin(), entries_, it);
            return entries_.front().second;
        }
    }
    entries_.emplace_front(std::move(key), preprocess(chm, params));
    if (entries_.size() > capacity_) entries_.pop_back();
    return entries_.front().second;
}

double extraction_objective(const Grid& chm, const PointSet& calib_labels,
                            const PolygonSet& polygons, double min_height,
                            const ExtractionParams& params, double max_dist,
                            PreprocCache* cache) {
    if (calib_labels.empty())
        throw std::invalid_argument("extraction_objective: calibration labels are empty");
    params.validate();
    Grid local;
    const Grid* prepped;
    if (cache) {
        prepped = &cache->get(chm, params.preproc);
    } else {
        local = preprocess(chm, params.preproc);
        prepped = &local;
    }
    PointSet peaks = detect_peaks(*prepped, params.detect);
    PointSet kept = filter_points(peaks, *prepped, polygons, min_height);
    Matching m = match_points(kept, calib_labels, max_dist);
    return detection_metrics(m, static_cast<int64_t>(kept.size()),
                             static_cast<int64_t>(calib_labels.size()))
        .objective;
}

} // namespace treemap
