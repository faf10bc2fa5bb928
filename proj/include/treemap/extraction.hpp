#ifndef TREEMAP_EXTRACTION_HPP
#define TREEMAP_EXTRACTION_HPP

#include <list>
#include <string>
#include <utility>

#include "treemap/chmprep.hpp"
#include "treemap/labels.hpp"
#include "treemap/peakdetect.hpp"

namespace treemap {

// The full pseudo-label pipeline record: the preprocessing chain plus the
// detection branch, 12 free parameters in fixed mode and 14 in adaptive
// mode.
struct ExtractionParams {
    PreprocParams preproc;
    DetectionParams detect;

    void validate() const;
};

// preprocess -> detect_peaks -> filter_points. The building/height filter
// reads heights from the preprocessed grid, the same surface the detector
// thresholded.
PointSet extract_points(const Grid& chm, const ExtractionParams& params,
                        const PolygonSet& polygons, double min_height);

// Bounded cache of preprocessed grids keyed by PreprocParams, for optimizer
// trials sharing the preprocessing chain. Keys ignore the source grid, so
// one cache instance must serve exactly one CHM. Returned references stay
// valid until the entry is evicted.
class PreprocCache {
public:
    explicit PreprocCache(std::size_t capacity = 8) : capacity_(capacity) {}

    const Grid& get(const Grid& chm, const PreprocParams& params);

private:
    std::size_t capacity_;
    std::list<std::pair<std::string, Grid>> entries_; // front = most recent
};

// Harmonic mean of F1 (one-to-one matching within max_dist) and counting
// accuracy of the extracted points against the calibration labels.
double extraction_objective(const Grid& chm, const PointSet& calib_labels,
                            const PolygonSet& polygons, double min_height,
                            const ExtractionParams& params, double max_dist = 5.0,
                            PreprocCache* cache = nullptr);

} // namespace treemap

#endif
