#ifndef TREEMAP_LABELS_HPP
#define TREEMAP_LABELS_HPP

#include <string>
#include <vector>

#include "treemap/grid.hpp"
#include "treemap/peakdetect.hpp"
#include "treemap/points.hpp"

namespace treemap {

// Flat list of polygon rings (building footprints). Rings are independent;
// a point inside or on the boundary of any ring counts as covered. The
// even-odd rule handles self-intersecting rings; closure is implicit when
// the first vertex is not repeated at the end.
struct PolygonSet {
    struct Vertex {
        double x, y;
    };
    std::vector<std::vector<Vertex>> rings;
    std::string crs_id;
};

PolygonSet read_polygons_geojson(const std::string& path);

// Even-odd containment with boundary counting as inside.
bool point_in_ring(double x, double y, const std::vector<PolygonSet::Vertex>& ring);

// Drops detections that fall on buildings or have a CHM value below
// min_height (or nodata) at their containing pixel. Survivor order is
// preserved. v >= min_height keeps the point.
PointSet filter_points(const PointSet& points, const Grid& chm, const PolygonSet& polygons,
                       double min_height);

// One record per GEDI 2A footprint, pre-extracted to a flat table.
struct GediRecord {
    std::string id;
    int num_modes = 0;
    double sensitivity = 0.0; // [0, 1]
    double rh98 = 0.0;        // meters
    double lon = 0.0;
    double lat = 0.0;
};

std::vector<GediRecord> read_gedi_csv(const std::string& path);
void write_gedi_csv(const std::vector<GediRecord>& records, const std::string& path);

// Keeps footprints usable as treeless negatives: exactly one detected mode
// (the ground), sensitivity strictly above 0.9 and RH98 strictly below
// 2.5 m. Order preserved.
std::vector<GediRecord> gedi_negative_filter(const std::vector<GediRecord>& records);

// Train/test split of acquisition frames. Seeded sample of
// ceil(fraction * n) initial test frames, expansion of the test set to the
// fixpoint of "any frame overlapping a test frame becomes test", then each
// test frame is cropped against every remaining train frame (largest
// remaining sub-rectangle) so no train/test pair has positive-area overlap.
// Test frames reduced to zero area are dropped.
struct FrameSplit {
    std::vector<Frame> train;
    std::vector<Frame> test;
};

FrameSplit split_frames(const std::vector<Frame>& frames, double fraction, uint64_t seed);

std::vector<Frame> read_frames_csv(const std::string& path);
void write_frames_csv(const std::vector<Frame>& frames, const std::string& path);

// Height vs intercenter-distance analysis used to pick the detection mode.
// For every label with a valid CHM pixel: the CHM height there and the
// distance to its nearest other label. A Pearson correlation of at least
// 0.3 recommends height-adaptive detection.
struct StrategyReport {
    struct Pair {
        double height;
        double nn_distance;
    };
    std::vector<Pair> pairs;
    double pearson_r = 0.0;
    bool degenerate = false; // correlation undefined (zero variance or < 2 pairs)
    DetectionMode recommendation = DetectionMode::fixed;
};

StrategyReport choose_strategy(const PointSet& points, const Grid& chm);

} // namespace treemap

#endif
