#ifndef TREEMAP_POINTS_HPP
#define TREEMAP_POINTS_HPP

#include <string>
#include <vector>

namespace treemap {

// A tree center in world coordinates. value carries whatever the producing
// grid held at that spot: height in meters for CHM peaks, confidence for
// heatmap peaks.
struct Point {
    double x = 0.0;
    double y = 0.0;
    double value = 0.0;
};

struct PointSet {
    std::vector<Point> points;
    std::string crs_id;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

// CSV with header "x,y,value". crs_id is not stored in the file; callers
// pass it through when it matters.
PointSet read_points_csv(const std::string& path);
void write_points_csv(const PointSet& points, const std::string& path);

// GeoJSON FeatureCollection of Point features with a "value" property.
void write_points_geojson(const PointSet& points, const std::string& path);

} // namespace treemap

#endif
