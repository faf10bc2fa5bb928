#include "treemap/points.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "treemap/util.hpp"

namespace treemap {

namespace {

double parse_field(const std::string& field, const std::string& path, int line) {
    char* end = nullptr;
    double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0')
        throw DataError(path + ":" + std::to_string(line) + ": non-numeric field '" + field + "'");
    return v;
}

} // namespace

PointSet read_points_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);

    PointSet out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (lower_copy(line) != "x,y,value")
                throw DataError(path + ": expected header 'x,y,value', got '" + line + "'");
            continue;
        }
        std::istringstream ss(line);
        std::string fx, fy, fv;
        if (!std::getline(ss, fx, ',') || !std::getline(ss, fy, ',') || !std::getline(ss, fv))
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 fields");
        Point p;
        p.x = parse_field(fx, path, lineno);
        p.y = parse_field(fy, path, lineno);
        p.value = parse_field(fv, path, lineno);
        out.points.push_back(p);
    }
    return out;
}

void write_points_csv(const PointSet& points, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "x,y,value\n";
    char buf[128];
    for (const Point& p : points.points) {
        std::snprintf(buf, sizeof(buf), "%.15g,%.15g,%.15g", p.x, p.y, p.value);
        out << buf << "\n";
    }
    if (!out) throw DataError("write failed for " + path);
}

void write_points_geojson(const PointSet& points, const std::string& path) {
    nlohmann::json features = nlohmann::json::array();
    for (const Point& p : points.points) {
        nlohmann::json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Point"}, {"coordinates", {p.x, p.y}}};
        f["properties"] = {{"value", p.value}};
        features.push_back(std::move(f));
    }
    nlohmann::json fc;
    fc["type"] = "FeatureCollection";
    if (!points.crs_id.empty()) fc["crs_id"] = points.crs_id;
    fc["features"] = std::move(features);

    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << fc.dump(2) << "\n";
    if (!out) throw DataError("write failed for " + path);
}

} // namespace treemap
