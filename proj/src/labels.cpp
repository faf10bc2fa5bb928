#include "treemap/labels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "treemap/util.hpp"

namespace treemap {

PolygonSet read_polygons_geojson(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    }

    PolygonSet out;
    if (doc.contains("crs_id") && doc["crs_id"].is_string())
        out.crs_id = doc["crs_id"].get<std::string>();

    auto add_ring = [&](const nlohmann::json& ring) {
        std::vector<PolygonSet::Vertex> verts;
        for (const auto& coord : ring) {
            if (!coord.is_array() || coord.size() < 2)
                throw DataError(path + ": ring coordinate is not an [x, y] pair");
            verts.push_back({coord[0].get<double>(), coord[1].get<double>()});
        }
        if (verts.size() >= 3) out.rings.push_back(std::move(verts));
    };
    auto add_polygon = [&](const nlohmann::json& coords) {
        for (const auto& ring : coords) add_ring(ring);
    };
    auto add_geometry = [&](const nlohmann::json& geom) {
        if (!geom.is_object() || !geom.contains("type")) return;
        std::string type = geom["type"].get<std::string>();
        if (type == "Polygon")
            add_polygon(geom["coordinates"]);
        else if (type == "MultiPolygon")
            for (const auto& poly : geom["coordinates"]) add_polygon(poly);
    };

    if (doc.value("type", "") == "FeatureCollection") {
        for (const auto& feature : doc["features"]) {
            if (feature.contains("geometry")) add_geometry(feature["geometry"]);
        }
    } else {
        add_geometry(doc);
    }
    return out;
}

bool point_in_ring(double x, double y, const std::vector<PolygonSet::Vertex>& ring) {
    std::size_t n = ring.size();
    if (n < 3) return false;
    // Skip an explicit closing vertex.
    if (ring.front().x == ring.back().x && ring.front().y == ring.back().y) --n;
    if (n < 3) return false;

    // Boundary first: point exactly on an edge counts as inside.
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = ring[i];
        const auto& b = ring[(i + 1) % n];
        double cross = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
        if (cross == 0.0 && x >= std::min(a.x, b.x) && x <= std::max(a.x, b.x) &&
            y >= std::min(a.y, b.y) && y <= std::max(a.y, b.y))
            return true;
    }

    bool inside = false;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = ring[i];
        const auto& b = ring[(i + 1) % n];
        if ((a.y > y) != (b.y > y)) {
            double xint = a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (x < xint) inside = !inside;
        }
    }
    return inside;
}

PointSet filter_points(const PointSet& points, const Grid& chm, const PolygonSet& polygons,
                       double min_height) {
    chm.validate();
    if (points.crs_id != chm.crs_id)
        throw DataError("filter_points: point/CHM crs mismatch ('" + points.crs_id + "' vs '" +
                        chm.crs_id + "')");
    if (!polygons.rings.empty() && !polygons.crs_id.empty() && polygons.crs_id != points.crs_id)
        throw DataError("filter_points: polygon crs mismatch ('" + polygons.crs_id + "' vs '" +
                        points.crs_id + "')");

    PointSet out;
    out.crs_id = points.crs_id;
    for (const Point& p : points.points) {
        int c = chm.col_at(p.x);
        int r = chm.row_at(p.y);
        if (!chm.in_bounds(c, r)) continue;
        float v = chm.at(c, r);
        if (chm.is_nodata(v) || v < min_height) continue;
        bool covered = false;
        for (const auto& ring : polygons.rings) {
            if (point_in_ring(p.x, p.y, ring)) {
                covered = true;
                break;
            }
        }
        if (!covered) out.points.push_back(p);
    }
    return out;
}

std::vector<GediRecord> read_gedi_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<GediRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1) {
            if (lower_copy(line) != "id,num_modes,sensitivity,rh98,lon,lat")
                throw DataError(path + ": expected header 'id,num_modes,sensitivity,rh98,lon,lat'");
            continue;
        }
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 6)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 6 fields");
        GediRecord rec;
        rec.id = fields[0];
        try {
            rec.num_modes = std::stoi(fields[1]);
            rec.sensitivity = std::stod(fields[2]);
            rec.rh98 = std::stod(fields[3]);
            rec.lon = std::stod(fields[4]);
            rec.lat = std::stod(fields[5]);
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": non-numeric field");
        }
        if (rec.num_modes < 0 || rec.sensitivity < 0.0 || rec.sensitivity > 1.0)
            throw DataError(path + ":" + std::to_string(lineno) + ": field out of range");
        out.push_back(std::move(rec));
    }
    return out;
}

void write_gedi_csv(const std::vector<GediRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "id,num_modes,sensitivity,rh98,lon,lat\n";
    char buf[160];
    for (const GediRecord& r : records) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.15g,%.15g,%.15g,%.15g", r.id.c_str(),
                      r.num_modes, r.sensitivity, r.rh98, r.lon, r.lat);
        out << buf << "\n";
    }
    if (!out) throw DataError("write failed for " + path);
}

std::vector<GediRecord> gedi_negative_filter(const std::vector<GediRecord>& records) {
    std::vector<GediRecord> out;
    for (const GediRecord& r : records) {
        if (r.num_modes == 1 && r.sensitivity > 0.9 && r.rh98 < 2.5) out.push_back(r);
    }
    return out;
}

namespace {

// Largest axis-aligned sub-rectangle of `rect` that avoids `cut`. Returns
// false when nothing of positive area remains.
bool subtract_overlap(const Frame& rect, const Frame& cut, Frame* out) {
    if (!rect.overlaps(cut)) {
        *out = rect;
        return true;
    }
    Frame best;
    double best_area = 0.0;
    auto consider = [&](double x0, double y0, double x1, double y1) {
        if (x1 <= x0 || y1 <= y0) return;
        double area = (x1 - x0) * (y1 - y0);
        if (area > best_area) {
            best_area = area;
            best = Frame{rect.id, x0, y0, x1, y1};
        }
    };
    consider(rect.min_x, rect.min_y, std::min(rect.max_x, cut.min_x), rect.max_y); // left
    consider(std::max(rect.min_x, cut.max_x), rect.min_y, rect.max_x, rect.max_y); // right
    consider(rect.min_x, rect.min_y, rect.max_x, std::min(rect.max_y, cut.min_y)); // below
    consider(rect.min_x, std::max(rect.min_y, cut.max_y), rect.max_x, rect.max_y); // above
    if (best_area <= 0.0) return false;
    *out = best;
    return true;
}

} // namespace

FrameSplit split_frames(const std::vector<Frame>& frames, double fraction, uint64_t seed) {
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw std::invalid_argument("split_frames: fraction must be in (0, 1)");
    if (frames.empty())
        throw std::invalid_argument("split_frames: no frames");
    for (const Frame& f : frames) f.validate();

    std::size_t n = frames.size();
    std::size_t k = static_cast<std::size_t>(std::ceil(fraction * n - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);

    // Seeded partial Fisher-Yates over the index array.
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + uniform_below(rng, n - i);
        std::swap(order[i], order[j]);
    }

    std::vector<bool> is_test(n, false);
    for (std::size_t i = 0; i < k; ++i) is_test[order[i]] = true;

    // Expand: anything overlapping a test frame becomes test, to fixpoint.
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (is_test[i]) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (!is_test[j]) continue;
                if (frames[i].overlaps(frames[j])) {
                    is_test[i] = true;
                    changed = true;
                    break;
                }
            }
        }
    }

    FrameSplit split;
    for (std::size_t i = 0; i < n; ++i)
        if (!is_test[i]) split.train.push_back(frames[i]);

    // Crop survivors against the train set. After the fixpoint expansion
    // this is normally a no-op; it guarantees the zero-overlap contract.
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_test[i]) continue;
        Frame rect = frames[i];
        bool alive = true;
        for (const Frame& tr : split.train) {
            if (!subtract_overlap(rect, tr, &rect)) {
                alive = false;
                break;
            }
        }
        if (alive) split.test.push_back(rect);
    }
    return split;
}

std::vector<Frame> read_frames_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<Frame> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1) {
            if (lower_copy(line) != "id,min_x,min_y,max_x,max_y")
                throw DataError(path + ": expected header 'id,min_x,min_y,max_x,max_y'");
            continue;
        }
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 5)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 5 fields");
        Frame f;
        f.id = fields[0];
        try {
            f.min_x = std::stod(fields[1]);
            f.min_y = std::stod(fields[2]);
            f.max_x = std::stod(fields[3]);
            f.max_y = std::stod(fields[4]);
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": non-numeric field");
        }
        try {
            f.validate();
        } catch (const std::invalid_argument& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(std::move(f));
    }
    return out;
}

void write_frames_csv(const std::vector<Frame>& frames, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "id,min_x,min_y,max_x,max_y\n";
    char buf[200];
    for (const Frame& f : frames) {
        std::snprintf(buf, sizeof(buf), "%s,%.15g,%.15g,%.15g,%.15g", f.id.c_str(), f.min_x,
                      f.min_y, f.max_x, f.max_y);
        out << buf << "\n";
    }
    if (!out) throw DataError("write failed for " + path);
}

StrategyReport choose_strategy(const PointSet& points, const Grid& chm) {
    chm.validate();
    if (points.size() < 3)
        throw std::invalid_argument("choose_strategy: need at least 3 points");

    StrategyReport report;
    std::size_t n = points.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = points.points[i];
        int c = chm.col_at(p.x);
        int r = chm.row_at(p.y);
        if (!chm.in_bounds(c, r)) continue;
        float h = chm.at(c, r);
        if (chm.is_nodata(h)) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const Point& q = points.points[j];
            double d2 = (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y);
            if (d2 < best) best = d2;
        }
        report.pairs.push_back({static_cast<double>(h), std::sqrt(best)});
    }

    std::size_t m = report.pairs.size();
    if (m < 2) {
        report.degenerate = true;
        return report;
    }
    double mean_h = 0.0, mean_d = 0.0;
    for (const auto& pr : report.pairs) {
        mean_h += pr.height;
        mean_d += pr.nn_distance;
    }
    mean_h /= m;
    mean_d /= m;
    double shh = 0.0, sdd = 0.0, shd = 0.0;
    for (const auto& pr : report.pairs) {
        double dh = pr.height - mean_h;
        double dd = pr.nn_distance - mean_d;
        shh += dh * dh;
        sdd += dd * dd;
        shd += dh * dd;
    }
    if (shh == 0.0 || sdd == 0.0) {
        report.degenerate = true;
        return report;
    }
    report.pearson_r = shd / std::sqrt(shh * sdd);
    report.recommendation =
        report.pearson_r >= 0.3 ? DetectionMode::adaptive : DetectionMode::fixed;
    return report;
}

} // namespace treemap
