#include "treemap/grid.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "treemap/util.hpp"

namespace treemap {

Grid Grid::filled(int width, int height, double origin_x, double origin_y,
                  double pixel_size, float fill, std::string crs_id) {
    Grid g;
    g.width = width;
    g.height = height;
    g.origin_x = origin_x;
    g.origin_y = origin_y;
    g.pixel_size = pixel_size;
    g.crs_id = std::move(crs_id);
    g.values.assign(static_cast<std::size_t>(width) * height, fill);
    g.validate();
    return g;
}

void Grid::validate() const {
    if (width < 0 || height < 0)
        throw std::invalid_argument("Grid: negative dimensions");
    if (!(pixel_size > 0.0))
        throw std::invalid_argument("Grid: pixel_size must be > 0");
    if (values.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("Grid: value count does not match width*height");
}

void Frame::validate() const {
    if (!(min_x < max_x) || !(min_y < max_y))
        throw std::invalid_argument("Frame: min must be strictly below max on both axes");
}

namespace {

constexpr char kRawMagic[4] = {'R', 'G', 'R', 'D'};
constexpr uint8_t kRawVersion = 1;

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

uint32_t to_le_bits(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    return bits;
}

float from_le_bits(uint32_t bits) {
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

Grid read_asc(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);

    Grid g;
    double xll = 0.0, yll = 0.0;
    bool has_nodata = false;
    double file_nodata = 0.0;
    int ncols = -1, nrows = -1;
    bool has_cell = false;

    // Header: key/value pairs until the first token that parses as a number.
    std::string token;
    bool pending = false;
    while (in >> token) {
        std::string key = lower_copy(token);
        if (key == "ncols") {
            if (!(in >> ncols)) throw DataError(path + ": malformed ncols");
        } else if (key == "nrows") {
            if (!(in >> nrows)) throw DataError(path + ": malformed nrows");
        } else if (key == "xllcorner") {
            if (!(in >> xll)) throw DataError(path + ": malformed xllcorner");
        } else if (key == "yllcorner") {
            if (!(in >> yll)) throw DataError(path + ": malformed yllcorner");
        } else if (key == "cellsize") {
            if (!(in >> g.pixel_size)) throw DataError(path + ": malformed cellsize");
            has_cell = true;
        } else if (key == "nodata_value") {
            if (!(in >> file_nodata)) throw DataError(path + ": malformed NODATA_value");
            has_nodata = true;
        } else {
            pending = true; // first payload token
            break;
        }
    }
    if (ncols <= 0 || nrows <= 0 || !has_cell || !(g.pixel_size > 0.0))
        throw DataError(path + ": incomplete or malformed ASC header");

    g.width = ncols;
    g.height = nrows;
    g.origin_x = xll;
    g.origin_y = yll + nrows * g.pixel_size;
    g.values.reserve(static_cast<std::size_t>(ncols) * nrows);

    auto push_value = [&](const std::string& tok) {
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
            throw DataError(path + ": non-numeric cell value '" + tok + "'");
        float f = static_cast<float>(v);
        if (has_nodata && v == file_nodata) f = g.nodata;
        g.values.push_back(f);
    };

    if (pending) push_value(token);
    while (in >> token) push_value(token);

    if (g.values.size() != static_cast<std::size_t>(ncols) * nrows)
        throw DataError(path + ": expected " + std::to_string((std::size_t)ncols * nrows) +
                        " values, got " + std::to_string(g.values.size()));
    return g;
}

void write_asc(const Grid& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);

    bool sentinel_nan = std::isnan(g.nodata);
    double file_nodata = sentinel_nan ? -9999.0 : g.nodata;

    char buf[64];
    out << "ncols " << g.width << "\n";
    out << "nrows " << g.height << "\n";
    std::snprintf(buf, sizeof(buf), "%.15g", g.origin_x);
    out << "xllcorner " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.15g", g.origin_y - g.height * g.pixel_size);
    out << "yllcorner " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.15g", g.pixel_size);
    out << "cellsize " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.15g", file_nodata);
    out << "NODATA_value " << buf << "\n";

    for (int r = 0; r < g.height; ++r) {
        for (int c = 0; c < g.width; ++c) {
            float v = g.at(c, r);
            if (g.is_nodata(v)) {
                std::snprintf(buf, sizeof(buf), "%.15g", file_nodata);
            } else {
                std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
            }
            out << buf << (c + 1 == g.width ? "" : " ");
        }
        out << "\n";
    }
    if (!out) throw DataError("write failed for " + path);
}

Grid read_raw(const std::string& path) {
    std::ifstream side(path + ".json");
    if (!side) throw DataError("cannot open sidecar " + path + ".json");
    nlohmann::json meta;
    try {
        side >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ".json: " + e.what());
    }

    Grid g;
    try {
        g.width = meta.at("width").get<int>();
        g.height = meta.at("height").get<int>();
        g.origin_x = meta.at("origin_x").get<double>();
        g.origin_y = meta.at("origin_y").get<double>();
        g.pixel_size = meta.at("pixel_size").get<double>();
        if (meta.contains("crs_id") && !meta["crs_id"].is_null())
            g.crs_id = meta["crs_id"].get<std::string>();
        if (meta.contains("nodata") && !meta["nodata"].is_null())
            g.nodata = meta["nodata"].get<float>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ".json: " + e.what());
    }
    if (g.width <= 0 || g.height <= 0 || !(g.pixel_size > 0.0))
        throw DataError(path + ".json: bad geometry");

    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char magic[4];
    uint8_t version = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 1);
    if (!in || std::memcmp(magic, kRawMagic, 4) != 0)
        throw DataError(path + ": bad magic, not a rawgrid file");
    if (version != kRawVersion)
        throw DataError(path + ": unsupported rawgrid version " + std::to_string(version));

    std::size_t count = static_cast<std::size_t>(g.width) * g.height;
    std::vector<unsigned char> bytes(count * 4);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size())
        throw DataError(path + ": payload shorter than declared dimensions");
    char extra;
    if (in.read(&extra, 1))
        throw DataError(path + ": payload longer than declared dimensions");

    g.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        uint32_t bits = static_cast<uint32_t>(bytes[i * 4]) |
                        static_cast<uint32_t>(bytes[i * 4 + 1]) << 8 |
                        static_cast<uint32_t>(bytes[i * 4 + 2]) << 16 |
                        static_cast<uint32_t>(bytes[i * 4 + 3]) << 24;
        g.values[i] = from_le_bits(bits);
    }
    return g;
}

void write_raw(const Grid& g, const std::string& path) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write " + path);
        out.write(kRawMagic, 4);
        out.write(reinterpret_cast<const char*>(&kRawVersion), 1);
        std::vector<unsigned char> bytes;
        bytes.reserve(g.values.size() * 4);
        for (float v : g.values) {
            uint32_t bits = to_le_bits(v);
            bytes.push_back(static_cast<unsigned char>(bits & 0xff));
            bytes.push_back(static_cast<unsigned char>((bits >> 8) & 0xff));
            bytes.push_back(static_cast<unsigned char>((bits >> 16) & 0xff));
            bytes.push_back(static_cast<unsigned char>((bits >> 24) & 0xff));
        }
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("write failed for " + path);
    }
    nlohmann::json meta;
    meta["width"] = g.width;
    meta["height"] = g.height;
    meta["origin_x"] = g.origin_x;
    meta["origin_y"] = g.origin_y;
    meta["pixel_size"] = g.pixel_size;
    meta["crs_id"] = g.crs_id;
    if (std::isnan(g.nodata))
        meta["nodata"] = nullptr;
    else
        meta["nodata"] = g.nodata;
    std::ofstream side(path + ".json");
    if (!side) throw DataError("cannot write " + path + ".json");
    side << meta.dump(2) << "\n";
    if (!side) throw DataError("write failed for " + path + ".json");
}

} // namespace

Grid read_grid(const std::string& path) {
    Grid g;
    if (ends_with(lower_copy(path), ".asc"))
        g = read_asc(path);
    else if (ends_with(lower_copy(path), ".rawgrid"))
        g = read_raw(path);
    else
        throw DataError(path + ": unknown grid extension (want .asc or .rawgrid)");
    g.validate();
    return g;
}

void write_grid(const Grid& grid, const std::string& path, GridFormat format) {
    grid.validate();
    if (format == GridFormat::asc)
        write_asc(grid, path);
    else
        write_raw(grid, path);
}

Grid resample_nearest(const Grid& grid, double target_pixel_size) {
    grid.validate();
    if (!(target_pixel_size > 0.0))
        throw std::invalid_argument("resample_nearest: target_pixel_size must be > 0");

    double extent_x = grid.width * grid.pixel_size;
    double extent_y = grid.height * grid.pixel_size;
    int out_w = static_cast<int>(std::floor(extent_x / target_pixel_size + 1e-9));
    int out_h = static_cast<int>(std::floor(extent_y / target_pixel_size + 1e-9));
    if (out_w < 1 || out_h < 1)
        throw DataError("resample_nearest: output would have zero pixels");

    Grid out = Grid::filled(out_w, out_h, grid.origin_x, grid.origin_y,
                            target_pixel_size, 0.0f, grid.crs_id);
    out.nodata = grid.nodata;

    // Containment treats pixel intervals as left-open/right-closed (ceil - 1
    // instead of floor), so an output center landing exactly on a shared
    // input boundary resolves to the lower-index pixel.
    auto contain = [](double offset, double ps, int limit) {
        int i = static_cast<int>(std::ceil(offset / ps)) - 1;
        return std::clamp(i, 0, limit - 1);
    };
    parallel_chunks(out_h, [&](int64_t r0, int64_t r1) {
        for (int64_t r = r0; r < r1; ++r) {
            double y = out.center_y(static_cast<int>(r));
            int src_r = contain(grid.origin_y - y, grid.pixel_size, grid.height);
            for (int c = 0; c < out_w; ++c) {
                double x = out.center_x(c);
                int src_c = contain(x - grid.origin_x, grid.pixel_size, grid.width);
                out.at(c, static_cast<int>(r)) = grid.at(src_c, src_r);
            }
        }
    });
    return out;
}

Grid median_stack(const std::vector<Grid>& grids) {
    if (grids.empty())
        throw std::invalid_argument("median_stack: need at least one grid");
    const Grid& first = grids.front();
    first.validate();
    for (const Grid& g : grids) {
        g.validate();
        if (!g.same_geometry(first))
            throw DataError("median_stack: grid geometry mismatch");
    }

    Grid out = first;
    std::size_t n = out.values.size();
    parallel_chunks(static_cast<int64_t>(n), [&](int64_t i0, int64_t i1) {
        std::vector<float> vals;
        vals.reserve(grids.size());
        for (int64_t i = i0; i < i1; ++i) {
            vals.clear();
            for (const Grid& g : grids) {
                float v = g.values[i];
                if (!g.is_nodata(v)) vals.push_back(v);
            }
            if (vals.empty()) {
                out.values[i] = out.nodata;
                continue;
            }
            std::sort(vals.begin(), vals.end());
            std::size_t k = vals.size();
            if (k % 2 == 1) {
                out.values[i] = vals[k / 2];
            } else {
                out.values[i] = static_cast<float>(
                    (static_cast<double>(vals[k / 2 - 1]) + vals[k / 2]) / 2.0);
            }
        }
    });
    return out;
}

} // namespace treemap
