#ifndef TREEMAP_GRID_HPP
#define TREEMAP_GRID_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace treemap {

// Georeferenced single-band raster of 32-bit reals, row-major, north-up,
// square pixels. (origin_x, origin_y) is the world position of the top-left
// corner of pixel (0, 0); y decreases with increasing row.
//
// A cell is missing if it is NaN or equals the nodata sentinel. The default
// sentinel is quiet NaN. Grids are treated as immutable values once built;
// every operation below returns a new grid.
struct Grid {
    int width = 0;
    int height = 0;
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_size = 1.0;
    std::vector<float> values;
    float nodata = std::numeric_limits<float>::quiet_NaN();
    std::string crs_id;

    static Grid filled(int width, int height, double origin_x, double origin_y,
                       double pixel_size, float fill, std::string crs_id = "");

    // Throws std::invalid_argument when the invariants do not hold.
    void validate() const;

    std::size_t cell(int col, int row) const {
        return static_cast<std::size_t>(row) * width + col;
    }
    float at(int col, int row) const { return values[cell(col, row)]; }
    float& at(int col, int row) { return values[cell(col, row)]; }

    bool is_nodata(float v) const { return std::isnan(v) || v == nodata; }
    bool valid_at(int col, int row) const { return !is_nodata(at(col, row)); }
    bool in_bounds(int col, int row) const {
        return col >= 0 && col < width && row >= 0 && row < height;
    }

    // Pixel center <-> world coordinates. col_at/row_at return the pixel
    // containing the given world coordinate (may be out of bounds).
    double center_x(int col) const { return origin_x + (col + 0.5) * pixel_size; }
    double center_y(int row) const { return origin_y - (row + 0.5) * pixel_size; }
    int col_at(double x) const { return static_cast<int>(std::floor((x - origin_x) / pixel_size)); }
    int row_at(double y) const { return static_cast<int>(std::floor((origin_y - y) / pixel_size)); }

    bool same_geometry(const Grid& other) const {
        return width == other.width && height == other.height &&
               origin_x == other.origin_x && origin_y == other.origin_y &&
               pixel_size == other.pixel_size && crs_id == other.crs_id;
    }
};

// Axis-aligned world rectangle, the extent of one CHM acquisition unit.
struct Frame {
    std::string id;
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    void validate() const;
    double area() const { return (max_x - min_x) * (max_y - min_y); }
    bool overlaps(const Frame& other) const {
        return min_x < other.max_x && other.min_x < max_x &&
               min_y < other.max_y && other.min_y < max_y;
    }
};

// File I/O. Format is picked from the extension: ".asc" is ESRI ASCII grid,
// ".rawgrid" is the binary format (magic "RGRD", version 1, little-endian
// float32 payload) with a ".rawgrid.json" sidecar carrying the geometry.
enum class GridFormat { asc, raw };

Grid read_grid(const std::string& path);
void write_grid(const Grid& grid, const std::string& path, GridFormat format);

// Nearest-neighbor resampling to a new pixel size. The output covers the
// same extent rounded down to whole pixels; each output pixel takes the
// value of the input pixel containing the output pixel's center.
Grid resample_nearest(const Grid& grid, double target_pixel_size);

// Pixel-wise median across grids of identical geometry. Missing cells are
// skipped; an even count takes the mean of the two middle values; a pixel
// missing everywhere stays nodata.
Grid median_stack(const std::vector<Grid>& grids);

} // namespace treemap

#endif
