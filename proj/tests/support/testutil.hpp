#ifndef TREEMAP_TESTS_TESTUTIL_HPP
#define TREEMAP_TESTS_TESTUTIL_HPP

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "treemap/grid.hpp"

namespace treemap::testing {

// Self-cleaning unique directory under the system temp root.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& dir() const { return dir_; }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

private:
    std::filesystem::path dir_;
};

// Grid of uniform values in [lo, hi) with an optional share of nodata
// cells, geometry fixed at origin (0, height * pixel_size).
Grid random_grid(std::mt19937_64& rng, int width, int height, double pixel_size, float lo,
                 float hi, double nodata_fraction = 0.0, const std::string& crs = "test:1");

} // namespace treemap::testing

#endif
