#include "support/testutil.hpp"

#include <unistd.h>

#include <atomic>

#include "treemap/util.hpp"

namespace treemap::testing {

namespace {
std::atomic<uint64_t> counter{0};
}

TempDir::TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    dir_ = base / ("treemap-" + tag + "-" + std::to_string(::getpid()) + "-" +
                   std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
}

Grid random_grid(std::mt19937_64& rng, int width, int height, double pixel_size, float lo,
                 float hi, double nodata_fraction, const std::string& crs) {
    Grid g = Grid::filled(width, height, 0.0, height * pixel_size, pixel_size, 0.0f, crs);
    for (auto& v : g.values) {
        if (nodata_fraction > 0.0 && uniform_unit(rng) < nodata_fraction) {
            v = g.nodata;
            continue;
        }
        v = lo + static_cast<float>(uniform_unit(rng)) * (hi - lo);
    }
    return g;
}

} // namespace treemap::testing
