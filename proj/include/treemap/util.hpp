#ifndef TREEMAP_UTIL_HPP
#define TREEMAP_UTIL_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace treemap {

// Configuration problems (bad keys, invalid parameter combinations supplied
// by the user). The CLI maps these to exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Problems with input data (missing files, malformed headers, geometry
// mismatches). The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Global cap on worker threads. 0 means hardware concurrency.
// All parallel operations must produce output independent of this value.
void set_max_threads(int n);
int max_threads();

// Runs fn(begin, end) over contiguous chunks of [0, count). Chunk boundaries
// depend on the thread count, so fn must only write to per-index slots or
// produce per-chunk results that the caller combines in index order.
void parallel_chunks(int64_t count, const std::function<void(int64_t, int64_t)>& fn);

// Deterministic uniform integer in [0, n), built on the raw 64-bit stream so
// results do not depend on the standard library's distribution internals.
template <class Rng>
uint64_t uniform_below(Rng& rng, uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be > 0");
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

// Uniform double in [0, 1) with 53 random bits.
template <class Rng>
double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string lower_copy(std::string s);

} // namespace treemap

#endif
