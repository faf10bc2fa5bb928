#include "treemap/util.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>

namespace treemap {

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int n) {
    g_max_threads.store(n < 0 ? 0 : n);
}

int max_threads() {
    int n = g_max_threads.load();
    if (n > 0) return n;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(int64_t count, const std::function<void(int64_t, int64_t)>& fn) {
    if (count <= 0) return;
    int threads = std::min<int64_t>(max_threads(), count);
    if (threads <= 1) {
        fn(0, count);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    int64_t chunk = (count + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        int64_t begin = t * chunk;
        int64_t end = std::min<int64_t>(begin + chunk, count);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& th : pool) th.join();
}

std::string lower_copy(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace treemap
