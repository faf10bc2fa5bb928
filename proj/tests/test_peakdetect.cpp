#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "support/testutil.hpp"
#include "treemap/peakdetect.hpp"
#include "treemap/util.hpp"

using namespace treemap;
using treemap::testing::random_grid;

namespace {

Grid flat(int w, int h, double ps, float v) { return Grid::filled(w, h, 0.0, h * ps, ps, v); }

void add_bump(Grid& g, int col, int row, float peak, double sigma_px) {
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) {
            double d2 = double(c - col) * (c - col) + double(r - row) * (r - row);
            g.at(c, r) += peak * static_cast<float>(std::exp(-d2 / (2 * sigma_px * sigma_px)));
        }
}

DetectionParams fixed_params(double threshold, double window) {
    DetectionParams p;
    p.mode = DetectionMode::fixed;
    p.threshold = threshold;
    p.window = window;
    return p;
}

} // namespace

TEST_CASE("window radius arithmetic") {
    CHECK(window_radius(99.0, fixed_params(0, 10)) == 5.0);
    DetectionParams a;
    a.mode = DetectionMode::adaptive;
    a.threshold = 0.0;
    a.window_min = 2.0;
    a.window_max = 8.0;
    a.height_factor = 0.5;
    CHECK(window_radius(0.0, a) == 1.0);    // clamp floor
    CHECK(window_radius(20.0, a) == 4.0);   // clamp ceiling: 10 -> 8
    CHECK(window_radius(1000.0, a) == 4.0);
    CHECK(window_radius(10.0, a) == 2.5);
}

TEST_CASE("single bump gives exactly one point at its pixel center") {
    Grid g = flat(32, 32, 1.0, 0.0f);
    add_bump(g, 16, 12, 10.0f, 2.0);
    PointSet out = detect_peaks(g, fixed_params(2.0, 9.0));
    REQUIRE(out.size() == 1);
    CHECK(out.points[0].x == doctest::Approx(g.center_x(16)));
    CHECK(out.points[0].y == doctest::Approx(g.center_y(12)));
    CHECK(out.points[0].value == doctest::Approx(10.0).epsilon(1e-3));
}

TEST_CASE("two bumps farther apart than the window both survive") {
    Grid g = flat(64, 16, 1.0, 0.0f);
    add_bump(g, 10, 8, 10.0f, 2.0);
    add_bump(g, 40, 8, 8.0f, 2.0); // 30 m apart, window 9 m
    PointSet out = detect_peaks(g, fixed_params(2.0, 9.0));
    CHECK(out.size() == 2);
    // descending value order
    CHECK(out.points[0].value > out.points[1].value);
}

TEST_CASE("boundary distance suppresses") {
    // Two candidates 4 px apart at 1 m/px: radius 4 blocks the weaker one,
    // radius just below 4 keeps both.
    Grid g = flat(16, 5, 1.0, 0.0f);
    g.at(4, 2) = 10.0f;
    g.at(8, 2) = 9.0f;
    CHECK(detect_peaks(g, fixed_params(5.0, 8.0)).size() == 1);
    CHECK(detect_peaks(g, fixed_params(5.0, 7.98)).size() == 2);
}

TEST_CASE("value ties break to the lower row-major index") {
    Grid g = flat(16, 5, 1.0, 0.0f);
    g.at(4, 2) = 10.0f;
    g.at(8, 2) = 10.0f;
    PointSet out = detect_peaks(g, fixed_params(5.0, 9.0));
    REQUIRE(out.size() == 1);
    CHECK(out.points[0].x == doctest::Approx(g.center_x(4)));
}

TEST_CASE("windows are measured in meters, not pixels") {
    // Same two-peak layout at 0.5 m/px: 4 px = 2 m, inside a 6 m window.
    Grid g = flat(16, 5, 0.5, 0.0f);
    g.at(4, 2) = 10.0f;
    g.at(8, 2) = 9.0f;
    CHECK(detect_peaks(g, fixed_params(5.0, 6.0)).size() == 1);
    CHECK(detect_peaks(g, fixed_params(5.0, 3.5)).size() == 2);
}

TEST_CASE("adaptive radius uses the candidate's own value") {
    // Strong peak accepted first; a weak neighbor 6 m away is kept or
    // dropped by *its* window, not the strong peak's.
    Grid g = flat(32, 7, 1.0, 0.0f);
    g.at(10, 3) = 30.0f;
    g.at(16, 3) = 4.0f;
    DetectionParams p;
    p.mode = DetectionMode::adaptive;
    p.threshold = 2.0;
    p.window_min = 2.0;
    p.window_max = 40.0;
    p.height_factor = 1.0;
    // weak candidate: window 4 m -> radius 2 < 6, survives despite the
    // strong peak's 15 m radius
    PointSet out = detect_peaks(g, p);
    CHECK(out.size() == 2);

    p.window_min = 14.0; // weak candidate's own radius now 7 >= 6, blocked
    out = detect_peaks(g, p);
    CHECK(out.size() == 1);
}

TEST_CASE("every output value is at or above the threshold") {
    std::mt19937_64 rng(21);
    Grid g = random_grid(rng, 48, 48, 1.0, 0.0f, 10.0f, 0.05);
    PointSet out = detect_peaks(g, fixed_params(6.0, 5.0));
    CHECK(!out.empty());
    for (const Point& pt : out.points) CHECK(pt.value >= 6.0);
}

TEST_CASE("greedy order replay matches the output") {
    // Replaying the contract by hand: sort candidates, accept greedily.
    std::mt19937_64 rng(22);
    Grid g = random_grid(rng, 40, 40, 1.0, 0.0f, 10.0f);
    DetectionParams p = fixed_params(5.0, 7.0);
    PointSet out = detect_peaks(g, p);

    struct Cand {
        float v;
        int64_t idx;
    };
    std::vector<Cand> cands;
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) {
            float v = g.at(c, r);
            if (!g.is_nodata(v) && v >= 5.0f) cands.push_back({v, int64_t(r) * g.width + c});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.v != b.v) return a.v > b.v;
        return a.idx < b.idx;
    });
    std::vector<std::pair<double, double>> accepted;
    for (const Cand& cand : cands) {
        int c = static_cast<int>(cand.idx % g.width);
        int r = static_cast<int>(cand.idx / g.width);
        double x = g.center_x(c), y = g.center_y(r);
        double radius = window_radius(cand.v, p);
        bool blocked = false;
        for (auto [ax, ay] : accepted)
            if (std::hypot(ax - x, ay - y) <= radius) blocked = true;
        if (!blocked) accepted.emplace_back(x, y);
    }
    REQUIRE(out.size() == accepted.size());
    for (std::size_t i = 0; i < accepted.size(); ++i) {
        CHECK(out.points[i].x == accepted[i].first);
        CHECK(out.points[i].y == accepted[i].second);
    }
}

TEST_CASE("raising the threshold never adds points") {
    std::mt19937_64 rng(23);
    for (int it = 0; it < 10; ++it) {
        Grid g = random_grid(rng, 24, 24, 1.0, 0.0f, 10.0f);
        // distinct values guarantee a stable greedy order between runs
        std::set<float> seen;
        for (auto& v : g.values)
            while (!seen.insert(v).second) v = std::nextafter(v, 1e9f);
        DetectionParams lo = fixed_params(4.0, 6.0);
        DetectionParams hi = fixed_params(6.5, 6.0);
        PointSet a = detect_peaks(g, lo);
        PointSet b = detect_peaks(g, hi);
        std::set<std::pair<double, double>> apos;
        for (const Point& pt : a.points) apos.insert({pt.x, pt.y});
        for (const Point& pt : b.points) CHECK(apos.count({pt.x, pt.y}) == 1);
    }
}

TEST_CASE("k isolated bumps give k points") {
    Grid g = flat(96, 96, 1.0, 0.0f);
    int k = 0;
    for (int r = 12; r < 96; r += 24)
        for (int c = 12; c < 96; c += 24) {
            add_bump(g, c, r, 8.0f + (c + r) % 5, 1.5);
            ++k;
        }
    PointSet out = detect_peaks(g, fixed_params(3.0, 12.0));
    CHECK(static_cast<int>(out.size()) == k);
}

TEST_CASE("results are independent of the thread cap") {
    std::mt19937_64 rng(24);
    Grid g = random_grid(rng, 64, 64, 1.0, 0.0f, 10.0f, 0.02);
    DetectionParams p = fixed_params(5.0, 6.0);
    set_max_threads(1);
    PointSet a = detect_peaks(g, p);
    set_max_threads(7);
    PointSet b = detect_peaks(g, p);
    set_max_threads(0);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.points[i].x == b.points[i].x);
        CHECK(a.points[i].y == b.points[i].y);
        CHECK(a.points[i].value == b.points[i].value);
    }
}

TEST_CASE("nodata cells are never candidates") {
    Grid g = flat(8, 8, 1.0, 0.0f);
    g.at(3, 3) = g.nodata;
    g.at(5, 5) = 7.0f;
    PointSet out = detect_peaks(g, fixed_params(1.0, 2.0));
    REQUIRE(out.size() == 1);
    CHECK(out.points[0].value == 7.0);
}

TEST_CASE("parameter validation") {
    Grid g = flat(4, 4, 1.0, 1.0f);
    DetectionParams p = fixed_params(1.0, 0.0);
    CHECK_THROWS_AS(detect_peaks(g, p), std::invalid_argument);
    DetectionParams a;
    a.mode = DetectionMode::adaptive;
    a.window_min = 5.0;
    a.window_max = 3.0;
    a.height_factor = 1.0;
    CHECK_THROWS_AS(detect_peaks(g, a), std::invalid_argument);
    Grid empty;
    CHECK_THROWS_AS(detect_peaks(empty, fixed_params(1, 2)), std::invalid_argument);
}
