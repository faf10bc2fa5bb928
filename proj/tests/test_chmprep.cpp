#include <random>

#include "doctest.h"
#include "support/testutil.hpp"
#include "treemap/chmprep.hpp"

using namespace treemap;
using treemap::testing::random_grid;

namespace {

Grid uniform(int w, int h, float v) { return Grid::filled(w, h, 0.0, h, 1.0, v); }

} // namespace

TEST_CASE("blur leaves constant grids unchanged") {
    Grid g = uniform(7, 7, 5.0f);
    for (BlurMethod m : {BlurMethod::average, BlurMethod::median, BlurMethod::gaussian}) {
        Grid out = blur(g, m, 3, 1.0);
        for (float v : out.values) CHECK(v == doctest::Approx(5.0f));
    }
}

TEST_CASE("blur kernel 1 is the identity") {
    std::mt19937_64 rng(5);
    Grid g = random_grid(rng, 9, 6, 1.0, 0.0f, 20.0f, 0.1);
    for (BlurMethod m : {BlurMethod::average, BlurMethod::median, BlurMethod::gaussian}) {
        Grid out = blur(g, m, 1, 1.0);
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            if (g.is_nodata(g.values[i]))
                CHECK(out.is_nodata(out.values[i]));
            else
                CHECK(out.values[i] == g.values[i]);
        }
    }
}

TEST_CASE("median blur removes a single-pixel pit") {
    Grid g = uniform(3, 3, 10.0f);
    g.at(1, 1) = 0.0f;
    Grid out = blur(g, BlurMethod::median, 3);
    CHECK(out.at(1, 1) == 10.0f);
}

TEST_CASE("average blur window arithmetic with replicate padding") {
    // 3x3 grid, values = row-major 0..8; corner (0,0) window replicates
    // row/col 0: samples {0,0,1, 0,0,1, 3,3,4} mean = 12/9.
    Grid g = uniform(3, 3, 0.0f);
    for (int i = 0; i < 9; ++i) g.values[i] = static_cast<float>(i);
    Grid out = blur(g, BlurMethod::average, 3);
    CHECK(out.at(0, 0) == doctest::Approx(12.0 / 9.0));
    CHECK(out.at(1, 1) == doctest::Approx(4.0));
}

TEST_CASE("blur skips nodata samples and keeps nodata centers") {
    Grid g = uniform(3, 3, 6.0f);
    g.at(0, 0) = g.nodata;
    Grid out = blur(g, BlurMethod::average, 3);
    CHECK(out.is_nodata(out.at(0, 0)));
    CHECK(out.at(1, 1) == doctest::Approx(6.0)); // mean over the 8 valid samples
}

TEST_CASE("gaussian blur weights renormalize over present samples") {
    Grid g = uniform(5, 5, 4.0f);
    g.at(0, 0) = g.nodata;
    Grid out = blur(g, BlurMethod::gaussian, 3, 0.8);
    CHECK(out.at(1, 1) == doctest::Approx(4.0));
    CHECK(out.is_nodata(out.at(0, 0)));
}

TEST_CASE("blur validates arguments") {
    Grid g = uniform(3, 3, 1.0f);
    CHECK_THROWS_AS(blur(g, BlurMethod::average, 4), std::invalid_argument);
    CHECK_THROWS_AS(blur(g, BlurMethod::gaussian, 3, 0.0), std::invalid_argument);
}

TEST_CASE("blur preserves range for average and gaussian") {
    std::mt19937_64 rng(6);
    Grid g = random_grid(rng, 12, 12, 1.0, -3.0f, 17.0f, 0.05);
    float lo = 1e9f, hi = -1e9f;
    for (float v : g.values)
        if (!g.is_nodata(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    for (BlurMethod m : {BlurMethod::average, BlurMethod::gaussian}) {
        Grid out = blur(g, m, 5, 1.3);
        for (float v : out.values)
            if (!out.is_nodata(v)) {
                CHECK(v >= lo - 1e-4f);
                CHECK(v <= hi + 1e-4f);
            }
    }
}

TEST_CASE("pit correction fills a strong pit from the window median") {
    Grid g = uniform(5, 5, 20.0f);
    g.at(2, 2) = 2.0f;
    DengParams p; // kernel 3, high 10, low 5, steps 1, no blur
    Grid out = deng_correct(g, p);
    CHECK(out.at(2, 2) == 20.0f);
    for (float v : out.values) CHECK(v == 20.0f);
}

TEST_CASE("pit correction leaves sub-threshold dips alone") {
    Grid g = uniform(5, 5, 20.0f);
    g.at(2, 2) = 2.0f;
    DengParams p;
    p.high_threshold = 25.0;
    p.low_threshold = 22.0;
    Grid out = deng_correct(g, p);
    CHECK(out.at(2, 2) == 2.0f);
}

TEST_CASE("weak pits join only when connected to a strong pit") {
    // Two adjacent dips: one strong (m - v > high), one weak (m - v > low
    // only). The weak one is 8-connected to the strong one, so both fill.
    Grid g = uniform(7, 7, 20.0f);
    g.at(3, 3) = 2.0f;  // strong: median of neighbors 20, delta 18 > 10
    g.at(4, 3) = 13.0f; // weak: delta 7, between low 5 and high 10
    DengParams p;
    Grid out = deng_correct(g, p);
    CHECK(out.at(3, 3) > 15.0f);
    CHECK(out.at(4, 3) > 15.0f);

    // The same weak dip far from any strong pit stays untouched.
    Grid h = uniform(7, 7, 20.0f);
    h.at(5, 5) = 13.0f;
    Grid out2 = deng_correct(h, p);
    CHECK(out2.at(5, 5) == 13.0f);
}

TEST_CASE("pit correction never lowers a filled pixel") {
    std::mt19937_64 rng(8);
    Grid g = random_grid(rng, 16, 16, 1.0, 5.0f, 25.0f);
    for (int i = 0; i < 6; ++i) {
        int c = 2 + static_cast<int>(rng() % 12);
        int r = 2 + static_cast<int>(rng() % 12);
        g.at(c, r) -= 18.0f;
    }
    DengParams p;
    p.steps = 2;
    Grid out = deng_correct(g, p);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        bool changed = out.values[i] != g.values[i];
        if (changed) CHECK(out.values[i] > g.values[i]);
    }
}

TEST_CASE("preprocess composes the enabled stages in order") {
    std::mt19937_64 rng(10);
    Grid g = random_grid(rng, 10, 10, 1.0, 0.0f, 15.0f);

    PreprocParams none;
    Grid same = preprocess(g, none);
    CHECK(same.values == g.values);

    PreprocParams med;
    med.median_kernel = 3;
    Grid a = preprocess(g, med);
    Grid b = blur(g, BlurMethod::median, 3);
    CHECK(a.values == b.values);

    PreprocParams both;
    both.avg_kernel = 3;
    both.median_kernel = 5;
    Grid c = preprocess(g, both);
    Grid d = blur(blur(g, BlurMethod::average, 3), BlurMethod::median, 5);
    CHECK(c.values == d.values);
}

TEST_CASE("preprocess runs pit correction last") {
    Grid g = uniform(7, 7, 20.0f);
    g.at(3, 3) = 0.0f;
    PreprocParams p;
    p.deng = DengParams{};
    Grid out = preprocess(g, p);
    CHECK(out.at(3, 3) == 20.0f);
}

TEST_CASE("nodata mask survives every operator") {
    std::mt19937_64 rng(12);
    Grid g = random_grid(rng, 11, 9, 1.0, 0.0f, 30.0f, 0.2);
    PreprocParams p;
    p.avg_kernel = 3;
    p.median_kernel = 3;
    p.gauss_kernel = 3;
    p.gauss_sigma = 1.0;
    p.deng = DengParams{};
    Grid out = preprocess(g, p);
    for (std::size_t i = 0; i < g.values.size(); ++i)
        CHECK(g.is_nodata(g.values[i]) == out.is_nodata(out.values[i]));
}

TEST_CASE("parameter validation") {
    DengParams d;
    d.kernel = 4;
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
    DengParams e;
    e.low_threshold = 11.0;
    e.high_threshold = 10.0;
    CHECK_THROWS_AS(e.validate(), std::invalid_argument);
    PreprocParams p;
    p.gauss_kernel = 3;
    p.gauss_sigma = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
