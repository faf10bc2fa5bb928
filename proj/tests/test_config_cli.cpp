#include <fstream>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "json.hpp"
#include "support/synthetic.hpp"
#include "support/testutil.hpp"
#include "treemap/cli.hpp"
#include "treemap/config.hpp"
#include "treemap/grid.hpp"
#include "treemap/labels.hpp"
#include "treemap/points.hpp"
#include "treemap/util.hpp"

using namespace treemap;
using treemap::testing::TempDir;

namespace {

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("defaults carry the published constants") {
    PipelineConfig c;
    CHECK(c.heatmap.sigma_m == 4.0);
    CHECK(c.heatmap.delta == 0.2);
    CHECK(c.heatmap.pixel_size == 3.0);
    CHECK(c.eval.detect_max_dist == 15.0);
    CHECK(c.eval.calib_max_dist == 5.0);
    CHECK(c.eval.height_threshold == 3.0);
    CHECK(c.eval.window == 25.0);
    CHECK(c.min_height == 3.0);
    CHECK(c.optimizer.budget == 200);
    CHECK(c.optimizer.n_init == 20);
    CHECK(c.split.fraction == 0.02);
}

TEST_CASE("config text parses sections, comments, and quoted strings") {
    PipelineConfig c;
    apply_config_text(c,
                      "# comment\n"
                      "[run]\n"
                      "seed = 42\n"
                      "\n"
                      "[preproc]\n"
                      "median_kernel = 5 # trailing comment\n"
                      "[detect]\n"
                      "mode = \"adaptive\"\n"
                      "window_min = 4.5\n"
                      "[paths]\n"
                      "chm = \"/data/my file.asc\"\n"
                      "grids = [\"a.asc\", \"b.asc\"]\n",
                      "test");
    CHECK(c.seed == 42);
    CHECK(c.preproc.median_kernel == 5);
    CHECK(c.detect.mode == DetectionMode::adaptive);
    CHECK(c.detect.window_min == 4.5);
    CHECK(c.paths.chm == "/data/my file.asc");
    REQUIRE(c.paths.grids.size() == 2);
    CHECK(c.paths.grids[1] == "b.asc");
}

TEST_CASE("unknown sections and keys are rejected by name") {
    PipelineConfig c;
    CHECK_THROWS_WITH_AS(apply_config_text(c, "[nope]\nx = 1\n", "f"),
                         doctest::Contains("unknown section [nope]"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_text(c, "[run]\nbananas = 1\n", "f"),
                         doctest::Contains("unknown key run.bananas"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_text(c, "seed = 1\n", "f"),
                         doctest::Contains("outside a section"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_text(c, "[run]\nseed = banana\n", "f"),
                         doctest::Contains("f:2"), ConfigError);
}

TEST_CASE("type and value errors carry the source location") {
    PipelineConfig c;
    CHECK_THROWS_WITH_AS(apply_config_text(c, "[detect]\nmode = \"sideways\"\n", "cfg.toml"),
                         doctest::Contains("cfg.toml:2"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_text(c, "[optimize]\nbudget = 2.5\n", "cfg.toml"),
                         doctest::Contains("budget"), ConfigError);
}

TEST_CASE("truncation multiple accepts inf") {
    PipelineConfig c;
    apply_config_text(c, "[heatmap]\ntruncation_multiple = inf\n", "f");
    CHECK(std::isinf(c.heatmap.truncation_multiple));
}

TEST_CASE("apply_setting mirrors file keys") {
    PipelineConfig c;
    apply_setting(c, "decode.threshold=0.75");
    CHECK(c.decode.threshold == 0.75);
    apply_setting(c, "eval.thresholds=[0.1, 0.2]");
    REQUIRE(c.eval.thresholds.size() == 2);
    CHECK(c.eval.thresholds[1] == 0.2);
    CHECK_THROWS_AS(apply_setting(c, "decode.threshold"), ConfigError);
    CHECK_THROWS_AS(apply_setting(c, "nothing.x=1"), ConfigError);
}

TEST_CASE("dump and re-read reproduce the config") {
    PipelineConfig c;
    apply_config_text(c,
                      "[run]\nseed = 9\n[deng]\nenabled = true\nhigh_threshold = 12.5\n"
                      "[detect]\nmode = \"adaptive\"\nthreshold = 2.25\n"
                      "[heatmap]\ntruncation_multiple = inf\n"
                      "[eval]\nthresholds = [0.1, 0.5]\n"
                      "[paths]\nchm = \"x.asc\"\ngrids = [\"a\", \"b\"]\n",
                      "f");
    std::string dumped = dump_config(c);
    PipelineConfig back;
    apply_config_text(back, dumped, "dump");
    CHECK(dump_config(back) == dumped);
    CHECK(back.seed == 9);
    CHECK(back.deng_enabled);
    CHECK(back.deng.high_threshold == 12.5);
    CHECK(std::isinf(back.heatmap.truncation_multiple));
    CHECK(back.paths.grids.size() == 2);
}

TEST_CASE("extraction assembly honors the deng toggle") {
    PipelineConfig c;
    CHECK_FALSE(c.extraction().preproc.deng.has_value());
    apply_config_text(c, "[deng]\nenabled = true\nkernel = 5\n", "f");
    REQUIRE(c.extraction().preproc.deng.has_value());
    CHECK(c.extraction().preproc.deng->kernel == 5);
}

TEST_CASE("cli maps error classes to exit codes") {
    TempDir tmp("cli");
    CHECK(run({"--help"}) == 0);
    CHECK(run({"no-such-command"}) == 1);
    CHECK(run({}) == 1);

    // config error: unknown key
    write_file(tmp.path("bad.toml"), "[run]\nbananas = 1\n");
    CHECK(run({"--config", tmp.path("bad.toml"), "extract"}) == 1);

    // config error: required path missing
    CHECK(run({"extract"}) == 1);

    // data error: chm file absent
    write_file(tmp.path("cfg.toml"), "[paths]\nchm = \"" + tmp.path("absent.asc") +
                                         "\"\nout = \"" + tmp.path("out.csv") + "\"\n");
    CHECK(run({"--config", tmp.path("cfg.toml"), "extract"}) == 2);
}

TEST_CASE("extract pipeline runs end to end through the cli") {
    TempDir tmp("cli-extract");
    auto spec = treemap::testing::ForestSpec{};
    spec.width = 128;
    spec.height = 128;
    spec.trees = 12;
    spec.pits = 5;
    auto scene = treemap::testing::make_forest(spec, 31);
    write_grid(scene.chm, tmp.path("chm.asc"), GridFormat::asc);
    write_points_csv(scene.centers, tmp.path("labels.csv"));

    write_file(tmp.path("cfg.toml"),
               "[preproc]\nmedian_kernel = 3\n"
               "[deng]\nenabled = true\n"
               "[detect]\nmode = \"adaptive\"\nthreshold = 3\nwindow_min = 12\n"
               "window_max = 16\nheight_factor = 0.5\n"
               "[paths]\nchm = \"" + tmp.path("chm.asc") + "\"\n"
               "out = \"" + tmp.path("points.csv") + "\"\n");
    REQUIRE(run({"--config", tmp.path("cfg.toml"), "extract"}) == 0);
    PointSet pts = read_points_csv(tmp.path("points.csv"));
    CHECK(pts.size() == 12);

    // eval-det against the planted labels: perfect detection
    write_file(tmp.path("eval.toml"),
               "[paths]\npoints = \"" + tmp.path("points.csv") + "\"\n"
               "ref_points = \"" + tmp.path("labels.csv") + "\"\n"
               "out = \"" + tmp.path("report.json") + "\"\n"
               "[eval]\ndetect_max_dist = 5\n");
    REQUIRE(run({"--config", tmp.path("eval.toml"), "eval-det"}) == 0);
    auto report = nlohmann::json::parse(read_file(tmp.path("report.json")));
    CHECK(report["n_pred"] == 12);
    CHECK(report["n_ref"] == 12);
    CHECK(report["f1"] == 1.0);
    CHECK(report["objective"] == 1.0);
}

TEST_CASE("set overrides beat the config file and the seed flag wins") {
    TempDir tmp("cli-set");
    Grid g = Grid::filled(64, 64, 0.0, 64.0, 1.0, 10.0f, "c");
    g.at(10, 10) = 20.0f;
    g.at(40, 40) = 22.0f;
    write_grid(g, tmp.path("chm.asc"), GridFormat::asc);
    write_file(tmp.path("cfg.toml"), "[detect]\nmode = \"fixed\"\nthreshold = 15\nwindow = 6\n"
                                     "[labels]\nmin_height = 0\n"
                                     "[paths]\nchm = \"" + tmp.path("chm.asc") + "\"\n"
                                     "out = \"" + tmp.path("a.csv") + "\"\n");
    REQUIRE(run({"--config", tmp.path("cfg.toml"), "extract"}) == 0);
    CHECK(read_points_csv(tmp.path("a.csv")).size() == 2);

    REQUIRE(run({"--config", tmp.path("cfg.toml"), "--set", "detect.threshold=21",
                 "--set", "paths.out=" + tmp.path("b.csv"), "extract"}) == 0);
    CHECK(read_points_csv(tmp.path("b.csv")).size() == 1);

    CHECK(run({"--config", tmp.path("cfg.toml"), "--set", "detect.bananas=1", "extract"}) == 1);
}

TEST_CASE("render, detect, and cover round trip through files") {
    TempDir tmp("cli-render");
    Grid s = Grid::filled(40, 40, 0.0, 120.0, 3.0, 0.0f, "c");
    write_grid(s, tmp.path("unc.rawgrid"), GridFormat::raw);
    PointSet pts;
    pts.crs_id = "c";
    pts.points.push_back({s.center_x(10), s.center_y(10), 0.0});
    pts.points.push_back({s.center_x(30), s.center_y(30), 0.0});
    write_points_csv(pts, tmp.path("pts.csv"));

    write_file(tmp.path("cfg.toml"),
               "[paths]\npoints = \"" + tmp.path("pts.csv") + "\"\n"
               "uncertainty = \"" + tmp.path("unc.rawgrid") + "\"\n"
               "heatmap = \"" + tmp.path("heat.rawgrid") + "\"\n"
               "out = \"" + tmp.path("heat.rawgrid") + "\"\n");
    REQUIRE(run({"--config", tmp.path("cfg.toml"), "render"}) == 0);
    Grid heat = read_grid(tmp.path("heat.rawgrid"));
    CHECK(heat.at(10, 10) == 1.0f);

    write_file(tmp.path("dec.toml"),
               "[paths]\nheatmap = \"" + tmp.path("heat.rawgrid") + "\"\n"
               "out = \"" + tmp.path("dec.csv") + "\"\n"
               "[decode]\nthreshold = 0.5\nmin_distance = 9\n");
    REQUIRE(run({"--config", tmp.path("dec.toml"), "detect"}) == 0);
    CHECK(read_points_csv(tmp.path("dec.csv")).size() == 2);

    write_file(tmp.path("cov.toml"),
               "[paths]\nheatmap = \"" + tmp.path("heat.rawgrid") + "\"\n"
               "out = \"" + tmp.path("cover.rawgrid") + "\"\n"
               "[cover]\nthreshold = 0.5\n");
    REQUIRE(run({"--config", tmp.path("cov.toml"), "cover"}) == 0);
    Grid cover = read_grid(tmp.path("cover.rawgrid"));
    CHECK(cover.at(10, 10) == 1.0f);
    CHECK(cover.at(0, 0) == 0.0f);
}

TEST_CASE("gedi filter and split subcommands") {
    TempDir tmp("cli-misc");
    write_file(tmp.path("gedi.csv"),
               "id,num_modes,sensitivity,rh98,lon,lat\n"
               "keep,1,0.95,1.0,10,20\n"
               "drop,2,0.95,1.0,10,20\n");
    write_file(tmp.path("g.toml"), "[paths]\ngedi = \"" + tmp.path("gedi.csv") + "\"\n"
                                   "out = \"" + tmp.path("kept.csv") + "\"\n");
    REQUIRE(run({"--config", tmp.path("g.toml"), "gedi-filter"}) == 0);
    auto kept = read_gedi_csv(tmp.path("kept.csv"));
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].id == "keep");

    write_file(tmp.path("frames.csv"), "id,min_x,min_y,max_x,max_y\n"
                                       "a,0,0,10,10\n"
                                       "b,20,0,30,10\n"
                                       "c,40,0,50,10\n");
    write_file(tmp.path("s.toml"), "[paths]\nframes = \"" + tmp.path("frames.csv") + "\"\n"
                                   "out_train = \"" + tmp.path("train.csv") + "\"\n"
                                   "out_test = \"" + tmp.path("test.csv") + "\"\n"
                                   "[split]\nfraction = 0.3\n");
    REQUIRE(run({"--config", tmp.path("s.toml"), "split"}) == 0);
    auto train = read_frames_csv(tmp.path("train.csv"));
    auto test = read_frames_csv(tmp.path("test.csv"));
    CHECK(train.size() == 2);
    CHECK(test.size() == 1);
}
