#include "treemap/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "treemap/config.hpp"
#include "treemap/evalmetrics.hpp"
#include "treemap/heatmap.hpp"
#include "treemap/optimize.hpp"
#include "treemap/util.hpp"

namespace treemap {

namespace {

using nlohmann::json;

const std::string& need(const std::string& value, const char* key) {
    if (value.empty()) throw ConfigError(std::string("missing config key paths.") + key);
    return value;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

GridFormat grid_format_for(const std::string& path) {
    if (ends_with(path, ".asc")) return GridFormat::asc;
    if (ends_with(path, ".rawgrid")) return GridFormat::raw;
    throw DataError("cannot infer grid format from " + path + " (use .asc or .rawgrid)");
}

void write_points_auto(const PointSet& points, const std::string& path) {
    if (ends_with(path, ".csv")) write_points_csv(points, path);
    else if (ends_with(path, ".geojson") || ends_with(path, ".json"))
        write_points_geojson(points, path);
    else
        throw DataError("cannot infer point format from " + path + " (use .csv or .geojson)");
}

PolygonSet optional_polygons(const PipelineConfig& cfg) {
    if (cfg.paths.polygons.empty()) return {};
    return read_polygons_geojson(cfg.paths.polygons);
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out.good()) throw DataError("write failed: " + path);
}

// Brings the reference CHM onto the product grid when resolutions differ.
Grid coregister(Grid ref, const Grid& target) {
    if (ref.pixel_size != target.pixel_size) ref = resample_nearest(ref, target.pixel_size);
    return ref;
}

void cmd_prep(const PipelineConfig& cfg) {
    Grid chm = read_grid(need(cfg.paths.chm, "chm"));
    Grid out = preprocess(chm, cfg.extraction().preproc);
    write_grid(out, need(cfg.paths.out, "out"), grid_format_for(cfg.paths.out));
}

void cmd_extract(const PipelineConfig& cfg) {
    Grid chm = read_grid(need(cfg.paths.chm, "chm"));
    PointSet points = extract_points(chm, cfg.extraction(), optional_polygons(cfg), cfg.min_height);
    write_points_auto(points, need(cfg.paths.out, "out"));
}

void cmd_optimize(const PipelineConfig& cfg) {
    Grid chm = read_grid(need(cfg.paths.chm, "chm"));
    PointSet labels = read_points_csv(need(cfg.paths.labels, "labels"));
    ExtractionSearch search =
        optimize_extraction(chm, labels, optional_polygons(cfg), cfg.min_height,
                            cfg.eval.calib_max_dist, cfg.optimizer.budget, cfg.optimizer.n_init,
                            cfg.seed);
    write_params_config(search.best, need(cfg.paths.out_params, "out_params"));
    write_history_csv(search, need(cfg.paths.out_history, "out_history"));
    std::cerr << "best objective " << search.best_objective << " ("
              << (search.best_mode == DetectionMode::fixed ? "fixed" : "adaptive")
              << " branch)\n";
}

void cmd_strategy(const PipelineConfig& cfg) {
    Grid chm = read_grid(need(cfg.paths.chm, "chm"));
    PointSet labels = read_points_csv(need(cfg.paths.labels, "labels"));
    StrategyReport report = choose_strategy(labels, chm);
    json j;
    j["recommendation"] = report.recommendation == DetectionMode::adaptive ? "adaptive" : "fixed";
    j["pearson_r"] = report.pearson_r;
    j["n_pairs"] = report.pairs.size();
    j["degenerate"] = report.degenerate;
    write_json(j, need(cfg.paths.out, "out"));
}

void cmd_render(const PipelineConfig& cfg) {
    PointSet points = read_points_csv(need(cfg.paths.points, "points"));
    Grid uncertainty = read_grid(need(cfg.paths.uncertainty, "uncertainty"));
    Grid heatmap = render_targets(points, uncertainty, cfg.heatmap);
    write_grid(heatmap, need(cfg.paths.out, "out"), grid_format_for(cfg.paths.out));
}

void cmd_detect(const PipelineConfig& cfg) {
    Grid heatmap = read_grid(need(cfg.paths.heatmap, "heatmap"));
    PointSet points = to_points(heatmap, cfg.decode.threshold, cfg.decode.min_distance);
    write_points_auto(points, need(cfg.paths.out, "out"));
}

void cmd_cover(const PipelineConfig& cfg) {
    Grid heatmap = read_grid(need(cfg.paths.heatmap, "heatmap"));
    Grid cover = to_cover(heatmap, cfg.cover.threshold);
    write_grid(cover, need(cfg.paths.out, "out"), grid_format_for(cfg.paths.out));
}

void cmd_stack(const PipelineConfig& cfg) {
    if (cfg.paths.grids.empty()) throw ConfigError("missing config key paths.grids");
    std::vector<Grid> grids;
    grids.reserve(cfg.paths.grids.size());
    for (const std::string& p : cfg.paths.grids) grids.push_back(read_grid(p));
    Grid out = median_stack(grids);
    write_grid(out, need(cfg.paths.out, "out"), grid_format_for(cfg.paths.out));
}

void cmd_split(const PipelineConfig& cfg) {
    std::vector<Frame> frames = read_frames_csv(need(cfg.paths.frames, "frames"));
    FrameSplit split = split_frames(frames, cfg.split.fraction, cfg.seed);
    write_frames_csv(split.train, need(cfg.paths.out_train, "out_train"));
    write_frames_csv(split.test, need(cfg.paths.out_test, "out_test"));
}

void cmd_gedi_filter(const PipelineConfig& cfg) {
    auto records = read_gedi_csv(need(cfg.paths.gedi, "gedi"));
    write_gedi_csv(gedi_negative_filter(records), need(cfg.paths.out, "out"));
}

void cmd_eval_det(const PipelineConfig& cfg) {
    PointSet pred = read_points_csv(need(cfg.paths.points, "points"));
    PointSet ref = read_points_csv(need(cfg.paths.ref_points, "ref_points"));
    Matching m = match_points(pred, ref, cfg.eval.detect_max_dist);
    DetectionMetrics dm = detection_metrics(m, static_cast<int64_t>(pred.size()),
                                            static_cast<int64_t>(ref.size()));
    json j;
    j["n_pred"] = pred.size();
    j["n_ref"] = ref.size();
    j["max_dist"] = m.max_dist;
    j["tp"] = dm.tp;
    j["fp"] = dm.fp;
    j["fn"] = dm.fn;
    j["precision"] = dm.precision;
    j["recall"] = dm.recall;
    j["f1"] = dm.f1;
    j["counting_accuracy"] = dm.counting_accuracy;
    j["objective"] = dm.objective;
    write_json(j, need(cfg.paths.out, "out"));
}

void cmd_eval_cover(const PipelineConfig& cfg) {
    Grid cover = read_grid(need(cfg.paths.cover, "cover"));
    Grid ref = coregister(read_grid(need(cfg.paths.chm, "chm")), cover);
    CoverR2 r2 = cover_fraction_r2(cover, ref, cfg.eval.window, cfg.eval.height_threshold,
                                   cfg.eval.min_valid_fraction);
    json j;
    j["r2"] = r2.r2;
    j["n_windows"] = r2.windows.size();
    json rows = json::array();
    for (const CoverWindow& w : r2.windows) rows.push_back({w.pred_frac, w.ref_frac});
    j["windows"] = rows;
    write_json(j, need(cfg.paths.out, "out"));
}

void cmd_sweep(const PipelineConfig& cfg) {
    Grid score = read_grid(need(cfg.paths.score, "score"));
    Grid ref = coregister(read_grid(need(cfg.paths.chm, "chm")), score);
    SweepMetric metric =
        cfg.eval.sweep_metric == "f1_pixel" ? SweepMetric::f1_pixel : SweepMetric::r2;
    SweepConfig sc{cfg.eval.window, cfg.eval.height_threshold, cfg.eval.min_valid_fraction};
    SweepResult res = sweep_threshold(score, ref, cfg.eval.thresholds, metric, sc);

    std::ofstream out(need(cfg.paths.out, "out"));
    if (!out) throw DataError("cannot write " + cfg.paths.out);
    out << "threshold,metric\n";
    char buf[80];
    for (const SweepRow& row : res.table) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", row.threshold, row.score);
        out << buf;
    }
    if (!out.good()) throw DataError("write failed: " + cfg.paths.out);

    if (!cfg.paths.out_pr.empty() && metric == SweepMetric::f1_pixel) {
        std::ofstream pr(cfg.paths.out_pr);
        if (!pr) throw DataError("cannot write " + cfg.paths.out_pr);
        pr << "threshold,precision,recall\n";
        for (const SweepRow& row : res.table) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", row.threshold, row.precision,
                          row.recall);
            pr << buf;
        }
        if (!pr.good()) throw DataError("write failed: " + cfg.paths.out_pr);
    }
    std::cerr << "best threshold " << res.best_threshold << " (metric " << res.best_score
              << ")\n";
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"tree mapping pipeline: pseudo-labels, heatmap targets, evaluation"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    int threads = 0;
    uint64_t seed = 0;
    app.add_option("--config", config_path, "pipeline config file (TOML subset)");
    auto* set_opt = app.add_option("--set", overrides, "override one key, section.key=value; repeatable");
    set_opt->expected(1, -1)->allow_extra_args(false);
    auto* threads_opt = app.add_option("--threads", threads, "worker thread cap, 0 = all cores");
    auto* seed_opt = app.add_option("--seed", seed, "override run.seed");

    std::map<std::string, void (*)(const PipelineConfig&)> handlers = {
        {"prep", cmd_prep},
        {"extract", cmd_extract},
        {"optimize", cmd_optimize},
        {"strategy", cmd_strategy},
        {"render", cmd_render},
        {"detect", cmd_detect},
        {"cover", cmd_cover},
        {"stack", cmd_stack},
        {"split", cmd_split},
        {"gedi-filter", cmd_gedi_filter},
        {"eval-det", cmd_eval_det},
        {"eval-cover", cmd_eval_cover},
        {"sweep", cmd_sweep},
    };
    const char* descriptions[][2] = {
        {"prep", "preprocess a CHM (blurs, pit correction)"},
        {"extract", "mine pseudo-label points from a CHM"},
        {"optimize", "search extraction parameters against calibration labels"},
        {"strategy", "recommend fixed or adaptive detection from labels"},
        {"render", "render Gaussian target heatmap from points"},
        {"detect", "decode a heatmap into points"},
        {"cover", "threshold a heatmap into a binary cover map"},
        {"stack", "pixel-wise median of grids"},
        {"split", "train/test split of acquisition frames"},
        {"gedi-filter", "keep treeless negative GEDI footprints"},
        {"eval-det", "point detection metrics report"},
        {"eval-cover", "cover fraction R2 report"},
        {"sweep", "threshold sweep against a reference CHM"},
    };
    for (auto& [name, desc] : descriptions) app.add_subcommand(name, desc);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);

        PipelineConfig cfg;
        if (!config_path.empty()) cfg = read_config(config_path);
        for (const std::string& s : overrides) apply_setting(cfg, s);
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (threads_opt->count() > 0) set_max_threads(threads);

        CLI::App* sub = app.get_subcommands().at(0);
        std::cerr << "seed " << cfg.seed << ", resolved config:\n" << dump_config(cfg);
        handlers.at(sub->get_name())(cfg);
        return 0;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace treemap
