#ifndef TREEMAP_CONFIG_HPP
#define TREEMAP_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "treemap/extraction.hpp"
#include "treemap/heatmap.hpp"

namespace treemap {

// Input and output locations referenced by the subcommands. A subcommand
// errors (naming the key) when a path it needs is empty.
struct PathsConfig {
    std::string chm;
    std::string labels;
    std::string polygons;
    std::string points;
    std::string ref_points;
    std::string heatmap;
    std::string uncertainty;
    std::string score;
    std::string cover;
    std::string frames;
    std::string gedi;
    std::vector<std::string> grids;
    std::string out;
    std::string out_pr;
    std::string out_params;
    std::string out_history;
    std::string out_train;
    std::string out_test;
};

struct DecodeConfig {
    double threshold = 0.5;
    double min_distance = 6.0; // meters
};

struct CoverThresholdConfig {
    double threshold = 0.5;
};

struct EvalConfig {
    double detect_max_dist = 15.0; // meters, heatmap detections at 3 m pixels
    double calib_max_dist = 5.0;   // meters, pseudo-label calibration
    double height_threshold = 3.0; // meters, CHM cover definition
    double window = 25.0;          // meters, cover R2 blocks
    double min_valid_fraction = 0.5;
    std::vector<double> thresholds; // sweep grid, defaults to 0.05..0.95
    std::string sweep_metric = "r2"; // or "f1_pixel"
};

struct OptimizerConfig {
    int budget = 200;
    int n_init = 20;
};

struct SplitConfig {
    double fraction = 0.02;
};

// The whole pipeline configuration, a TOML-subset file with sections
// [run] [preproc] [deng] [detect] [labels] [heatmap] [decode] [cover]
// [eval] [optimize] [split] [paths]. Unknown sections or keys are rejected
// by name. Absent keys keep the defaults below.
struct PipelineConfig {
    uint64_t seed = 0;           // [run] seed
    PreprocParams preproc;       // [preproc], deng excluded
    bool deng_enabled = false;   // [deng] enabled
    DengParams deng;             // [deng] remaining keys
    DetectionParams detect;      // [detect]
    double min_height = 3.0;     // [labels] min_height
    HeatmapConfig heatmap;       // [heatmap]
    DecodeConfig decode;         // [decode]
    CoverThresholdConfig cover;  // [cover]
    EvalConfig eval;             // [eval]
    OptimizerConfig optimizer;   // [optimize]
    SplitConfig split;           // [split]
    PathsConfig paths;           // [paths]

    PipelineConfig();

    // Assembles the preprocessing chain (deng attached when enabled) and
    // the detection branch.
    ExtractionParams extraction() const;
};

// Throws ConfigError on unknown keys, type mismatches, or unreadable files.
PipelineConfig read_config(const std::string& path);
void apply_config_text(PipelineConfig& config, const std::string& text,
                       const std::string& source_name);

// One `section.key=value` command-line override.
void apply_setting(PipelineConfig& config, const std::string& assignment);

// Full round-trippable dump: read_config of the dump reproduces the config.
std::string dump_config(const PipelineConfig& config);

} // namespace treemap

#endif
