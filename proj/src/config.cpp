#include "treemap/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "treemap/util.hpp"

namespace treemap {

PipelineConfig::PipelineConfig() {
    detect.mode = DetectionMode::fixed;
    detect.threshold = 3.0;
    detect.window = 10.0;
    detect.window_min = 5.0;
    detect.window_max = 20.0;
    detect.height_factor = 0.5;
    for (int i = 1; i <= 19; ++i) eval.thresholds.push_back(i / 20.0);
}

ExtractionParams PipelineConfig::extraction() const {
    ExtractionParams p;
    p.preproc = preproc;
    if (deng_enabled) p.preproc.deng = deng;
    p.detect = detect;
    return p;
}

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& text, const std::string& where) {
    const char* c = text.c_str();
    char* end = nullptr;
    double v = std::strtod(c, &end);
    if (end == c || *end != '\0' || !std::isfinite(v))
        bad(where, "expected a number, got '" + text + "'");
    return v;
}

int parse_int(const std::string& text, const std::string& where) {
    double v = parse_number(text, where);
    if (v != std::floor(v) || std::fabs(v) > 1e9) bad(where, "expected an integer");
    return static_cast<int>(v);
}

uint64_t parse_u64(const std::string& text, const std::string& where) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
        bad(where, "expected an unsigned integer, got '" + text + "'");
    return std::strtoull(text.c_str(), nullptr, 10);
}

bool parse_bool(const std::string& text, const std::string& where) {
    if (text == "true") return true;
    if (text == "false") return false;
    bad(where, "expected true or false, got '" + text + "'");
}

std::string parse_string(const std::string& text, const std::string& where) {
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
        std::string out;
        for (std::size_t i = 1; i + 1 < text.size(); ++i) {
            char ch = text[i];
            if (ch == '\\' && i + 2 < text.size()) {
                char nx = text[i + 1];
                if (nx == '"' || nx == '\\') {
                    out.push_back(nx);
                    ++i;
                    continue;
                }
            }
            if (ch == '"') bad(where, "stray quote inside string");
            out.push_back(ch);
        }
        return out;
    }
    return text; // bare strings accepted, mainly for --set
}

// Splits "[a, b, c]" on top-level commas, quotes respected.
std::vector<std::string> split_array(const std::string& text, const std::string& where) {
    std::string t = trim(text);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']')
        bad(where, "expected an array [ ... ]");
    std::vector<std::string> items;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
        char ch = t[i];
        if (ch == '"' && (i == 0 || t[i - 1] != '\\')) quoted = !quoted;
        if (ch == ',' && !quoted) {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (quoted) bad(where, "unterminated string in array");
    cur = trim(cur);
    if (!cur.empty()) items.push_back(cur);
    return items;
}

std::vector<double> parse_number_array(const std::string& text, const std::string& where) {
    std::vector<double> out;
    for (const std::string& item : split_array(text, where))
        out.push_back(parse_number(item, where));
    return out;
}

std::vector<std::string> parse_string_array(const std::string& text, const std::string& where) {
    std::vector<std::string> out;
    for (const std::string& item : split_array(text, where))
        out.push_back(parse_string(item, where));
    return out;
}

void apply_key(PipelineConfig& c, const std::string& sec, const std::string& key,
               const std::string& value, const std::string& where) {
    const std::string at = where + ": " + sec + "." + key;
    auto num = [&] { return parse_number(value, at); };
    auto integer = [&] { return parse_int(value, at); };
    auto str = [&] { return parse_string(value, at); };
    auto boolean = [&] { return parse_bool(value, at); };

    if (sec == "run") {
        if (key == "seed") {
            c.seed = parse_u64(value, at);
            return;
        }
    } else if (sec == "preproc") {
        if (key == "avg_kernel") {
            c.preproc.avg_kernel = integer();
            return;
        }
        if (key == "median_kernel") {
            c.preproc.median_kernel = integer();
            return;
        }
        if (key == "gauss_kernel") {
            c.preproc.gauss_kernel = integer();
            return;
        }
        if (key == "gauss_sigma") {
            c.preproc.gauss_sigma = num();
            return;
        }
    } else if (sec == "deng") {
        if (key == "enabled") {
            c.deng_enabled = boolean();
            return;
        }
        if (key == "kernel") {
            c.deng.kernel = integer();
            return;
        }
        if (key == "steps") {
            c.deng.steps = integer();
            return;
        }
        if (key == "high_threshold") {
            c.deng.high_threshold = num();
            return;
        }
        if (key == "low_threshold") {
            c.deng.low_threshold = num();
            return;
        }
        if (key == "blur_kernel") {
            c.deng.blur_kernel = integer();
            return;
        }
        if (key == "blur_sigma") {
            c.deng.blur_sigma = num();
            return;
        }
    } else if (sec == "detect") {
        if (key == "mode") {
            std::string m = str();
            if (m == "fixed") c.detect.mode = DetectionMode::fixed;
            else if (m == "adaptive") c.detect.mode = DetectionMode::adaptive;
            else bad(where, "detect.mode must be \"fixed\" or \"adaptive\"");
            return;
        }
        if (key == "threshold") {
            c.detect.threshold = num();
            return;
        }
        if (key == "window") {
            c.detect.window = num();
            return;
        }
        if (key == "window_min") {
            c.detect.window_min = num();
            return;
        }
        if (key == "window_max") {
            c.detect.window_max = num();
            return;
        }
        if (key == "height_factor") {
            c.detect.height_factor = num();
            return;
        }
    } else if (sec == "labels") {
        if (key == "min_height") {
            c.min_height = num();
            return;
        }
    } else if (sec == "heatmap") {
        if (key == "sigma_m") {
            c.heatmap.sigma_m = num();
            return;
        }
        if (key == "delta") {
            c.heatmap.delta = num();
            return;
        }
        if (key == "truncation_multiple") {
            c.heatmap.truncation_multiple =
                value == "inf" ? std::numeric_limits<double>::infinity() : num();
            return;
        }
        if (key == "pixel_size") {
            c.heatmap.pixel_size = num();
            return;
        }
    } else if (sec == "decode") {
        if (key == "threshold") {
            c.decode.threshold = num();
            return;
        }
        if (key == "min_distance") {
            c.decode.min_distance = num();
            return;
        }
    } else if (sec == "cover") {
        if (key == "threshold") {
            c.cover.threshold = num();
            return;
        }
    } else if (sec == "eval") {
        if (key == "detect_max_dist") {
            c.eval.detect_max_dist = num();
            return;
        }
        if (key == "calib_max_dist") {
            c.eval.calib_max_dist = num();
            return;
        }
        if (key == "height_threshold") {
            c.eval.height_threshold = num();
            return;
        }
        if (key == "window") {
            c.eval.window = num();
            return;
        }
        if (key == "min_valid_fraction") {
            c.eval.min_valid_fraction = num();
            return;
        }
        if (key == "thresholds") {
            c.eval.thresholds = parse_number_array(value, at);
            return;
        }
        if (key == "sweep_metric") {
            std::string m = str();
            if (m != "r2" && m != "f1_pixel")
                bad(where, "eval.sweep_metric must be \"r2\" or \"f1_pixel\"");
            c.eval.sweep_metric = m;
            return;
        }
    } else if (sec == "optimize") {
        if (key == "budget") {
            c.optimizer.budget = integer();
            return;
        }
        if (key == "n_init") {
            c.optimizer.n_init = integer();
            return;
        }
    } else if (sec == "split") {
        if (key == "fraction") {
            c.split.fraction = num();
            return;
        }
    } else if (sec == "paths") {
        if (key == "grids") {
            c.paths.grids = parse_string_array(value, at);
            return;
        }
        std::string* slot = nullptr;
        if (key == "chm") slot = &c.paths.chm;
        else if (key == "labels") slot = &c.paths.labels;
        else if (key == "polygons") slot = &c.paths.polygons;
        else if (key == "points") slot = &c.paths.points;
        else if (key == "ref_points") slot = &c.paths.ref_points;
        else if (key == "heatmap") slot = &c.paths.heatmap;
        else if (key == "uncertainty") slot = &c.paths.uncertainty;
        else if (key == "score") slot = &c.paths.score;
        else if (key == "cover") slot = &c.paths.cover;
        else if (key == "frames") slot = &c.paths.frames;
        else if (key == "gedi") slot = &c.paths.gedi;
        else if (key == "out") slot = &c.paths.out;
        else if (key == "out_pr") slot = &c.paths.out_pr;
        else if (key == "out_params") slot = &c.paths.out_params;
        else if (key == "out_history") slot = &c.paths.out_history;
        else if (key == "out_train") slot = &c.paths.out_train;
        else if (key == "out_test") slot = &c.paths.out_test;
        if (slot) {
            *slot = str();
            return;
        }
    } else {
        bad(where, "unknown section [" + sec + "]");
    }
    bad(where, "unknown key " + sec + "." + key);
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (ch == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
        if (ch == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

} // namespace

void apply_config_text(PipelineConfig& config, const std::string& text,
                       const std::string& source_name) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string where = source_name + ":" + std::to_string(lineno);
        std::string t = trim(strip_comment(line));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') bad(where, "unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) bad(where, "empty section name");
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) bad(where, "expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) bad(where, "empty key");
        if (section.empty()) bad(where, "key '" + key + "' outside a section");
        apply_key(config, section, key, value, where);
    }
}

PipelineConfig read_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    PipelineConfig config;
    apply_config_text(config, ss.str(), path);
    return config;
}

void apply_setting(PipelineConfig& config, const std::string& assignment) {
    std::string where = "--set " + assignment;
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) bad(where, "expected section.key=value");
    std::string key = trim(assignment.substr(0, eq));
    std::string value = trim(assignment.substr(eq + 1));
    std::size_t dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size())
        bad(where, "expected section.key=value");
    apply_key(config, key.substr(0, dot), key.substr(dot + 1), value, where);
}

namespace {

// Shortest decimal form that parses back to the identical double.
std::string num_text(double v) {
    if (std::isinf(v)) return "inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, end);
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out.push_back('\\');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

} // namespace

std::string dump_config(const PipelineConfig& c) {
    std::ostringstream o;
    o << "[run]\nseed = " << c.seed << "\n\n";
    o << "[preproc]\n";
    o << "avg_kernel = " << c.preproc.avg_kernel << '\n';
    o << "median_kernel = " << c.preproc.median_kernel << '\n';
    o << "gauss_kernel = " << c.preproc.gauss_kernel << '\n';
    o << "gauss_sigma = " << num_text(c.preproc.gauss_sigma) << "\n\n";
    o << "[deng]\n";
    o << "enabled = " << (c.deng_enabled ? "true" : "false") << '\n';
    o << "kernel = " << c.deng.kernel << '\n';
    o << "steps = " << c.deng.steps << '\n';
    o << "high_threshold = " << num_text(c.deng.high_threshold) << '\n';
    o << "low_threshold = " << num_text(c.deng.low_threshold) << '\n';
    o << "blur_kernel = " << c.deng.blur_kernel << '\n';
    o << "blur_sigma = " << num_text(c.deng.blur_sigma) << "\n\n";
    o << "[detect]\n";
    o << "mode = " << (c.detect.mode == DetectionMode::fixed ? "\"fixed\"" : "\"adaptive\"")
      << '\n';
    o << "threshold = " << num_text(c.detect.threshold) << '\n';
    o << "window = " << num_text(c.detect.window) << '\n';
    o << "window_min = " << num_text(c.detect.window_min) << '\n';
    o << "window_max = " << num_text(c.detect.window_max) << '\n';
    o << "height_factor = " << num_text(c.detect.height_factor) << "\n\n";
    o << "[labels]\nmin_height = " << num_text(c.min_height) << "\n\n";
    o << "[heatmap]\n";
    o << "sigma_m = " << num_text(c.heatmap.sigma_m) << '\n';
    o << "delta = " << num_text(c.heatmap.delta) << '\n';
    o << "truncation_multiple = " << num_text(c.heatmap.truncation_multiple) << '\n';
    o << "pixel_size = " << num_text(c.heatmap.pixel_size) << "\n\n";
    o << "[decode]\n";
    o << "threshold = " << num_text(c.decode.threshold) << '\n';
    o << "min_distance = " << num_text(c.decode.min_distance) << "\n\n";
    o << "[cover]\nthreshold = " << num_text(c.cover.threshold) << "\n\n";
    o << "[eval]\n";
    o << "detect_max_dist = " << num_text(c.eval.detect_max_dist) << '\n';
    o << "calib_max_dist = " << num_text(c.eval.calib_max_dist) << '\n';
    o << "height_threshold = " << num_text(c.eval.height_threshold) << '\n';
    o << "window = " << num_text(c.eval.window) << '\n';
    o << "min_valid_fraction = " << num_text(c.eval.min_valid_fraction) << '\n';
    o << "thresholds = [";
    for (std::size_t i = 0; i < c.eval.thresholds.size(); ++i) {
        if (i) o << ", ";
        o << num_text(c.eval.thresholds[i]);
    }
    o << "]\n";
    o << "sweep_metric = " << quoted(c.eval.sweep_metric) << "\n\n";
    o << "[optimize]\n";
    o << "budget = " << c.optimizer.budget << '\n';
    o << "n_init = " << c.optimizer.n_init << "\n\n";
    o << "[split]\nfraction = " << num_text(c.split.fraction) << "\n\n";
    o << "[paths]\n";
    o << "chm = " << quoted(c.paths.chm) << '\n';
    o << "labels = " << quoted(c.paths.labels) << '\n';
    o << "polygons = " << quoted(c.paths.polygons) << '\n';
    o << "points = " << quoted(c.paths.points) << '\n';
    o << "ref_points = " << quoted(c.paths.ref_points) << '\n';
    o << "heatmap = " << quoted(c.paths.heatmap) << '\n';
    o << "uncertainty = " << quoted(c.paths.uncertainty) << '\n';
    o << "score = " << quoted(c.paths.score) << '\n';
    o << "cover = " << quoted(c.paths.cover) << '\n';
    o << "frames = " << quoted(c.paths.frames) << '\n';
    o << "gedi = " << quoted(c.paths.gedi) << '\n';
    o << "grids = [";
    for (std::size_t i = 0; i < c.paths.grids.size(); ++i) {
        if (i) o << ", ";
        o << quoted(c.paths.grids[i]);
    }
    o << "]\n";
    o << "out = " << quoted(c.paths.out) << '\n';
    o << "out_pr = " << quoted(c.paths.out_pr) << '\n';
    o << "out_params = " << quoted(c.paths.out_params) << '\n';
    o << "out_history = " << quoted(c.paths.out_history) << '\n';
    o << "out_train = " << quoted(c.paths.out_train) << '\n';
    o << "out_test = " << quoted(c.paths.out_test) << '\n';
    return o.str();
}

} // namespace treemap
