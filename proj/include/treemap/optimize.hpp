#ifndef TREEMAP_OPTIMIZE_HPP
#define TREEMAP_OPTIMIZE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "treemap/extraction.hpp"

namespace treemap {

enum class DimKind { continuous, integer, odd };

// One search dimension over a closed interval. integer dims round proposals
// to the nearest whole number, odd dims to the nearest odd number; the
// bounds of such dims must themselves be valid values.
struct Dimension {
    std::string name;
    DimKind kind = DimKind::continuous;
    double lo = 0.0;
    double hi = 1.0;
};

// Search space. The detection-mode categorical is realized as two separate
// spaces optimized independently (fixed_extraction_space and
// adaptive_extraction_space), so every dimension listed here is active.
// order_pairs lists (lower, upper) dimension indices whose proposed values
// are swapped into order; paired dims must share kind and bounds so the
// swap stays in range.
struct ParamSpace {
    std::vector<Dimension> dims;
    std::vector<std::pair<int, int>> order_pairs;

    void validate() const;
};

struct Trial {
    std::vector<double> values; // raw space, rounding and repairs applied
    double objective = 0.0;
    int index = 0; // evaluation order within the run
    double elapsed_s = 0.0;
};

struct OptimizeResult {
    Trial best; // argmax objective, ties to the lowest index
    std::vector<Trial> history;
};

// Sequential model-based maximization. Phase 1 evaluates n_init scrambled
// Halton points; every later trial fits a Gaussian process to all completed
// trials (squared-exponential kernel on [0,1]-normalized coordinates,
// observation noise 1e-6, median-pairwise-distance length scale,
// standardized objectives) and evaluates the expected-improvement argmax
// over 1024 seeded uniform candidates. A proposal repeating an earlier
// trial exactly is nudged by one step on a seeded dimension. budget ==
// n_init is plain quasi-random search. Bit-reproducible given the seed.
OptimizeResult optimize_params(const ParamSpace& space,
                               const std::function<double(const std::vector<double>&)>& objective,
                               int budget, int n_init, uint64_t seed);

// Canonical extraction spaces: 10 preprocessing dimensions plus the
// detection branch, 12 dims fixed and 14 adaptive.
ParamSpace fixed_extraction_space();
ParamSpace adaptive_extraction_space();

// Decodes a value vector of one of the canonical spaces.
ExtractionParams extraction_params_from(const std::vector<double>& values, DetectionMode mode);

struct ExtractionSearch {
    ExtractionParams best;
    double best_objective = 0.0;
    DetectionMode best_mode = DetectionMode::fixed;
    OptimizeResult fixed;
    OptimizeResult adaptive;
};

// Optimizes both detection branches independently (budget and n_init apply
// per branch) and keeps the better result; the fixed branch wins exact
// ties.
ExtractionSearch optimize_extraction(const Grid& chm, const PointSet& calib_labels,
                                     const PolygonSet& polygons, double min_height,
                                     double max_dist, int budget, int n_init, uint64_t seed);

// Trial history CSV: index,mode,objective,<union of dimension columns>, a
// column left blank when inactive for the row's branch. Fixed rows first,
// then adaptive, with a running global index.
void write_history_csv(const ExtractionSearch& search, const std::string& path);

// Best parameters as a config fragment ([preproc], [deng], [detect])
// readable by the pipeline config parser.
void write_params_config(const ExtractionParams& params, const std::string& path);

} // namespace treemap

#endif
