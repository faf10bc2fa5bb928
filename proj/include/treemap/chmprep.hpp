#ifndef TREEMAP_CHMPREP_HPP
#define TREEMAP_CHMPREP_HPP

#include <optional>

#include "treemap/grid.hpp"

namespace treemap {

enum class BlurMethod { average, median, gaussian };

// Iterative pit correction for CHMs. Per step, each pixel is compared with
// the median m(p) of its kernel x kernel neighborhood (center excluded,
// replicate padding): m(p) - v(p) > high_threshold marks a strong pit,
// > low_threshold a weak one. Weak pits 8-connected (transitively) to a
// strong pit join the pit set, and every pit is replaced by its m(p), all
// medians taken from the grid as it stood at the start of the step. A final
// Gaussian blur smooths the result.
struct DengParams {
    int kernel = 3;
    int steps = 1;
    double high_threshold = 10.0; // meters
    double low_threshold = 5.0;   // meters
    int blur_kernel = 1;
    double blur_sigma = 1.0;      // pixels

    void validate() const;
};

// Preprocessing chain applied before peak detection, in fixed order:
// average blur, median blur, Gaussian blur, pit correction. A kernel of 0
// (or an absent deng block) disables that stage.
struct PreprocParams {
    int avg_kernel = 0;
    int median_kernel = 0;
    int gauss_kernel = 0;
    double gauss_sigma = 1.0; // pixels, used only when gauss_kernel > 0
    std::optional<DengParams> deng;

    void validate() const;
};

// Window statistic over a kernel x kernel neighborhood with replicate
// padding. Missing samples are skipped, a missing center stays missing, and
// Gaussian weights are renormalized over the samples actually present.
// Window medians with an even sample count take the mean of the two middle
// values, same as median_stack.
Grid blur(const Grid& grid, BlurMethod method, int kernel, double sigma = 0.0);

Grid deng_correct(const Grid& grid, const DengParams& params);

Grid preprocess(const Grid& grid, const PreprocParams& params);

} // namespace treemap

#endif
