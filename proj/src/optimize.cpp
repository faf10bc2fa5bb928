#include "treemap/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "treemap/util.hpp"

namespace treemap {

void ParamSpace::validate() const {
    if (dims.empty()) throw std::invalid_argument("optimize: empty space");
    for (const Dimension& d : dims) {
        if (d.name.empty()) throw std::invalid_argument("optimize: dimension without a name");
        if (!(std::isfinite(d.lo) && std::isfinite(d.hi) && d.lo <= d.hi))
            throw std::invalid_argument("optimize: bad bounds on " + d.name);
        if (d.kind != DimKind::continuous) {
            if (d.lo != std::floor(d.lo) || d.hi != std::floor(d.hi))
                throw std::invalid_argument("optimize: non-integral bounds on " + d.name);
            if (d.kind == DimKind::odd &&
                (std::llround(d.lo) % 2 == 0 || std::llround(d.hi) % 2 == 0))
                throw std::invalid_argument("optimize: even bounds on odd dim " + d.name);
        }
    }
    for (auto [a, b] : order_pairs) {
        int n = static_cast<int>(dims.size());
        if (a < 0 || b < 0 || a >= n || b >= n || a == b)
            throw std::invalid_argument("optimize: bad order pair");
        if (dims[a].kind != dims[b].kind || dims[a].lo != dims[b].lo || dims[a].hi != dims[b].hi)
            throw std::invalid_argument("optimize: order pair dims must share kind and bounds");
    }
}

namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

double nearest_odd(double v) {
    return 2.0 * std::floor(v / 2.0) + 1.0;
}

double round_dim(const Dimension& d, double v) {
    if (d.kind == DimKind::integer) v = std::round(v);
    else if (d.kind == DimKind::odd) v = nearest_odd(v);
    return std::clamp(v, d.lo, d.hi);
}

// Order-pair swap, then per-dimension rounding. Rounding is monotone, so
// the swapped order survives it.
std::vector<double> realize(const ParamSpace& space, std::vector<double> raw) {
    for (auto [a, b] : space.order_pairs)
        if (raw[a] > raw[b]) std::swap(raw[a], raw[b]);
    for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = round_dim(space.dims[k], raw[k]);
    return raw;
}

std::vector<double> from_unit(const ParamSpace& space, const std::vector<double>& u) {
    std::vector<double> raw(u.size());
    for (std::size_t k = 0; k < u.size(); ++k)
        raw[k] = space.dims[k].lo + u[k] * (space.dims[k].hi - space.dims[k].lo);
    return realize(space, std::move(raw));
}

std::vector<double> to_unit(const ParamSpace& space, const std::vector<double>& raw) {
    std::vector<double> u(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
        double span = space.dims[k].hi - space.dims[k].lo;
        u[k] = span == 0.0 ? 0.0 : (raw[k] - space.dims[k].lo) / span;
    }
    return u;
}

// Radical inverse in the dimension's prime base with a seeded digit
// permutation fixing 0 (so index 0 stays the origin and low indices stay
// well spread).
struct HaltonScrambler {
    std::vector<std::vector<int>> perms;

    HaltonScrambler(int dims, std::mt19937_64& rng) {
        perms.resize(dims);
        for (int k = 0; k < dims; ++k) {
            int base = kPrimes[k];
            std::vector<int>& p = perms[k];
            p.resize(base);
            std::iota(p.begin(), p.end(), 0);
            for (int i = base - 1; i >= 2; --i)
                std::swap(p[i], p[1 + static_cast<int>(uniform_below(rng, uint64_t(i)))]);
        }
    }

    double point(int index, int dim) const {
        const std::vector<int>& p = perms[dim];
        int base = kPrimes[dim];
        double x = 0.0;
        double f = 1.0 / base;
        for (int i = index; i > 0; i /= base) {
            x += p[i % base] * f;
            f /= base;
        }
        return x;
    }
};

// Zero-mean unit-variance GP with a squared-exponential kernel, fit to
// standardized objectives.
struct Surrogate {
    Eigen::MatrixXd X;
    Eigen::VectorXd alpha;
    Eigen::LLT<Eigen::MatrixXd> llt;
    double lengthscale = 1.0;
    double fbest = 0.0; // incumbent in standardized units
    static constexpr double noise = 1e-6;

    Surrogate(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) {
        int n = static_cast<int>(xs.size());
        int d = static_cast<int>(xs.front().size());
        X.resize(n, d);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < d; ++k) X(i, k) = xs[i][k];

        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y(i) = ys[i];
        double mean = y.mean();
        double sd = std::sqrt((y.array() - mean).square().sum() / n);
        if (!(sd > 1e-12)) sd = 1.0;
        Eigen::VectorXd z = (y.array() - mean) / sd;
        fbest = z.maxCoeff();

        std::vector<double> dists;
        dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) dists.push_back((X.row(i) - X.row(j)).norm());
        std::sort(dists.begin(), dists.end());
        std::size_t m = dists.size();
        lengthscale = m % 2 == 1 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
        if (!(lengthscale > 0.0)) lengthscale = 1.0;

        Eigen::MatrixXd K(n, n);
        for (int i = 0; i < n; ++i) {
            K(i, i) = 1.0 + noise;
            for (int j = i + 1; j < n; ++j) {
                double k = kernel((X.row(i) - X.row(j)).squaredNorm());
                K(i, j) = k;
                K(j, i) = k;
            }
        }
        llt.compute(K);
        alpha = llt.solve(z);
    }

    double kernel(double sqdist) const {
        return std::exp(-sqdist / (2.0 * lengthscale * lengthscale));
    }

    double expected_improvement(const Eigen::VectorXd& u) const {
        int n = static_cast<int>(X.rows());
        Eigen::VectorXd kstar(n);
        for (int i = 0; i < n; ++i)
            kstar(i) = kernel((u.transpose() - X.row(i)).squaredNorm());
        double mu = kstar.dot(alpha);
        Eigen::VectorXd w = llt.matrixL().solve(kstar);
        double var = 1.0 + noise - w.squaredNorm();
        double sd = std::sqrt(std::max(var, 1e-18));
        double diff = mu - fbest;
        double zz = diff / sd;
        double big_phi = 0.5 * std::erfc(-zz / std::numbers::sqrt2);
        double small_phi = std::exp(-0.5 * zz * zz) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
        return diff * big_phi + sd * small_phi;
    }
};

} // namespace

OptimizeResult optimize_params(const ParamSpace& space,
                               const std::function<double(const std::vector<double>&)>& objective,
                               int budget, int n_init, uint64_t seed) {
    space.validate();
    if (n_init < 2 || budget < n_init)
        throw std::invalid_argument("optimize: need budget >= n_init >= 2");
    int d = static_cast<int>(space.dims.size());
    if (d > static_cast<int>(std::size(kPrimes)))
        throw std::invalid_argument("optimize: too many dimensions");

    std::mt19937_64 rng(seed);
    HaltonScrambler halton(d, rng);

    OptimizeResult res;
    std::set<std::vector<double>> seen;

    auto evaluate = [&](std::vector<double> raw) {
        auto t0 = std::chrono::steady_clock::now();
        double val = objective(raw);
        Trial tr;
        tr.values = std::move(raw);
        tr.objective = val;
        tr.index = static_cast<int>(res.history.size());
        tr.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        seen.insert(tr.values);
        res.history.push_back(std::move(tr));
    };

    // Exact repeats are nudged by one step on a seeded dimension, cycling
    // through the rest when the neighbor is taken too.
    auto deduplicate = [&](std::vector<double> raw) {
        if (!seen.count(raw)) return raw;
        int start = static_cast<int>(uniform_below(rng, uint64_t(d)));
        for (int off = 0; off < d; ++off) {
            int k = (start + off) % d;
            const Dimension& dim = space.dims[k];
            double v = raw[k];
            double stepped;
            switch (dim.kind) {
            case DimKind::continuous:
                stepped = v < dim.hi ? std::nextafter(v, dim.hi) : std::nextafter(v, dim.lo);
                break;
            case DimKind::integer:
                stepped = v + 1.0 <= dim.hi ? v + 1.0 : v - 1.0;
                break;
            default:
                stepped = v + 2.0 <= dim.hi ? v + 2.0 : v - 2.0;
                break;
            }
            if (stepped < dim.lo || stepped > dim.hi || stepped == v) continue;
            std::vector<double> nudged = raw;
            nudged[k] = stepped;
            if (!seen.count(nudged)) return nudged;
        }
        return raw;
    };

    for (int i = 1; i <= n_init; ++i) {
        std::vector<double> u(d);
        for (int k = 0; k < d; ++k) u[k] = halton.point(i, k);
        evaluate(deduplicate(from_unit(space, u)));
    }

    while (static_cast<int>(res.history.size()) < budget) {
        std::vector<std::vector<double>> xs;
        std::vector<double> ys;
        xs.reserve(res.history.size());
        ys.reserve(res.history.size());
        for (const Trial& t : res.history) {
            xs.push_back(to_unit(space, t.values));
            ys.push_back(t.objective);
        }
        Surrogate gp(xs, ys);

        std::vector<double> best_raw;
        double best_ei = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd u_eig(d);
        for (int c = 0; c < 1024; ++c) {
            std::vector<double> u(d);
            for (int k = 0; k < d; ++k) u[k] = uniform_unit(rng);
            std::vector<double> raw = from_unit(space, u);
            std::vector<double> un = to_unit(space, raw);
            for (int k = 0; k < d; ++k) u_eig(k) = un[k];
            double e = gp.expected_improvement(u_eig);
            if (e > best_ei) {
                best_ei = e;
                best_raw = std::move(raw);
            }
        }
        evaluate(deduplicate(std::move(best_raw)));
    }

    const Trial* best = &res.history.front();
    for (const Trial& t : res.history)
        if (t.objective > best->objective) best = &t;
    res.best = *best;
    return res;
}

namespace {

ParamSpace preproc_space() {
    ParamSpace s;
    s.dims = {
        {"avg_kernel", DimKind::odd, 1.0, 9.0},
        {"median_kernel", DimKind::odd, 1.0, 9.0},
        {"gauss_kernel", DimKind::odd, 1.0, 9.0},
        {"gauss_sigma", DimKind::continuous, 0.5, 3.0},
        {"deng_kernel", DimKind::odd, 3.0, 9.0},
        {"deng_steps", DimKind::integer, 1.0, 3.0},
        {"deng_low", DimKind::continuous, 0.5, 20.0},
        {"deng_high", DimKind::continuous, 0.5, 20.0},
        {"deng_blur_kernel", DimKind::odd, 1.0, 7.0},
        {"deng_blur_sigma", DimKind::continuous, 0.5, 3.0},
    };
    s.order_pairs = {{6, 7}};
    return s;
}

} // namespace

ParamSpace fixed_extraction_space() {
    ParamSpace s = preproc_space();
    s.dims.push_back({"window", DimKind::continuous, 2.0, 40.0});
    s.dims.push_back({"threshold", DimKind::continuous, 0.5, 15.0});
    return s;
}

ParamSpace adaptive_extraction_space() {
    ParamSpace s = preproc_space();
    s.dims.push_back({"window_min", DimKind::continuous, 2.0, 40.0});
    s.dims.push_back({"window_max", DimKind::continuous, 2.0, 40.0});
    s.dims.push_back({"height_factor", DimKind::continuous, 0.1, 1.5});
    s.dims.push_back({"threshold", DimKind::continuous, 0.5, 15.0});
    s.order_pairs.push_back({10, 11});
    return s;
}

ExtractionParams extraction_params_from(const std::vector<double>& values, DetectionMode mode) {
    std::size_t expect = mode == DetectionMode::fixed ? 12 : 14;
    if (values.size() != expect)
        throw std::invalid_argument("optimize: value count does not match the branch");
    ExtractionParams p;
    p.preproc.avg_kernel = static_cast<int>(std::llround(values[0]));
    p.preproc.median_kernel = static_cast<int>(std::llround(values[1]));
    p.preproc.gauss_kernel = static_cast<int>(std::llround(values[2]));
    p.preproc.gauss_sigma = values[3];
    DengParams deng;
    deng.kernel = static_cast<int>(std::llround(values[4]));
    deng.steps = static_cast<int>(std::llround(values[5]));
    deng.low_threshold = values[6];
    deng.high_threshold = values[7];
    deng.blur_kernel = static_cast<int>(std::llround(values[8]));
    deng.blur_sigma = values[9];
    p.preproc.deng = deng;
    p.detect.mode = mode;
    if (mode == DetectionMode::fixed) {
        p.detect.window = values[10];
        p.detect.threshold = values[11];
    } else {
        p.detect.window_min = values[10];
        p.detect.window_max = values[11];
        p.detect.height_factor = values[12];
        p.detect.threshold = values[13];
    }
    return p;
}

ExtractionSearch optimize_extraction(const Grid& chm, const PointSet& calib_labels,
                                     const PolygonSet& polygons, double min_height,
                                     double max_dist, int budget, int n_init, uint64_t seed) {
    PreprocCache cache;
    auto obj_fixed = [&](const std::vector<double>& values) {
        return extraction_objective(chm, calib_labels, polygons, min_height,
                                    extraction_params_from(values, DetectionMode::fixed),
                                    max_dist, &cache);
    };
    auto obj_adaptive = [&](const std::vector<double>& values) {
        return extraction_objective(chm, calib_labels, polygons, min_height,
                                    extraction_params_from(values, DetectionMode::adaptive),
                                    max_dist, &cache);
    };

    ExtractionSearch out;
    out.fixed = optimize_params(fixed_extraction_space(), obj_fixed, budget, n_init, seed);
    out.adaptive = optimize_params(adaptive_extraction_space(), obj_adaptive, budget, n_init,
                                   seed ^ 0x9e3779b97f4a7c15ULL);
    if (out.adaptive.best.objective > out.fixed.best.objective) {
        out.best_mode = DetectionMode::adaptive;
        out.best_objective = out.adaptive.best.objective;
        out.best = extraction_params_from(out.adaptive.best.values, DetectionMode::adaptive);
    } else {
        out.best_mode = DetectionMode::fixed;
        out.best_objective = out.fixed.best.objective;
        out.best = extraction_params_from(out.fixed.best.values, DetectionMode::fixed);
    }
    return out;
}

namespace {

const char* kPreprocCols[] = {"avg_kernel",  "median_kernel", "gauss_kernel",
                              "gauss_sigma", "deng_kernel",   "deng_steps",
                              "deng_low",    "deng_high",     "deng_blur_kernel",
                              "deng_blur_sigma"};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void write_history_csv(const ExtractionSearch& search, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "index,mode,objective";
    for (const char* c : kPreprocCols) out << ',' << c;
    out << ",window,window_min,window_max,height_factor,threshold\n";
    int row = 0;
    auto emit = [&](const Trial& t, bool fixed) {
        out << row++ << ',' << (fixed ? "fixed" : "adaptive") << ',' << num(t.objective);
        for (int k = 0; k < 10; ++k) out << ',' << num(t.values[k]);
        if (fixed)
            out << ',' << num(t.values[10]) << ",,,," << num(t.values[11]);
        else
            out << ",," << num(t.values[10]) << ',' << num(t.values[11]) << ','
                << num(t.values[12]) << ',' << num(t.values[13]);
        out << '\n';
    };
    for (const Trial& t : search.fixed.history) emit(t, true);
    for (const Trial& t : search.adaptive.history) emit(t, false);
    if (!out.good()) throw DataError("write failed: " + path);
}

void write_params_config(const ExtractionParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    const PreprocParams& pp = params.preproc;
    out << "[preproc]\n";
    out << "avg_kernel = " << pp.avg_kernel << '\n';
    out << "median_kernel = " << pp.median_kernel << '\n';
    out << "gauss_kernel = " << pp.gauss_kernel << '\n';
    out << "gauss_sigma = " << num(pp.gauss_sigma) << '\n';
    out << "\n[deng]\n";
    out << "enabled = " << (pp.deng ? "true" : "false") << '\n';
    if (pp.deng) {
        out << "kernel = " << pp.deng->kernel << '\n';
        out << "steps = " << pp.deng->steps << '\n';
        out << "high_threshold = " << num(pp.deng->high_threshold) << '\n';
        out << "low_threshold = " << num(pp.deng->low_threshold) << '\n';
        out << "blur_kernel = " << pp.deng->blur_kernel << '\n';
        out << "blur_sigma = " << num(pp.deng->blur_sigma) << '\n';
    }
    const DetectionParams& dp = params.detect;
    out << "\n[detect]\n";
    out << "mode = \"" << (dp.mode == DetectionMode::fixed ? "fixed" : "adaptive") << "\"\n";
    out << "threshold = " << num(dp.threshold) << '\n';
    if (dp.mode == DetectionMode::fixed) {
        out << "window = " << num(dp.window) << '\n';
    } else {
        out << "window_min = " << num(dp.window_min) << '\n';
        out << "window_max = " << num(dp.window_max) << '\n';
        out << "height_factor = " << num(dp.height_factor) << '\n';
    }
    if (!out.good()) throw DataError("write failed: " + path);
}

} // namespace treemap
