#include "treemap/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <unordered_map>

#include "treemap/util.hpp"

namespace treemap {

namespace {

// Min-cost max-flow on a unit-capacity bipartite graph, successive shortest
// paths with Johnson potentials. Augmenting one unit at a time yields, for
// every cardinality, the minimum-cost matching of that cardinality.
struct UnitFlow {
    struct Edge {
        int to;
        int cap;
        double cost;
        int rev;
    };
    std::vector<std::vector<Edge>> adj;

    explicit UnitFlow(int n) : adj(n) {}

    void add_edge(int from, int to, double cost) {
        adj[from].push_back({to, 1, cost, static_cast<int>(adj[to].size())});
        adj[to].push_back({from, 0, -cost, static_cast<int>(adj[from].size()) - 1});
    }

    // Augments until no path from s to t remains.
    void run(int s, int t) {
        int n = static_cast<int>(adj.size());
        std::vector<double> potential(n, 0.0);
        std::vector<double> dist(n);
        std::vector<int> prev_node(n), prev_edge(n);
        const double inf = std::numeric_limits<double>::infinity();
        for (;;) {
            std::fill(dist.begin(), dist.end(), inf);
            dist[s] = 0.0;
            using Item = std::pair<double, int>;
            std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
            pq.push({0.0, s});
            while (!pq.empty()) {
                auto [d, u] = pq.top();
                pq.pop();
                if (d > dist[u]) continue;
                for (std::size_t ei = 0; ei < adj[u].size(); ++ei) {
                    const Edge& e = adj[u][ei];
                    if (e.cap <= 0) continue;
                    double nd = d + e.cost + potential[u] - potential[e.to];
                    if (nd < dist[e.to]) {
                        dist[e.to] = nd;
                        prev_node[e.to] = u;
                        prev_edge[e.to] = static_cast<int>(ei);
                        pq.push({nd, e.to});
                    }
                }
            }
            if (dist[t] == inf) break;
            for (int u = 0; u < n; ++u)
                if (dist[u] < inf) potential[u] += dist[u];
            for (int u = t; u != s; u = prev_node[u]) {
                Edge& e = adj[prev_node[u]][prev_edge[u]];
                e.cap -= 1;
                adj[u][e.rev].cap += 1;
            }
        }
    }
};

int64_t bucket_key(int64_t bx, int64_t by) {
    return bx * 2000003 + by;
}

double safe_div(double num, double den) {
    return den == 0.0 ? 0.0 : num / den;
}

double harmonic(double a, double b) {
    return a + b == 0.0 ? 0.0 : 2.0 * a * b / (a + b);
}

bool covered(float v) {
    return v != 0.0f;
}

} // namespace

Matching match_points(const PointSet& pred, const PointSet& ref, double max_dist) {
    if (!(max_dist > 0.0))
        throw std::invalid_argument("match_points: max_dist must be > 0");
    if (!pred.crs_id.empty() && !ref.crs_id.empty() && pred.crs_id != ref.crs_id)
        throw DataError("match_points: crs mismatch");

    int np = static_cast<int>(pred.size());
    int nr = static_cast<int>(ref.size());

    // Candidate edges via a bucket grid of pitch max_dist: only the 3x3
    // bucket neighborhood can hold refs within range.
    std::unordered_map<int64_t, std::vector<int>> buckets;
    for (int j = 0; j < nr; ++j) {
        const Point& p = ref.points[j];
        int64_t bx = static_cast<int64_t>(std::floor(p.x / max_dist));
        int64_t by = static_cast<int64_t>(std::floor(p.y / max_dist));
        buckets[bucket_key(bx, by)].push_back(j);
    }

    std::vector<std::vector<std::pair<int, double>>> cand(np);
    for (int i = 0; i < np; ++i) {
        const Point& p = pred.points[i];
        int64_t bx = static_cast<int64_t>(std::floor(p.x / max_dist));
        int64_t by = static_cast<int64_t>(std::floor(p.y / max_dist));
        std::vector<int> near;
        for (int64_t dx = -1; dx <= 1; ++dx)
            for (int64_t dy = -1; dy <= 1; ++dy) {
                auto it = buckets.find(bucket_key(bx + dx, by + dy));
                if (it == buckets.end()) continue;
                near.insert(near.end(), it->second.begin(), it->second.end());
            }
        std::sort(near.begin(), near.end());
        near.erase(std::unique(near.begin(), near.end()), near.end());
        for (int j : near) {
            const Point& q = ref.points[j];
            double d = std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y));
            if (d <= max_dist) cand[i].push_back({j, d});
        }
    }

    // Points without any candidate partner can never be matched; only the
    // rest enter the flow graph.
    std::vector<int> pred_ids;
    for (int i = 0; i < np; ++i)
        if (!cand[i].empty()) pred_ids.push_back(i);
    std::vector<char> ref_touched(nr, 0);
    for (int i : pred_ids)
        for (const auto& [j, d] : cand[i]) ref_touched[j] = 1;
    std::vector<int> ref_ids;
    std::vector<int> ref_compact(nr, -1);
    for (int j = 0; j < nr; ++j)
        if (ref_touched[j]) {
            ref_compact[j] = static_cast<int>(ref_ids.size());
            ref_ids.push_back(j);
        }

    int npc = static_cast<int>(pred_ids.size());
    int nrc = static_cast<int>(ref_ids.size());
    int source = npc + nrc;
    int sink = npc + nrc + 1;
    UnitFlow flow(npc + nrc + 2);
    for (int pi = 0; pi < npc; ++pi) flow.add_edge(source, pi, 0.0);
    for (int rj = 0; rj < nrc; ++rj) flow.add_edge(npc + rj, sink, 0.0);
    for (int pi = 0; pi < npc; ++pi)
        for (const auto& [j, d] : cand[pred_ids[pi]]) flow.add_edge(pi, npc + ref_compact[j], d);
    flow.run(source, sink);

    Matching m;
    m.max_dist = max_dist;
    std::vector<char> pred_used(np, 0), ref_used(nr, 0);
    for (int pi = 0; pi < npc; ++pi) {
        for (const auto& e : flow.adj[pi]) {
            if (e.to < npc || e.to >= npc + nrc || e.cap != 0 || e.cost < 0.0) continue;
            int i = pred_ids[pi];
            int j = ref_ids[e.to - npc];
            m.pairs.push_back({i, j, e.cost});
            pred_used[i] = 1;
            ref_used[j] = 1;
        }
    }
    std::sort(m.pairs.begin(), m.pairs.end(), [](const MatchPair& a, const MatchPair& b) {
        return a.pred != b.pred ? a.pred < b.pred : a.ref < b.ref;
    });
    for (int i = 0; i < np; ++i)
        if (!pred_used[i]) m.unmatched_pred.push_back(i);
    for (int j = 0; j < nr; ++j)
        if (!ref_used[j]) m.unmatched_ref.push_back(j);
    return m;
}

DetectionMetrics detection_metrics(const Matching& matching, int64_t n_pred, int64_t n_ref) {
    int64_t tp = static_cast<int64_t>(matching.pairs.size());
    if (tp > n_pred || tp > n_ref)
        throw std::invalid_argument("detection_metrics: counts inconsistent with matching");
    DetectionMetrics dm;
    dm.tp = tp;
    dm.fp = n_pred - tp;
    dm.fn = n_ref - tp;
    dm.precision = safe_div(static_cast<double>(tp), static_cast<double>(n_pred));
    dm.recall = safe_div(static_cast<double>(tp), static_cast<double>(n_ref));
    dm.f1 = harmonic(dm.precision, dm.recall);
    if (n_pred > 0) {
        double ca = 1.0 - static_cast<double>(std::llabs(n_pred - n_ref)) /
                              static_cast<double>(n_pred);
        dm.counting_accuracy = std::clamp(ca, 0.0, 1.0);
    }
    dm.objective = harmonic(dm.f1, dm.counting_accuracy);
    return dm;
}

PixelMetrics pixel_metrics(const Grid& pred, const Grid& ref) {
    if (!pred.same_geometry(ref))
        throw DataError("pixel_metrics: geometry mismatch");
    PixelMetrics pm;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        float pv = pred.values[i];
        float rv = ref.values[i];
        if (pred.is_nodata(pv) || ref.is_nodata(rv)) continue;
        bool p = covered(pv);
        bool r = covered(rv);
        pm.tp += p && r;
        pm.fp += p && !r;
        pm.fn += !p && r;
    }
    pm.precision = safe_div(static_cast<double>(pm.tp), static_cast<double>(pm.tp + pm.fp));
    pm.recall = safe_div(static_cast<double>(pm.tp), static_cast<double>(pm.tp + pm.fn));
    pm.f1 = harmonic(pm.precision, pm.recall);
    return pm;
}

CoverR2 cover_fraction_r2(const Grid& pred_cover, const Grid& ref_chm, double window,
                          double height_threshold, double min_valid_fraction) {
    if (!(window >= 25.0))
        throw std::invalid_argument("cover_fraction_r2: window must be >= 25 m");
    if (!(min_valid_fraction >= 0.0 && min_valid_fraction <= 1.0))
        throw std::invalid_argument("cover_fraction_r2: min_valid_fraction must be in [0, 1]");
    if (!pred_cover.same_geometry(ref_chm))
        throw DataError("cover_fraction_r2: geometry mismatch");
    pred_cover.validate();
    ref_chm.validate();

    double ps = pred_cover.pixel_size;
    int block_px = std::max(1, static_cast<int>(std::ceil(window / ps - 1e-9)));
    int blocks_x = (pred_cover.width + block_px - 1) / block_px;
    int blocks_y = (pred_cover.height + block_px - 1) / block_px;
    float thr = static_cast<float>(height_threshold);

    struct Slot {
        bool kept = false;
        CoverWindow w;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(blocks_x) * blocks_y);

    parallel_chunks(blocks_y, [&](int64_t b0, int64_t b1) {
        for (int by = static_cast<int>(b0); by < b1; ++by) {
            int r0 = by * block_px;
            int r1 = std::min(pred_cover.height, r0 + block_px);
            if ((r1 - r0) * ps < 25.0 - 1e-9) continue;
            for (int bx = 0; bx < blocks_x; ++bx) {
                int c0 = bx * block_px;
                int c1 = std::min(pred_cover.width, c0 + block_px);
                if ((c1 - c0) * ps < 25.0 - 1e-9) continue;
                int64_t total = static_cast<int64_t>(r1 - r0) * (c1 - c0);
                int64_t valid = 0, pred_pos = 0, ref_pos = 0;
                for (int r = r0; r < r1; ++r)
                    for (int c = c0; c < c1; ++c) {
                        float pv = pred_cover.at(c, r);
                        float rv = ref_chm.at(c, r);
                        if (pred_cover.is_nodata(pv) || ref_chm.is_nodata(rv)) continue;
                        ++valid;
                        pred_pos += covered(pv);
                        ref_pos += rv >= thr;
                    }
                if (valid == 0) continue;
                if (static_cast<double>(valid) < min_valid_fraction * total) continue;
                Slot& s = slots[static_cast<std::size_t>(by) * blocks_x + bx];
                s.kept = true;
                s.w.pred_frac = static_cast<double>(pred_pos) / valid;
                s.w.ref_frac = static_cast<double>(ref_pos) / valid;
            }
        }
    });

    CoverR2 out;
    for (const Slot& s : slots)
        if (s.kept) out.windows.push_back(s.w);
    if (out.windows.size() < 2)
        throw DataError("cover_fraction_r2: fewer than 2 usable blocks");

    double mean_ref = 0.0;
    for (const CoverWindow& w : out.windows) mean_ref += w.ref_frac;
    mean_ref /= static_cast<double>(out.windows.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (const CoverWindow& w : out.windows) {
        ss_res += (w.pred_frac - w.ref_frac) * (w.pred_frac - w.ref_frac);
        ss_tot += (w.ref_frac - mean_ref) * (w.ref_frac - mean_ref);
    }
    if (ss_tot == 0.0)
        throw DataError("cover_fraction_r2: zero reference variance");
    out.r2 = 1.0 - ss_res / ss_tot;
    return out;
}

SweepResult sweep_threshold(const Grid& score_grid, const Grid& ref_chm,
                            const std::vector<double>& thresholds, SweepMetric metric,
                            const SweepConfig& cfg) {
    if (thresholds.empty())
        throw std::invalid_argument("sweep_threshold: thresholds must be nonempty");
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw std::invalid_argument("sweep_threshold: thresholds must be ascending");
    if (!score_grid.same_geometry(ref_chm))
        throw DataError("sweep_threshold: geometry mismatch");

    Grid ref_bin;
    if (metric == SweepMetric::f1_pixel) {
        ref_bin = ref_chm;
        float ht = static_cast<float>(cfg.height_threshold);
        for (float& v : ref_bin.values) {
            if (ref_bin.is_nodata(v)) continue;
            v = v >= ht ? 1.0f : 0.0f;
        }
    }

    SweepResult res;
    Grid pred_bin = score_grid;
    for (double t : thresholds) {
        float ft = static_cast<float>(t);
        for (std::size_t i = 0; i < score_grid.values.size(); ++i) {
            float v = score_grid.values[i];
            if (score_grid.is_nodata(v)) continue;
            pred_bin.values[i] = v >= ft ? 1.0f : 0.0f;
        }
        SweepRow row;
        row.threshold = t;
        if (metric == SweepMetric::r2) {
            row.score = cover_fraction_r2(pred_bin, ref_chm, cfg.window, cfg.height_threshold,
                                          cfg.min_valid_fraction)
                            .r2;
        } else {
            PixelMetrics pm = pixel_metrics(pred_bin, ref_bin);
            row.score = pm.f1;
            row.precision = pm.precision;
            row.recall = pm.recall;
        }
        res.table.push_back(row);
        if (res.table.size() == 1 || row.score > res.best_score) {
            res.best_score = row.score;
            res.best_threshold = t;
        }
    }
    return res;
}

} // namespace treemap
