#include "i2i/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace i2i {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_volume(const Tensor& t, const char* what) {
    const Shape5& s = t.shape();
    if (s.n != 1 || s.c != 1)
        throw std::invalid_argument(detail::msg(what, ": expected a single-channel volume, got ", s.str()));
}

struct Voxel {
    std::int32_t z, y, x;
    std::int64_t flat;
};

std::vector<Voxel> positives(std::span<const float> v, std::int64_t d, std::int64_t h, std::int64_t w) {
    std::vector<Voxel> out;
    std::int64_t i = 0;
    for (std::int32_t z = 0; z < d; ++z)
        for (std::int32_t y = 0; y < h; ++y)
            for (std::int32_t x = 0; x < w; ++x, ++i)
                if (v[static_cast<std::size_t>(i)] > 0.5f) out.push_back({z, y, x, i});
    return out;
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
void edt_1d(const double* f, double* d, std::int64_t n, std::vector<std::int64_t>& v,
            std::vector<double>& z) {
    v.resize(static_cast<std::size_t>(n));
    z.resize(static_cast<std::size_t>(n) + 1);
    std::int64_t k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (std::int64_t q = 1; q < n; ++q) {
        double s;
        while (true) {
            const std::int64_t p = v[static_cast<std::size_t>(k)];
            s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
                (2.0 * static_cast<double>(q - p));
            if (!(s <= z[static_cast<std::size_t>(k)])) break;
            --k;
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = kInf;
    }
    k = 0;
    for (std::int64_t q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(k) + 1] < static_cast<double>(q)) ++k;
        const std::int64_t p = v[static_cast<std::size_t>(k)];
        d[q] = static_cast<double>(q - p) * static_cast<double>(q - p) + f[p];
    }
}

std::vector<double> squared_edt(std::span<const float> gt, std::int64_t d, std::int64_t h,
                                std::int64_t w) {
    // background seeds use a large finite value: literal infinities produce
    // NaN / -inf parabola intersections that break the envelope stack
    constexpr double kFar = 1e30;
    std::vector<double> dist(static_cast<std::size_t>(d * h * w));
    for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = gt[i] > 0.5f ? 0.0 : kFar;

    std::vector<std::int64_t> v;
    std::vector<double> z;
    const std::int64_t mx = std::max({d, h, w});
    std::vector<double> line(static_cast<std::size_t>(mx)), out(static_cast<std::size_t>(mx));

    for (std::int64_t zz = 0; zz < d; ++zz)  // along W
        for (std::int64_t yy = 0; yy < h; ++yy) {
            double* row = dist.data() + (zz * h + yy) * w;
            edt_1d(row, out.data(), w, v, z);
            std::copy(out.begin(), out.begin() + w, row);
        }
    for (std::int64_t zz = 0; zz < d; ++zz)  // along H
        for (std::int64_t xx = 0; xx < w; ++xx) {
            for (std::int64_t yy = 0; yy < h; ++yy) line[static_cast<std::size_t>(yy)] = dist[static_cast<std::size_t>((zz * h + yy) * w + xx)];
            edt_1d(line.data(), out.data(), h, v, z);
            for (std::int64_t yy = 0; yy < h; ++yy) dist[static_cast<std::size_t>((zz * h + yy) * w + xx)] = out[static_cast<std::size_t>(yy)];
        }
    for (std::int64_t yy = 0; yy < h; ++yy)  // along D
        for (std::int64_t xx = 0; xx < w; ++xx) {
            for (std::int64_t zz = 0; zz < d; ++zz) line[static_cast<std::size_t>(zz)] = dist[static_cast<std::size_t>((zz * h + yy) * w + xx)];
            edt_1d(line.data(), out.data(), d, v, z);
            for (std::int64_t zz = 0; zz < d; ++zz) dist[static_cast<std::size_t>((zz * h + yy) * w + xx)] = out[static_cast<std::size_t>(zz)];
        }
    return dist;
}

struct BallOffset {
    std::int32_t dz, dy, dx;
    double dist;
};

std::vector<BallOffset> ball_offsets(double max_dist) {
    std::vector<BallOffset> offs;
    const std::int32_t r = static_cast<std::int32_t>(std::floor(max_dist));
    const double r2 = max_dist * max_dist;
    for (std::int32_t dz = -r; dz <= r; ++dz)
        for (std::int32_t dy = -r; dy <= r; ++dy)
            for (std::int32_t dx = -r; dx <= r; ++dx) {
                const double d2 = static_cast<double>(dz) * dz + static_cast<double>(dy) * dy +
                                  static_cast<double>(dx) * dx;
                if (d2 <= r2) offs.push_back({dz, dy, dx, std::sqrt(d2)});
            }
    return offs;
}

struct Edge {
    std::int32_t to;  ///< gt-side index
    double cost;
};

/// Candidate edges per predicted positive: ground-truth positives within
/// max_dist, found by scanning a precomputed ball of integer offsets.
std::vector<std::vector<Edge>> candidate_edges(const std::vector<Voxel>& pred,
                                               const std::vector<Voxel>& gt, double max_dist,
                                               std::int64_t d, std::int64_t h, std::int64_t w) {
    std::vector<std::int32_t> gt_id(static_cast<std::size_t>(d * h * w), -1);
    for (std::size_t j = 0; j < gt.size(); ++j) gt_id[static_cast<std::size_t>(gt[j].flat)] = static_cast<std::int32_t>(j);
    const auto offs = ball_offsets(max_dist);
    std::vector<std::vector<Edge>> adj(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Voxel& p = pred[i];
        for (const BallOffset& o : offs) {
            const std::int32_t z = p.z + o.dz, y = p.y + o.dy, x = p.x + o.dx;
            if (z < 0 || z >= d || y < 0 || y >= h || x < 0 || x >= w) continue;
            const std::int32_t j = gt_id[static_cast<std::size_t>((static_cast<std::int64_t>(z) * h + y) * w + x)];
            if (j >= 0) adj[i].push_back({j, o.dist});
        }
    }
    return adj;
}

/// Hopcroft-Karp maximum-cardinality matching; returns pred->gt assignment.
std::vector<std::int32_t> max_cardinality(const std::vector<std::vector<Edge>>& adj,
                                          std::size_t n_gt) {
    const std::size_t n = adj.size();
    std::vector<std::int32_t> ml(n, -1), mr(n_gt, -1);
    std::vector<std::int32_t> layer(n);
    std::vector<std::size_t> it(n);
    std::deque<std::int32_t> queue;

    auto bfs = [&]() {
        queue.clear();
        bool reachable = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (ml[i] < 0) {
                layer[i] = 0;
                queue.push_back(static_cast<std::int32_t>(i));
            } else {
                layer[i] = -1;
            }
        }
        while (!queue.empty()) {
            const std::int32_t i = queue.front();
            queue.pop_front();
            for (const Edge& e : adj[static_cast<std::size_t>(i)]) {
                const std::int32_t m = mr[static_cast<std::size_t>(e.to)];
                if (m < 0) {
                    reachable = true;
                } else if (layer[static_cast<std::size_t>(m)] < 0) {
                    layer[static_cast<std::size_t>(m)] = layer[static_cast<std::size_t>(i)] + 1;
                    queue.push_back(m);
                }
            }
        }
        return reachable;
    };
    std::function<bool(std::int32_t)> dfs = [&](std::int32_t i) {
        for (std::size_t& k = it[static_cast<std::size_t>(i)]; k < adj[static_cast<std::size_t>(i)].size(); ++k) {
            const Edge& e = adj[static_cast<std::size_t>(i)][k];
            const std::int32_t m = mr[static_cast<std::size_t>(e.to)];
            if (m < 0 || (layer[static_cast<std::size_t>(m)] == layer[static_cast<std::size_t>(i)] + 1 && dfs(m))) {
                ml[static_cast<std::size_t>(i)] = e.to;
                mr[static_cast<std::size_t>(e.to)] = i;
                return true;
            }
        }
        layer[static_cast<std::size_t>(i)] = -1;
        return false;
    };
    while (bfs()) {
        std::fill(it.begin(), it.end(), std::size_t{0});
        for (std::size_t i = 0; i < n; ++i)
            if (ml[i] < 0) dfs(static_cast<std::int32_t>(i));
    }
    return ml;
}

/// Successive shortest augmenting paths on the residual graph: each phase
/// finds the globally cheapest alternating path from any free prediction to
/// any free ground-truth voxel and augments along it, so the result has
/// maximum cardinality and, among such matchings, minimum total distance.
/// Bellman-Ford handles the negative residual arcs; instances stay small
/// enough that potentials are not worth the bookkeeping.
std::vector<std::int32_t> min_cost_assignment(const std::vector<std::vector<Edge>>& adj,
                                              std::size_t n_gt) {
    const std::size_t n = adj.size();
    std::vector<std::int32_t> ml(n, -1), mr(n_gt, -1);
    std::vector<double> dist(n_gt);
    std::vector<std::int32_t> parent(n_gt);  // pred node that reaches this gt node
    while (true) {
        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(parent.begin(), parent.end(), -1);
        for (std::size_t i = 0; i < n; ++i) {
            if (ml[i] >= 0) continue;
            for (const Edge& e : adj[i])
                if (e.cost < dist[static_cast<std::size_t>(e.to)]) {
                    dist[static_cast<std::size_t>(e.to)] = e.cost;
                    parent[static_cast<std::size_t>(e.to)] = static_cast<std::int32_t>(i);
                }
        }
        for (std::size_t round = 0; round + 1 < n_gt + 2; ++round) {
            bool changed = false;
            for (std::size_t j = 0; j < n_gt; ++j) {
                if (mr[j] < 0 || dist[j] == kInf) continue;
                const std::int32_t i = mr[j];
                double edge_ij = kInf;
                for (const Edge& e : adj[static_cast<std::size_t>(i)])
                    if (e.to == static_cast<std::int32_t>(j)) edge_ij = e.cost;
                for (const Edge& e : adj[static_cast<std::size_t>(i)]) {
                    const double nd = dist[j] - edge_ij + e.cost;
                    if (nd < dist[static_cast<std::size_t>(e.to)]) {
                        dist[static_cast<std::size_t>(e.to)] = nd;
                        parent[static_cast<std::size_t>(e.to)] = i;
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }
        std::int32_t best = -1;
        double best_dist = kInf;
        for (std::size_t j = 0; j < n_gt; ++j)
            if (mr[j] < 0 && dist[j] < best_dist) {
                best_dist = dist[j];
                best = static_cast<std::int32_t>(j);
            }
        if (best < 0) break;
        std::int32_t j = best;
        while (true) {
            const std::int32_t i = parent[static_cast<std::size_t>(j)];
            const std::int32_t next = ml[static_cast<std::size_t>(i)];
            ml[static_cast<std::size_t>(i)] = j;
            mr[static_cast<std::size_t>(j)] = i;
            if (next < 0) break;
            j = next;
        }
    }
    return ml;
}

std::vector<std::int32_t> greedy_assignment(const std::vector<std::vector<Edge>>& adj,
                                            std::size_t n_gt) {
    struct Cand {
        double cost;
        std::int32_t i, j;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < adj.size(); ++i)
        for (const Edge& e : adj[i]) cands.push_back({e.cost, static_cast<std::int32_t>(i), e.to});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.cost != b.cost) return a.cost < b.cost;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    std::vector<std::int32_t> ml(adj.size(), -1), mr(n_gt, -1);
    for (const Cand& c : cands)
        if (ml[static_cast<std::size_t>(c.i)] < 0 && mr[static_cast<std::size_t>(c.j)] < 0) {
            ml[static_cast<std::size_t>(c.i)] = c.j;
            mr[static_cast<std::size_t>(c.j)] = c.i;
        }
    return ml;
}

double f_measure(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

PRPoint make_point(double threshold, std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    PRPoint pt;
    pt.threshold = threshold;
    pt.tp = tp;
    pt.fp = fp;
    pt.fn = fn;
    pt.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
    pt.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    pt.f = f_measure(pt.precision, pt.recall);
    return pt;
}

}  // namespace

Tensor evaluation_mask(const Tensor& vessel_gt, double radius) {
    check_volume(vessel_gt, "evaluation_mask");
    if (radius < 0.0) throw std::invalid_argument("evaluation_mask: radius must be non-negative");
    const Shape5& s = vessel_gt.shape();
    const auto src = vessel_gt.data();
    bool any = false;
    for (float v : src)
        if (v > 0.5f) {
            any = true;
            break;
        }
    if (!any) throw std::invalid_argument("evaluation_mask: ground truth has no positive voxels");
    const auto d2 = squared_edt(src, s.d, s.h, s.w);
    Tensor mask(s);
    auto out = mask.mutable_data();
    const double r2 = radius * radius;
    for (std::size_t i = 0; i < d2.size(); ++i) out[i] = d2[i] <= r2 ? 1.0f : 0.0f;
    return mask;
}

MatchResult match_boundaries(const Tensor& pred, const Tensor& gt, double max_dist,
                             MatchAlgo algo) {
    check_volume(pred, "match_boundaries");
    check_volume(gt, "match_boundaries");
    if (!pred.shape().spatial_equals(gt.shape()))
        throw std::invalid_argument(detail::msg("match_boundaries: extents differ, ",
                                                pred.shape().str(), " vs ", gt.shape().str()));
    if (max_dist < 0.0) throw std::invalid_argument("match_boundaries: max_dist must be non-negative");
    const Shape5& s = pred.shape();
    const auto pv = positives(pred.data(), s.d, s.h, s.w);
    const auto gv = positives(gt.data(), s.d, s.h, s.w);
    const auto adj = candidate_edges(pv, gv, max_dist, s.d, s.h, s.w);
    const auto ml = algo == MatchAlgo::kGreedy ? greedy_assignment(adj, gv.size())
                                               : min_cost_assignment(adj, gv.size());
    MatchResult r;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        if (ml[i] < 0) continue;
        const Voxel& a = pv[i];
        const Voxel& b = gv[static_cast<std::size_t>(ml[i])];
        const double dz = a.z - b.z, dy = a.y - b.y, dx = a.x - b.x;
        r.pairs.push_back({a.flat, b.flat, std::sqrt(dz * dz + dy * dy + dx * dx)});
    }
    r.tp = static_cast<std::int64_t>(r.pairs.size());
    r.fp = static_cast<std::int64_t>(pv.size()) - r.tp;
    r.fn = static_cast<std::int64_t>(gv.size()) - r.tp;
    return r;
}

std::vector<double> default_thresholds() {
    std::vector<double> t;
    for (int k = 99; k >= 1; --k) t.push_back(static_cast<double>(k) / 100.0);
    return t;
}

double default_max_dist(const std::array<std::int64_t, 3>& extents) {
    const double d = static_cast<double>(extents[0]), h = static_cast<double>(extents[1]),
                 w = static_cast<double>(extents[2]);
    return 0.0075 * std::sqrt(d * d + h * h + w * w);
}

PRCurve pr_curve(const Tensor& prob, const Tensor& gt, const Tensor& mask,
                 const std::vector<double>& thresholds, double max_dist, MatchAlgo algo) {
    check_volume(prob, "pr_curve");
    check_volume(gt, "pr_curve");
    check_volume(mask, "pr_curve");
    if (!prob.shape().spatial_equals(gt.shape()) || !prob.shape().spatial_equals(mask.shape()))
        throw std::invalid_argument("pr_curve: prob, gt, and mask extents must agree");
    if (thresholds.empty()) throw std::invalid_argument("pr_curve: empty threshold list");
    for (std::size_t k = 1; k < thresholds.size(); ++k)
        if (!(thresholds[k] < thresholds[k - 1]))
            throw std::invalid_argument("pr_curve: thresholds must be strictly descending");

    const Shape5& s = prob.shape();
    const auto pr = prob.data();
    const auto gr = gt.data();
    const auto mr = mask.data();

    std::vector<float> gt_masked(pr.size());
    for (std::size_t i = 0; i < pr.size(); ++i) gt_masked[i] = mr[i] > 0.5f ? gr[i] : 0.0f;
    const auto gv = positives(std::span<const float>(gt_masked), s.d, s.h, s.w);
    const auto offs = ball_offsets(max_dist);

    // Matching cardinality is orientation-free; anchoring the adjacency on
    // the (fixed, sparse) ground-truth side keeps the per-threshold work
    // proportional to gt x ball even when low thresholds make the
    // prediction dense.
    PRCurve curve;
    std::vector<std::int32_t> pred_id(pr.size());
    for (double t : thresholds) {
        std::int32_t n_pred = 0;
        for (std::size_t i = 0; i < pr.size(); ++i)
            pred_id[i] = (mr[i] > 0.5f && static_cast<double>(pr[i]) >= t) ? n_pred++ : -1;
        std::vector<std::vector<Edge>> adj(gv.size());
        for (std::size_t j = 0; j < gv.size(); ++j) {
            const Voxel& g = gv[j];
            for (const BallOffset& o : offs) {
                const std::int32_t z = g.z + o.dz, y = g.y + o.dy, x = g.x + o.dx;
                if (z < 0 || z >= s.d || y < 0 || y >= s.h || x < 0 || x >= s.w) continue;
                const std::int32_t id =
                    pred_id[static_cast<std::size_t>((static_cast<std::int64_t>(z) * s.h + y) * s.w + x)];
                if (id >= 0) adj[j].push_back({id, o.dist});
            }
        }
        std::int64_t tp = 0;
        const auto ml = algo == MatchAlgo::kGreedy
                            ? greedy_assignment(adj, static_cast<std::size_t>(n_pred))
                            : max_cardinality(adj, static_cast<std::size_t>(n_pred));
        for (auto m : ml) tp += m >= 0 ? 1 : 0;
        curve.points.push_back(make_point(t, tp, static_cast<std::int64_t>(n_pred) - tp,
                                          static_cast<std::int64_t>(gv.size()) - tp));
    }
    return curve;
}

BenchmarkSummary summarize(const std::vector<PRCurve>& curves) {
    if (curves.empty()) throw std::invalid_argument("summarize: no curves");
    const std::size_t nt = curves.front().points.size();
    for (const PRCurve& c : curves) {
        if (c.points.size() != nt)
            throw std::invalid_argument("summarize: curves have differing threshold counts");
        for (std::size_t k = 0; k < nt; ++k)
            if (c.points[k].threshold != curves.front().points[k].threshold)
                throw std::invalid_argument("summarize: curves have differing threshold grids");
    }

    BenchmarkSummary out;

    // dataset-aggregated curve
    std::vector<PRPoint> agg(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        std::int64_t tp = 0, fp = 0, fn = 0;
        for (const PRCurve& c : curves) {
            tp += c.points[k].tp;
            fp += c.points[k].fp;
            fn += c.points[k].fn;
        }
        agg[k] = make_point(curves.front().points[k].threshold, tp, fp, fn);
    }

    std::size_t best_k = 0;
    for (std::size_t k = 1; k < nt; ++k)
        if (agg[k].f > agg[best_k].f) best_k = k;
    out.ods = agg[best_k].f;
    out.ods_threshold = agg[best_k].threshold;
    out.ods_tp = agg[best_k].tp;
    out.ods_fp = agg[best_k].fp;
    out.ods_fn = agg[best_k].fn;
    out.ods_precision = agg[best_k].precision;
    out.ods_recall = agg[best_k].recall;

    // per-volume best threshold, counts aggregated at those choices
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (const PRCurve& c : curves) {
        std::size_t bk = 0;
        for (std::size_t k = 1; k < nt; ++k)
            if (c.points[k].f > c.points[bk].f) bk = k;
        out.per_volume_best_threshold.push_back(c.points[bk].threshold);
        tp += c.points[bk].tp;
        fp += c.points[bk].fp;
        fn += c.points[bk].fn;
    }
    const PRPoint ois = make_point(0.0, tp, fp, fn);
    out.ois = ois.f;

    // interpolated precision, integrated over recall
    std::vector<std::pair<double, double>> rp;  // (recall, precision), ascending recall
    for (const PRPoint& p : agg) rp.emplace_back(p.recall, p.precision);
    std::sort(rp.begin(), rp.end());
    double running = 0.0;
    for (std::size_t k = rp.size(); k-- > 0;) {
        running = std::max(running, rp[k].second);
        rp[k].second = running;
    }
    double ap = 0.0;
    double prev_r = 0.0, prev_p = rp.empty() ? 0.0 : rp.front().second;
    for (const auto& [r, p] : rp) {
        ap += (r - prev_r) * 0.5 * (p + prev_p);
        prev_r = r;
        prev_p = p;
    }
    out.ap = ap;
    return out;
}

void write_benchmark_csv(const std::string& path, const std::vector<std::string>& names,
                         const std::vector<PRCurve>& curves, const BenchmarkSummary& summary) {
    if (names.size() != curves.size())
        throw std::invalid_argument("write_benchmark_csv: one name per curve required");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error(detail::msg("write_benchmark_csv: cannot open ", path));
    f << "volume,threshold,tp,fp,fn,precision,recall,f\n";
    char buf[160];
    for (std::size_t i = 0; i < curves.size(); ++i)
        for (const PRPoint& p : curves[i].points) {
            std::snprintf(buf, sizeof buf, "%s,%.2f,%lld,%lld,%lld,%.9g,%.9g,%.9g\n",
                          names[i].c_str(), p.threshold, static_cast<long long>(p.tp),
                          static_cast<long long>(p.fp), static_cast<long long>(p.fn), p.precision,
                          p.recall, p.f);
            f << buf;
        }
    std::snprintf(buf, sizeof buf, "summary,%.2f,%lld,%lld,%lld,%.9g,%.9g,%.9g\n",
                  summary.ods_threshold, static_cast<long long>(summary.ods_tp),
                  static_cast<long long>(summary.ods_fp), static_cast<long long>(summary.ods_fn),
                  summary.ods_precision, summary.ods_recall, summary.ods);
    f << buf;
    if (!f) throw std::runtime_error(detail::msg("write_benchmark_csv: write failed for ", path));
}

void write_pr_svg(const std::string& path, const std::vector<PRCurve>& curves) {
    if (curves.empty()) throw std::invalid_argument("write_pr_svg: no curves");
    const std::size_t nt = curves.front().points.size();
    std::vector<std::pair<double, double>> rp;
    for (std::size_t k = 0; k < nt; ++k) {
        std::int64_t tp = 0, fp = 0, fn = 0;
        for (const PRCurve& c : curves) {
            tp += c.points[k].tp;
            fp += c.points[k].fp;
            fn += c.points[k].fn;
        }
        const PRPoint p = make_point(0.0, tp, fp, fn);
        rp.emplace_back(p.recall, p.precision);
    }
    std::sort(rp.begin(), rp.end());

    const double w = 480.0, hgt = 480.0, m = 48.0;
    auto px = [&](double r) { return m + r * (w - 2 * m); };
    auto py = [&](double p) { return hgt - m - p * (hgt - 2 * m); };
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error(detail::msg("write_pr_svg: cannot open ", path));
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" "
         "viewBox=\"0 0 480 480\">\n"
      << "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n"
      << "<line x1=\"" << m << "\" y1=\"" << hgt - m << "\" x2=\"" << w - m << "\" y2=\""
      << hgt - m << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << m << "\" y1=\"" << hgt - m << "\" x2=\"" << m << "\" y2=\"" << m
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"" << hgt - 12 << "\" text-anchor=\"middle\" "
         "font-size=\"14\">recall</text>\n"
      << "<text x=\"14\" y=\"" << hgt / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 14 " << hgt / 2
      << ")\">precision</text>\n<polyline fill=\"none\" stroke=\"#1f6feb\" stroke-width=\"2\" "
         "points=\"";
    for (const auto& [r, p] : rp) f << px(r) << "," << py(p) << " ";
    f << "\"/>\n";
    for (const auto& [r, p] : rp)
        f << "<circle cx=\"" << px(r) << "\" cy=\"" << py(p) << "\" r=\"2.5\" fill=\"#1f6feb\"/>\n";
    f << "</svg>\n";
    if (!f) throw std::runtime_error(detail::msg("write_pr_svg: write failed for ", path));
}

}  // namespace i2i
