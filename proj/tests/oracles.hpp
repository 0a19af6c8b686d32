#pragma once

// Reference implementations for the test suites. Everything here is written
// directly from the operation definitions as plain loop nests, independent of
// the library kernels it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "i2i/rng.hpp"
#include "i2i/tensor.hpp"

namespace oracle {

template <class S>
i2i::TensorT<S> conv3d_ref(const i2i::TensorT<S>& x, const i2i::TensorT<S>& kernel,
                           const i2i::TensorT<S>& bias, bool same_padding = true) {
    const i2i::Shape5 xs = x.shape(), ks = kernel.shape();
    const std::int64_t pd = same_padding ? ks.d / 2 : 0;
    const std::int64_t ph = same_padding ? ks.h / 2 : 0;
    const std::int64_t pw = same_padding ? ks.w / 2 : 0;
    const i2i::Shape5 os{xs.n, ks.n, xs.d - ks.d + 1 + 2 * pd, xs.h - ks.h + 1 + 2 * ph,
                         xs.w - ks.w + 1 + 2 * pw};
    i2i::TensorT<S> out(os);
    for (std::int64_t n = 0; n < os.n; ++n)
        for (std::int64_t co = 0; co < os.c; ++co)
            for (std::int64_t od = 0; od < os.d; ++od)
                for (std::int64_t oh = 0; oh < os.h; ++oh)
                    for (std::int64_t ow = 0; ow < os.w; ++ow) {
                        double acc = static_cast<double>(bias.at(0, co, 0, 0, 0));
                        for (std::int64_t ci = 0; ci < xs.c; ++ci)
                            for (std::int64_t kd = 0; kd < ks.d; ++kd)
                                for (std::int64_t kh = 0; kh < ks.h; ++kh)
                                    for (std::int64_t kw = 0; kw < ks.w; ++kw) {
                                        const std::int64_t id = od + kd - pd;
                                        const std::int64_t ih = oh + kh - ph;
                                        const std::int64_t iw = ow + kw - pw;
                                        if (id < 0 || id >= xs.d || ih < 0 || ih >= xs.h ||
                                            iw < 0 || iw >= xs.w)
                                            continue;
                                        acc += static_cast<double>(x.at(n, ci, id, ih, iw)) *
                                               static_cast<double>(kernel.at(co, ci, kd, kh, kw));
                                    }
                        out.at_mut(n, co, od, oh, ow) = static_cast<S>(acc);
                    }
    return out;
}

template <class S>
i2i::TensorT<S> avg_pool_ref(const i2i::TensorT<S>& x) {
    const i2i::Shape5 xs = x.shape();
    i2i::TensorT<S> out(i2i::Shape5{xs.n, xs.c, xs.d / 2, xs.h / 2, xs.w / 2});
    const i2i::Shape5 os = out.shape();
    for (std::int64_t n = 0; n < os.n; ++n)
        for (std::int64_t c = 0; c < os.c; ++c)
            for (std::int64_t d = 0; d < os.d; ++d)
                for (std::int64_t h = 0; h < os.h; ++h)
                    for (std::int64_t w = 0; w < os.w; ++w) {
                        double acc = 0.0;
                        for (int dz = 0; dz < 2; ++dz)
                            for (int dy = 0; dy < 2; ++dy)
                                for (int dx = 0; dx < 2; ++dx)
                                    acc += static_cast<double>(
                                        x.at(n, c, 2 * d + dz, 2 * h + dy, 2 * w + dx));
                        out.at_mut(n, c, d, h, w) = static_cast<S>(acc / 8.0);
                    }
    return out;
}

template <class S>
i2i::TensorT<S> upsample_nearest_ref(const i2i::TensorT<S>& x) {
    const i2i::Shape5 xs = x.shape();
    i2i::TensorT<S> out(i2i::Shape5{xs.n, xs.c, xs.d * 2, xs.h * 2, xs.w * 2});
    const i2i::Shape5 os = out.shape();
    for (std::int64_t n = 0; n < os.n; ++n)
        for (std::int64_t c = 0; c < os.c; ++c)
            for (std::int64_t d = 0; d < os.d; ++d)
                for (std::int64_t h = 0; h < os.h; ++h)
                    for (std::int64_t w = 0; w < os.w; ++w)
                        out.at_mut(n, c, d, h, w) = x.at(n, c, d / 2, h / 2, w / 2);
    return out;
}

/// Half-voxel-center trilinear doubling: output index o reads the input at
/// coordinate o/2 - 1/4 with clamped borders.
template <class S>
i2i::TensorT<S> upsample_trilinear_ref(const i2i::TensorT<S>& x) {
    const i2i::Shape5 xs = x.shape();
    i2i::TensorT<S> out(i2i::Shape5{xs.n, xs.c, xs.d * 2, xs.h * 2, xs.w * 2});
    const i2i::Shape5 os = out.shape();
    auto sample = [](std::int64_t o, std::int64_t extent, std::int64_t& lo, std::int64_t& hi,
                     double& t) {
        const double s = 0.5 * static_cast<double>(o) - 0.25;
        const double fl = std::floor(s);
        t = s - fl;
        lo = std::max<std::int64_t>(0, std::min(extent - 1, static_cast<std::int64_t>(fl)));
        hi = std::max<std::int64_t>(0, std::min(extent - 1, static_cast<std::int64_t>(fl) + 1));
    };
    for (std::int64_t n = 0; n < os.n; ++n)
        for (std::int64_t c = 0; c < os.c; ++c)
            for (std::int64_t d = 0; d < os.d; ++d)
                for (std::int64_t h = 0; h < os.h; ++h)
                    for (std::int64_t w = 0; w < os.w; ++w) {
                        std::int64_t d0, d1, h0, h1, w0, w1;
                        double td, th, tw;
                        sample(d, xs.d, d0, d1, td);
                        sample(h, xs.h, h0, h1, th);
                        sample(w, xs.w, w0, w1, tw);
                        double acc = 0.0;
                        for (int bz = 0; bz < 2; ++bz)
                            for (int by = 0; by < 2; ++by)
                                for (int bx = 0; bx < 2; ++bx) {
                                    const double wgt = (bz ? td : 1 - td) * (by ? th : 1 - th) *
                                                       (bx ? tw : 1 - tw);
                                    acc += wgt * static_cast<double>(x.at(n, c, bz ? d1 : d0,
                                                                          by ? h1 : h0,
                                                                          bx ? w1 : w0));
                                }
                        out.at_mut(n, c, d, h, w) = static_cast<S>(acc);
                    }
    return out;
}

/// Summed binary cross-entropy from logits, evaluated per voxel in long
/// double straight from the definition.
template <class S>
long double bce_sum_ref(const i2i::TensorT<S>& act, const i2i::TensorT<S>& labels,
                        double pos_weight = 1.0, double neg_weight = 1.0) {
    const auto a = act.data();
    const auto y = labels.data();
    long double total = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const long double av = static_cast<long double>(a[i]);
        // 1 - sigma(a) == sigma(-a); evaluating each factor directly avoids
        // the cancellation in (1 - sigma) at large logits.
        const long double sig_pos = 1.0L / (1.0L + std::exp(-av));
        const long double sig_neg = 1.0L / (1.0L + std::exp(av));
        if (y[i] > S(0.5))
            total += -static_cast<long double>(pos_weight) * std::log(sig_pos);
        else
            total += -static_cast<long double>(neg_weight) * std::log(sig_neg);
    }
    return total;
}

struct MatchRef {
    std::int64_t tp = 0;
    double total_dist = 0.0;
};

/// Exhaustive maximum-cardinality minimum-total-distance one-to-one matching
/// over candidate pairs with distance <= max_dist. Exponential search with
/// memoization over (pred index, used-gt bitmask); sides must stay <= ~12.
inline MatchRef exhaustive_match_ref(const std::vector<std::array<double, 3>>& pred,
                                     const std::vector<std::array<double, 3>>& gt,
                                     double max_dist) {
    const std::size_t np = pred.size(), ng = gt.size();
    std::vector<std::vector<double>> dist(np, std::vector<double>(ng));
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < ng; ++j) {
            double s = 0.0;
            for (int a = 0; a < 3; ++a) {
                const double d = pred[i][a] - gt[j][a];
                s += d * d;
            }
            dist[i][j] = std::sqrt(s);
        }
    struct Best {
        std::int64_t tp;
        double cost;
    };
    std::map<std::pair<std::size_t, std::uint32_t>, Best> memo;
    std::function<Best(std::size_t, std::uint32_t)> go = [&](std::size_t i,
                                                             std::uint32_t used) -> Best {
        if (i == np) return {0, 0.0};
        const auto key = std::make_pair(i, used);
        const auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        Best best = go(i + 1, used);  // leave pred i unmatched
        for (std::size_t j = 0; j < ng; ++j) {
            if (used & (1u << j)) continue;
            if (dist[i][j] > max_dist) continue;
            Best sub = go(i + 1, used | (1u << j));
            sub.tp += 1;
            sub.cost += dist[i][j];
            if (sub.tp > best.tp || (sub.tp == best.tp && sub.cost < best.cost)) best = sub;
        }
        memo[key] = best;
        return best;
    };
    const Best b = go(0, 0);
    return {b.tp, b.cost};
}

/// Brute-force squared Euclidean distance to the nearest positive voxel.
inline std::vector<double> edt_ref(const std::vector<float>& gt, std::int64_t d, std::int64_t h,
                                   std::int64_t w) {
    std::vector<std::array<std::int64_t, 3>> pos;
    for (std::int64_t z = 0; z < d; ++z)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x)
                if (gt[static_cast<std::size_t>((z * h + y) * w + x)] > 0.5f)
                    pos.push_back({z, y, x});
    std::vector<double> out(static_cast<std::size_t>(d * h * w),
                            std::numeric_limits<double>::infinity());
    for (std::int64_t z = 0; z < d; ++z)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& p : pos) {
                    const double dz = static_cast<double>(z - p[0]);
                    const double dy = static_cast<double>(y - p[1]);
                    const double dx = static_cast<double>(x - p[2]);
                    best = std::min(best, dz * dz + dy * dy + dx * dx);
                }
                out[static_cast<std::size_t>((z * h + y) * w + x)] = best;
            }
    return out;
}

/// |a - b| / max(|a|, |b|, floor). A floor of 1.0 turns this into an absolute
/// comparison wherever the values themselves are below 1.
template <class S>
double rel_err(S a, S b, double floor = 1e-12) {
    const double da = static_cast<double>(a), db = static_cast<double>(b);
    const double denom = std::max({std::abs(da), std::abs(db), floor});
    return std::abs(da - db) / denom;
}

template <class S>
double max_rel_err(const i2i::TensorT<S>& a, const i2i::TensorT<S>& b, double floor = 1e-12) {
    const auto av = a.data(), bv = b.data();
    double worst = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i)
        worst = std::max(worst, rel_err(av[i], bv[i], floor));
    return worst;
}

template <class S>
bool bit_equal(const i2i::TensorT<S>& a, const i2i::TensorT<S>& b) {
    if (!(a.shape() == b.shape())) return false;
    const auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < av.size(); ++i)
        if (std::memcmp(&av[i], &bv[i], sizeof(S)) != 0) return false;
    return true;
}

template <class S>
i2i::TensorT<S> random_tensor(const i2i::Shape5& shape, i2i::Rng& rng, double lo = -1.0,
                              double hi = 1.0) {
    i2i::TensorT<S> t(shape);
    auto buf = t.mutable_data();
    for (auto& v : buf) v = static_cast<S>(rng.uniform(lo, hi));
    return t;
}

template <class S>
i2i::TensorT<S> random_binary(const i2i::Shape5& shape, i2i::Rng& rng, double p = 0.3) {
    i2i::TensorT<S> t(shape);
    auto buf = t.mutable_data();
    for (auto& v : buf) v = rng.uniform() < p ? S(1) : S(0);
    return t;
}

}  // namespace oracle
