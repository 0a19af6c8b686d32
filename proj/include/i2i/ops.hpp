#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <initializer_list>
#include <vector>

#include "i2i/tensor.hpp"

namespace i2i {

enum class ConvAlgo {
    kAuto,    ///< im2col for spatial kernels, direct for 1x1x1
    kDirect,  ///< explicit shift-and-accumulate loop nest
    kIm2col,  ///< lowered patch-matrix fast path
};

enum class UpsampleMode { kNearest, kTrilinear };

namespace detail {

template <class S>
TapeT<S>* common_tape(std::initializer_list<const TensorT<S>*> inputs) {
    TapeT<S>* tape = nullptr;
    for (const auto* t : inputs) {
        if (!t->on_tape()) continue;
        if (tape == nullptr)
            tape = t->tape();
        else if (tape != t->tape())
            throw std::invalid_argument("operation inputs belong to different tapes");
    }
    return tape;
}

inline std::int64_t clamp_idx(std::int64_t v, std::int64_t hi) {
    return std::max<std::int64_t>(0, std::min(v, hi));
}

// Per-axis taps for fixed x2 trilinear upsampling with half-voxel centers:
// output o samples input coordinate o/2 - 1/4, borders clamped.
struct LinTap {
    std::int64_t i0, i1;
    double w0, w1;
};

inline std::vector<LinTap> linear_taps_x2(std::int64_t in_extent) {
    std::vector<LinTap> taps(static_cast<std::size_t>(in_extent) * 2);
    for (std::int64_t o = 0; o < in_extent * 2; ++o) {
        const double s = 0.5 * static_cast<double>(o) - 0.25;
        const double f = std::floor(s);
        const double w1 = s - f;
        const std::int64_t lo = static_cast<std::int64_t>(f);
        taps[static_cast<std::size_t>(o)] = {clamp_idx(lo, in_extent - 1),
                                             clamp_idx(lo + 1, in_extent - 1), 1.0 - w1, w1};
    }
    return taps;
}

// ---------------------------------------------------------------------------
// conv3d kernels. The geometry is shared by the forward paths and both
// backward passes. Every output (or accumulator) element is reduced over
// (ci, kd, kh, kw) in ascending order, fixed per shape.
// ---------------------------------------------------------------------------

struct ConvGeom {
    std::int64_t N, C, D, H, W;   // input
    std::int64_t CO, KD, KH, KW;  // kernel
    std::int64_t PD, PH, PW;      // zero padding per axis
    std::int64_t OD, OH, OW;      // output
};

inline ConvGeom conv_geometry(const Shape5& x, const Shape5& k, const Shape5& b,
                              bool same_padding) {
    if (k.c != x.c)
        throw std::invalid_argument(msg("conv3d: kernel input channels do not match: kernel ",
                                        k.str(), " vs input ", x.str()));
    if (b.c != k.n || b.n != 1 || b.d != 1 || b.h != 1 || b.w != 1)
        throw std::invalid_argument(msg("conv3d: bias shape ", b.str(),
                                        " does not provide one value per output channel of kernel ",
                                        k.str()));
    ConvGeom g{};
    g.N = x.n; g.C = x.c; g.D = x.d; g.H = x.h; g.W = x.w;
    g.CO = k.n; g.KD = k.d; g.KH = k.h; g.KW = k.w;
    if (same_padding) {
        if (g.KD % 2 == 0 || g.KH % 2 == 0 || g.KW % 2 == 0)
            throw std::invalid_argument(
                msg("conv3d: same-padding requires odd kernel extents, kernel is ", k.str()));
        g.PD = g.KD / 2; g.PH = g.KH / 2; g.PW = g.KW / 2;
        g.OD = g.D; g.OH = g.H; g.OW = g.W;
    } else {
        g.PD = g.PH = g.PW = 0;
        g.OD = g.D - g.KD + 1; g.OH = g.H - g.KH + 1; g.OW = g.W - g.KW + 1;
        if (g.OD < 1 || g.OH < 1 || g.OW < 1)
            throw std::invalid_argument(msg("conv3d: kernel ", k.str(), " does not fit input ",
                                            x.str(), " without padding"));
    }
    return g;
}

template <class S>
void conv3d_forward_direct(const ConvGeom& g, const S* x, const S* k, const S* b, S* y) {
    const std::int64_t in_chan = g.D * g.H * g.W;
    const std::int64_t out_chan = g.OD * g.OH * g.OW;
    for (std::int64_t n = 0; n < g.N; ++n) {
        const S* xn = x + n * g.C * in_chan;
        for (std::int64_t co = 0; co < g.CO; ++co) {
            S* yc = y + (n * g.CO + co) * out_chan;
            std::fill(yc, yc + out_chan, b[co]);
            const S* kc = k + co * g.C * g.KD * g.KH * g.KW;
            for (std::int64_t ci = 0; ci < g.C; ++ci) {
                const S* xc = xn + ci * in_chan;
                for (std::int64_t dk = 0; dk < g.KD; ++dk)
                    for (std::int64_t hk = 0; hk < g.KH; ++hk)
                        for (std::int64_t wk = 0; wk < g.KW; ++wk) {
                            const S wv = kc[((ci * g.KD + dk) * g.KH + hk) * g.KW + wk];
                            if (wv == S(0)) continue;
                            const std::int64_t dz = dk - g.PD, dy = hk - g.PH, dx = wk - g.PW;
                            const std::int64_t z0 = std::max<std::int64_t>(0, -dz);
                            const std::int64_t z1 = std::min(g.OD, g.D - dz);
                            const std::int64_t y0 = std::max<std::int64_t>(0, -dy);
                            const std::int64_t y1 = std::min(g.OH, g.H - dy);
                            const std::int64_t x0 = std::max<std::int64_t>(0, -dx);
                            const std::int64_t x1 = std::min(g.OW, g.W - dx);
                            for (std::int64_t oz = z0; oz < z1; ++oz)
                                for (std::int64_t oy = y0; oy < y1; ++oy) {
                                    S* yrow = yc + (oz * g.OH + oy) * g.OW;
                                    const S* xrow = xc + ((oz + dz) * g.H + (oy + dy)) * g.W + dx;
                                    for (std::int64_t ox = x0; ox < x1; ++ox)
                                        yrow[ox] += wv * xrow[ox];
                                }
                        }
            }
        }
    }
}

template <class S>
std::vector<S>& conv_scratch() {
    thread_local std::vector<S> scratch;
    return scratch;
}

// Lowered fast path: materialize patch rows for a band of output rows, then a
// saxpy-ordered band GEMM (co, k, j with j innermost and contiguous). The
// per-voxel reduction order matches the direct path.
template <class S>
void conv3d_forward_im2col(const ConvGeom& g, const S* x, const S* k, const S* b, S* y) {
    const std::int64_t K = g.C * g.KD * g.KH * g.KW;
    const std::int64_t out_chan = g.OD * g.OH * g.OW;
    const std::int64_t in_chan = g.D * g.H * g.W;
    const std::int64_t rows_total = g.OD * g.OH;
    const std::int64_t band_rows =
        std::max<std::int64_t>(1, std::min(rows_total, 16384 / std::max<std::int64_t>(1, g.OW)));

    std::vector<S>& patches = conv_scratch<S>();
    patches.resize(static_cast<std::size_t>(K * band_rows * g.OW));

    for (std::int64_t n = 0; n < g.N; ++n) {
        const S* xn = x + n * g.C * in_chan;
        for (std::int64_t row0 = 0; row0 < rows_total; row0 += band_rows) {
            const std::int64_t rows = std::min(band_rows, rows_total - row0);
            const std::int64_t jb = rows * g.OW;
            for (std::int64_t ci = 0; ci < g.C; ++ci)
                for (std::int64_t dk = 0; dk < g.KD; ++dk)
                    for (std::int64_t hk = 0; hk < g.KH; ++hk)
                        for (std::int64_t wk = 0; wk < g.KW; ++wk) {
                            const std::int64_t krow = ((ci * g.KD + dk) * g.KH + hk) * g.KW + wk;
                            S* dst = patches.data() + krow * jb;
                            const std::int64_t dz = dk - g.PD, dy = hk - g.PH, dx = wk - g.PW;
                            for (std::int64_t r = 0; r < rows; ++r) {
                                const std::int64_t oz = (row0 + r) / g.OH;
                                const std::int64_t oy = (row0 + r) % g.OH;
                                S* drow = dst + r * g.OW;
                                const std::int64_t iz = oz + dz, iy = oy + dy;
                                if (iz < 0 || iz >= g.D || iy < 0 || iy >= g.H) {
                                    std::fill(drow, drow + g.OW, S(0));
                                    continue;
                                }
                                const S* srow = xn + (ci * g.D + iz) * g.H * g.W + iy * g.W;
                                const std::int64_t x0 = std::max<std::int64_t>(0, -dx);
                                const std::int64_t x1 = std::min(g.OW, g.W - dx);
                                if (x0 > 0) std::fill(drow, drow + x0, S(0));
                                if (x1 > x0)
                                    std::memcpy(drow + x0, srow + x0 + dx,
                                                static_cast<std::size_t>(x1 - x0) * sizeof(S));
                                if (x1 < g.OW)
                                    std::fill(drow + std::max(x0, x1), drow + g.OW, S(0));
                            }
                        }
            for (std::int64_t co = 0; co < g.CO; ++co) {
                S* yrow = y + (n * g.CO + co) * out_chan + row0 * g.OW;
                std::fill(yrow, yrow + jb, b[co]);
                const S* arow = k + co * K;
                for (std::int64_t kk = 0; kk < K; ++kk) {
                    const S a = arow[kk];
                    if (a == S(0)) continue;
                    const S* prow = patches.data() + kk * jb;
                    for (std::int64_t j = 0; j < jb; ++j) yrow[j] += a * prow[j];
                }
            }
        }
    }
}

template <class S>
void conv3d_backward_input(const ConvGeom& g, const S* k, const S* gy, S* gx) {
    const std::int64_t in_chan = g.D * g.H * g.W;
    const std::int64_t out_chan = g.OD * g.OH * g.OW;
    for (std::int64_t n = 0; n < g.N; ++n)
        for (std::int64_t ci = 0; ci < g.C; ++ci) {
            S* gxc = gx + (n * g.C + ci) * in_chan;
            for (std::int64_t co = 0; co < g.CO; ++co) {
                const S* gyc = gy + (n * g.CO + co) * out_chan;
                for (std::int64_t dk = 0; dk < g.KD; ++dk)
                    for (std::int64_t hk = 0; hk < g.KH; ++hk)
                        for (std::int64_t wk = 0; wk < g.KW; ++wk) {
                            const S wv = k[(((co * g.C + ci) * g.KD + dk) * g.KH + hk) * g.KW + wk];
                            if (wv == S(0)) continue;
                            // input (iz,iy,ix) was read by output (iz-dz, iy-dy, ix-dx)
                            const std::int64_t dz = dk - g.PD, dy = hk - g.PH, dx = wk - g.PW;
                            const std::int64_t z0 = std::max<std::int64_t>(0, dz);
                            const std::int64_t z1 = std::min(g.D, g.OD + dz);
                            const std::int64_t y0 = std::max<std::int64_t>(0, dy);
                            const std::int64_t y1 = std::min(g.H, g.OH + dy);
                            const std::int64_t x0 = std::max<std::int64_t>(0, dx);
                            const std::int64_t x1 = std::min(g.W, g.OW + dx);
                            for (std::int64_t iz = z0; iz < z1; ++iz)
                                for (std::int64_t iy = y0; iy < y1; ++iy) {
                                    S* grow = gxc + (iz * g.H + iy) * g.W;
                                    const S* gyrow =
                                        gyc + ((iz - dz) * g.OH + (iy - dy)) * g.OW - dx;
                                    for (std::int64_t ix = x0; ix < x1; ++ix)
                                        grow[ix] += wv * gyrow[ix];
                                }
                        }
            }
        }
}

template <class S>
void conv3d_backward_kernel(const ConvGeom& g, const S* x, const S* gy, S* gk) {
    const std::int64_t in_chan = g.D * g.H * g.W;
    const std::int64_t out_chan = g.OD * g.OH * g.OW;
    for (std::int64_t n = 0; n < g.N; ++n)
        for (std::int64_t co = 0; co < g.CO; ++co) {
            const S* gyc = gy + (n * g.CO + co) * out_chan;
            for (std::int64_t ci = 0; ci < g.C; ++ci) {
                const S* xc = x + (n * g.C + ci) * in_chan;
                for (std::int64_t dk = 0; dk < g.KD; ++dk)
                    for (std::int64_t hk = 0; hk < g.KH; ++hk)
                        for (std::int64_t wk = 0; wk < g.KW; ++wk) {
                            const std::int64_t dz = dk - g.PD, dy = hk - g.PH, dx = wk - g.PW;
                            const std::int64_t z0 = std::max<std::int64_t>(0, -dz);
                            const std::int64_t z1 = std::min(g.OD, g.D - dz);
                            const std::int64_t y0 = std::max<std::int64_t>(0, -dy);
                            const std::int64_t y1 = std::min(g.OH, g.H - dy);
                            const std::int64_t x0 = std::max<std::int64_t>(0, -dx);
                            const std::int64_t x1 = std::min(g.OW, g.W - dx);
                            // four fixed-order partial sums keep the inner dot
                            // product vectorizable without reassociation
                            S acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
                            for (std::int64_t oz = z0; oz < z1; ++oz)
                                for (std::int64_t oy = y0; oy < y1; ++oy) {
                                    const S* gyrow = gyc + (oz * g.OH + oy) * g.OW;
                                    const S* xrow = xc + ((oz + dz) * g.H + (oy + dy)) * g.W + dx;
                                    std::int64_t ox = x0;
                                    for (; ox + 4 <= x1; ox += 4) {
                                        acc0 += gyrow[ox] * xrow[ox];
                                        acc1 += gyrow[ox + 1] * xrow[ox + 1];
                                        acc2 += gyrow[ox + 2] * xrow[ox + 2];
                                        acc3 += gyrow[ox + 3] * xrow[ox + 3];
                                    }
                                    for (; ox < x1; ++ox) acc0 += gyrow[ox] * xrow[ox];
                                }
                            gk[(((co * g.C + ci) * g.KD + dk) * g.KH + hk) * g.KW + wk] +=
                                (acc0 + acc1) + (acc2 + acc3);
                        }
            }
        }
}

}  // namespace detail

/// Stride-1 3D cross-correlation plus bias.
///
/// kernel extents are (n=C_out, c=C_in, d=k_d, h=k_h, w=k_w); bias is
/// (1, C_out, 1, 1, 1). Same-padding pads with zeros and requires odd spatial
/// kernel extents; without it the output shrinks by k-1 per axis.
template <class S>
TensorT<S> conv3d(const TensorT<S>& x, const TensorT<S>& kernel, const TensorT<S>& bias,
                  bool same_padding = true, ConvAlgo algo = ConvAlgo::kAuto) {
    const auto g = detail::conv_geometry(x.shape(), kernel.shape(), bias.shape(), same_padding);
    if (algo == ConvAlgo::kAuto)
        algo = (g.KD * g.KH * g.KW > 1) ? ConvAlgo::kIm2col : ConvAlgo::kDirect;

    TensorT<S> y(Shape5{g.N, g.CO, g.OD, g.OH, g.OW});
    if (algo == ConvAlgo::kIm2col)
        detail::conv3d_forward_im2col(g, x.data().data(), kernel.data().data(),
                                      bias.data().data(), y.mutable_data().data());
    else
        detail::conv3d_forward_direct(g, x.data().data(), kernel.data().data(),
                                      bias.data().data(), y.mutable_data().data());

    auto* tp = detail::common_tape<S>({&x, &kernel, &bias});
    if (!tp) return y;

    TensorT<S> out = tp->adopt(std::move(y));
    const int xs = x.slot(), ks = kernel.slot(), bs = bias.slot(), ys = out.slot();
    auto xbuf = x.buffer();
    auto kbuf = kernel.buffer();
    tp->push_node(ys, {xs, ks, bs}, [=](TapeT<S>& t) {
        const auto& gy = t.grad(ys);
        if (xs >= 0)
            detail::conv3d_backward_input(g, kbuf->data(), gy.data(), t.grad_mut(xs).data());
        if (ks >= 0)
            detail::conv3d_backward_kernel(g, xbuf->data(), gy.data(), t.grad_mut(ks).data());
        if (bs >= 0) {
            auto& gb = t.grad_mut(bs);
            const std::int64_t out_chan = g.OD * g.OH * g.OW;
            for (std::int64_t n = 0; n < g.N; ++n)
                for (std::int64_t co = 0; co < g.CO; ++co) {
                    const S* gyc = gy.data() + (n * g.CO + co) * out_chan;
                    S acc = 0;
                    for (std::int64_t j = 0; j < out_chan; ++j) acc += gyc[j];
                    gb[static_cast<std::size_t>(co)] += acc;
                }
        }
    });
    return out;
}

/// 2x2x2 average pooling; spatial extents must be even and halve.
template <class S>
TensorT<S> avg_pool3d(const TensorT<S>& x) {
    const Shape5 s = x.shape();
    if (s.d % 2 || s.h % 2 || s.w % 2)
        throw std::invalid_argument(
            detail::msg("avg_pool3d: spatial extents must be even, got ", s.str()));
    const Shape5 os{s.n, s.c, s.d / 2, s.h / 2, s.w / 2};
    TensorT<S> y(os);
    const S* xd = x.data().data();
    S* yd = y.mutable_data().data();
    const std::int64_t planes = s.n * s.c;
    for (std::int64_t p = 0; p < planes; ++p) {
        const S* xc = xd + p * s.d * s.h * s.w;
        S* yc = yd + p * os.d * os.h * os.w;
        for (std::int64_t oz = 0; oz < os.d; ++oz)
            for (std::int64_t oy = 0; oy < os.h; ++oy)
                for (std::int64_t ox = 0; ox < os.w; ++ox) {
                    S acc = 0;
                    for (std::int64_t bz = 0; bz < 2; ++bz)
                        for (std::int64_t by = 0; by < 2; ++by) {
                            const S* row = xc + ((oz * 2 + bz) * s.h + oy * 2 + by) * s.w + ox * 2;
                            acc += row[0] + row[1];
                        }
                    yc[(oz * os.h + oy) * os.w + ox] = acc * S(0.125);
                }
    }

    auto* tp = detail::common_tape<S>({&x});
    if (!tp) return y;
    TensorT<S> out = tp->adopt(std::move(y));
    const int xs = x.slot(), ys = out.slot();
    tp->push_node(ys, {xs}, [=](TapeT<S>& t) {
        if (xs < 0) return;
        const auto& gy = t.grad(ys);
        auto& gx = t.grad_mut(xs);
        for (std::int64_t p = 0; p < planes; ++p) {
            const S* gyc = gy.data() + p * os.d * os.h * os.w;
            S* gxc = gx.data() + p * s.d * s.h * s.w;
            for (std::int64_t oz = 0; oz < os.d; ++oz)
                for (std::int64_t oy = 0; oy < os.h; ++oy)
                    for (std::int64_t ox = 0; ox < os.w; ++ox) {
                        const S gv = gyc[(oz * os.h + oy) * os.w + ox] * S(0.125);
                        for (std::int64_t bz = 0; bz < 2; ++bz)
                            for (std::int64_t by = 0; by < 2; ++by) {
                                S* row = gxc + ((oz * 2 + bz) * s.h + oy * 2 + by) * s.w + ox * 2;
                                row[0] += gv;
                                row[1] += gv;
                            }
                    }
        }
    });
    return out;
}

/// x2 upsampling, nearest replication or fixed (non-learned) trilinear
/// interpolation. The backward pass is the transpose of the forward map.
template <class S>
TensorT<S> upsample3d(const TensorT<S>& x, UpsampleMode mode) {
    const Shape5 s = x.shape();
    const Shape5 os{s.n, s.c, s.d * 2, s.h * 2, s.w * 2};
    TensorT<S> y(os);
    const S* xd = x.data().data();
    S* yd = y.mutable_data().data();
    const std::int64_t planes = s.n * s.c;

    const auto tz = detail::linear_taps_x2(s.d);
    const auto ty = detail::linear_taps_x2(s.h);
    const auto tx = detail::linear_taps_x2(s.w);

    if (mode == UpsampleMode::kNearest) {
        for (std::int64_t p = 0; p < planes; ++p) {
            const S* xc = xd + p * s.d * s.h * s.w;
            S* yc = yd + p * os.d * os.h * os.w;
            for (std::int64_t oz = 0; oz < os.d; ++oz)
                for (std::int64_t oy = 0; oy < os.h; ++oy) {
                    const S* xrow = xc + ((oz / 2) * s.h + oy / 2) * s.w;
                    S* yrow = yc + (oz * os.h + oy) * os.w;
                    for (std::int64_t ox = 0; ox < os.w; ++ox) yrow[ox] = xrow[ox / 2];
                }
        }
    } else {
        for (std::int64_t p = 0; p < planes; ++p) {
            const S* xc = xd + p * s.d * s.h * s.w;
            S* yc = yd + p * os.d * os.h * os.w;
            for (std::int64_t oz = 0; oz < os.d; ++oz) {
                const auto& az = tz[static_cast<std::size_t>(oz)];
                for (std::int64_t oy = 0; oy < os.h; ++oy) {
                    const auto& ay = ty[static_cast<std::size_t>(oy)];
                    const S* r00 = xc + (az.i0 * s.h + ay.i0) * s.w;
                    const S* r01 = xc + (az.i0 * s.h + ay.i1) * s.w;
                    const S* r10 = xc + (az.i1 * s.h + ay.i0) * s.w;
                    const S* r11 = xc + (az.i1 * s.h + ay.i1) * s.w;
                    S* yrow = yc + (oz * os.h + oy) * os.w;
                    for (std::int64_t ox = 0; ox < os.w; ++ox) {
                        const auto& ax = tx[static_cast<std::size_t>(ox)];
                        const double v =
                            az.w0 * (ay.w0 * (ax.w0 * r00[ax.i0] + ax.w1 * r00[ax.i1]) +
                                     ay.w1 * (ax.w0 * r01[ax.i0] + ax.w1 * r01[ax.i1])) +
                            az.w1 * (ay.w0 * (ax.w0 * r10[ax.i0] + ax.w1 * r10[ax.i1]) +
                                     ay.w1 * (ax.w0 * r11[ax.i0] + ax.w1 * r11[ax.i1]));
                        yrow[ox] = static_cast<S>(v);
                    }
                }
            }
        }
    }

    auto* tp = detail::common_tape<S>({&x});
    if (!tp) return y;
    TensorT<S> out = tp->adopt(std::move(y));
    const int xs = x.slot(), ys = out.slot();
    tp->push_node(ys, {xs}, [=](TapeT<S>& t) {
        if (xs < 0) return;
        const auto& gy = t.grad(ys);
        auto& gx = t.grad_mut(xs);
        if (mode == UpsampleMode::kNearest) {
            for (std::int64_t p = 0; p < planes; ++p) {
                const S* gyc = gy.data() + p * os.d * os.h * os.w;
                S* gxc = gx.data() + p * s.d * s.h * s.w;
                for (std::int64_t oz = 0; oz < os.d; ++oz)
                    for (std::int64_t oy = 0; oy < os.h; ++oy) {
                        const S* gyrow = gyc + (oz * os.h + oy) * os.w;
                        S* gxrow = gxc + ((oz / 2) * s.h + oy / 2) * s.w;
                        for (std::int64_t ox = 0; ox < os.w; ++ox) gxrow[ox / 2] += gyrow[ox];
                    }
            }
        } else {
            for (std::int64_t p = 0; p < planes; ++p) {
                const S* gyc = gy.data() + p * os.d * os.h * os.w;
                S* gxc = gx.data() + p * s.d * s.h * s.w;
                for (std::int64_t oz = 0; oz < os.d; ++oz) {
                    const auto& az = tz[static_cast<std::size_t>(oz)];
                    for (std::int64_t oy = 0; oy < os.h; ++oy) {
                        const auto& ay = ty[static_cast<std::size_t>(oy)];
                        const S* gyrow = gyc + (oz * os.h + oy) * os.w;
                        S* s00 = gxc + (az.i0 * s.h + ay.i0) * s.w;
                        S* s01 = gxc + (az.i0 * s.h + ay.i1) * s.w;
                        S* s10 = gxc + (az.i1 * s.h + ay.i0) * s.w;
                        S* s11 = gxc + (az.i1 * s.h + ay.i1) * s.w;
                        for (std::int64_t ox = 0; ox < os.w; ++ox) {
                            const auto& ax = tx[static_cast<std::size_t>(ox)];
                            const double gv = gyrow[ox];
                            s00[ax.i0] += static_cast<S>(az.w0 * ay.w0 * ax.w0 * gv);
                            s00[ax.i1] += static_cast<S>(az.w0 * ay.w0 * ax.w1 * gv);
                            s01[ax.i0] += static_cast<S>(az.w0 * ay.w1 * ax.w0 * gv);
                            s01[ax.i1] += static_cast<S>(az.w0 * ay.w1 * ax.w1 * gv);
                            s10[ax.i0] += static_cast<S>(az.w1 * ay.w0 * ax.w0 * gv);
                            s10[ax.i1] += static_cast<S>(az.w1 * ay.w0 * ax.w1 * gv);
                            s11[ax.i0] += static_cast<S>(az.w1 * ay.w1 * ax.w0 * gv);
                            s11[ax.i1] += static_cast<S>(az.w1 * ay.w1 * ax.w1 * gv);
                        }
                    }
                }
            }
        }
    });
    return out;
}

/// Channel concatenation, a's channels first. Inputs must agree on batch and
/// spatial extents; the gradient splits back exactly.
template <class S>
TensorT<S> concat_channels(const TensorT<S>& a, const TensorT<S>& b) {
    const Shape5 sa = a.shape(), sb = b.shape();
    if (sa.n != sb.n || !sa.spatial_equals(sb))
        throw std::invalid_argument(detail::msg("concat_channels: shapes do not agree: ", sa.str(),
                                                " vs ", sb.str()));
    const Shape5 os{sa.n, sa.c + sb.c, sa.d, sa.h, sa.w};
    TensorT<S> y(os);
    const std::int64_t chan = sa.d * sa.h * sa.w;
    S* yd = y.mutable_data().data();
    for (std::int64_t n = 0; n < sa.n; ++n) {
        std::memcpy(yd + (n * os.c) * chan, a.data().data() + n * sa.c * chan,
                    static_cast<std::size_t>(sa.c * chan) * sizeof(S));
        std::memcpy(yd + (n * os.c + sa.c) * chan, b.data().data() + n * sb.c * chan,
                    static_cast<std::size_t>(sb.c * chan) * sizeof(S));
    }

    auto* tp = detail::common_tape<S>({&a, &b});
    if (!tp) return y;
    TensorT<S> out = tp->adopt(std::move(y));
    const int as = a.slot(), bs = b.slot(), ys = out.slot();
    tp->push_node(ys, {as, bs}, [=](TapeT<S>& t) {
        const auto& gy = t.grad(ys);
        for (std::int64_t n = 0; n < sa.n; ++n) {
            if (as >= 0) {
                auto& ga = t.grad_mut(as);
                const S* src = gy.data() + (n * os.c) * chan;
                S* dst = ga.data() + n * sa.c * chan;
                for (std::int64_t i = 0; i < sa.c * chan; ++i) dst[i] += src[i];
            }
            if (bs >= 0) {
                auto& gb = t.grad_mut(bs);
                const S* src = gy.data() + (n * os.c + sa.c) * chan;
                S* dst = gb.data() + n * sb.c * chan;
                for (std::int64_t i = 0; i < sb.c * chan; ++i) dst[i] += src[i];
            }
        }
    });
    return out;
}

namespace detail {

template <class S>
S stable_sigmoid(S v) {
    if (v >= S(0)) return S(1) / (S(1) + std::exp(-v));
    const S e = std::exp(v);
    return e / (S(1) + e);
}

// max(a,0) - a*y + log(1 + exp(-|a|)), the overflow-free form of
// -y*log(sigma(a)) - (1-y)*log(1-sigma(a)); accumulated in double.
template <class S>
double bce_logits_sum_value(const S* a, const S* y, std::int64_t n, double pos_weight,
                            double neg_weight) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double av = a[i];
        const double yv = y[i];
        const double core = std::max(av, 0.0) - av * yv + std::log1p(std::exp(-std::abs(av)));
        acc += (yv != 0.0 ? pos_weight : neg_weight) * core;
    }
    return acc;
}

}  // namespace detail

/// Elementwise logistic sigmoid, computed with the exp-of-negative-magnitude
/// form so large activations saturate instead of overflowing.
template <class S>
TensorT<S> sigmoid(const TensorT<S>& x) {
    TensorT<S> y(x.shape());
    const S* xd = x.data().data();
    S* yd = y.mutable_data().data();
    const std::int64_t total = x.numel();
    for (std::int64_t i = 0; i < total; ++i) yd[i] = detail::stable_sigmoid(xd[i]);

    auto* tp = detail::common_tape<S>({&x});
    if (!tp) return y;
    TensorT<S> out = tp->adopt(std::move(y));
    const int xs = x.slot(), ys = out.slot();
    auto ybuf = out.buffer();
    tp->push_node(ys, {xs}, [=](TapeT<S>& t) {
        if (xs < 0) return;
        const auto& gy = t.grad(ys);
        auto& gx = t.grad_mut(xs);
        const S* yv = ybuf->data();
        for (std::int64_t i = 0; i < total; ++i) gx[i] += gy[i] * yv[i] * (S(1) - yv[i]);
    });
    return out;
}

/// Elementwise max(x, 0).
template <class S>
TensorT<S> relu(const TensorT<S>& x) {
    TensorT<S> y(x.shape());
    const S* xd = x.data().data();
    S* yd = y.mutable_data().data();
    const std::int64_t total = x.numel();
    for (std::int64_t i = 0; i < total; ++i) yd[i] = xd[i] > S(0) ? xd[i] : S(0);

    auto* tp = detail::common_tape<S>({&x});
    if (!tp) return y;
    TensorT<S> out = tp->adopt(std::move(y));
    const int xs = x.slot(), ys = out.slot();
    auto xbuf = x.buffer();
    tp->push_node(ys, {xs}, [=](TapeT<S>& t) {
        if (xs < 0) return;
        const auto& gy = t.grad(ys);
        auto& gx = t.grad_mut(xs);
        const S* xv = xbuf->data();
        for (std::int64_t i = 0; i < total; ++i)
            if (xv[i] > S(0)) gx[i] += gy[i];
    });
    return out;
}

/// Elementwise sum of two same-shape tensors.
template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    if (!(a.shape() == b.shape()))
        throw std::invalid_argument(detail::msg("add: shapes differ: ", a.shape().str(), " vs ",
                                                b.shape().str()));
    TensorT<S> y(a.shape());
    const std::int64_t total = a.numel();
    const S* ad = a.data().data();
    const S* bd = b.data().data();
    S* yd = y.mutable_data().data();
    for (std::int64_t i = 0; i < total; ++i) yd[i] = ad[i] + bd[i];

    auto* tp = detail::common_tape<S>({&a, &b});
    if (!tp) return y;
    TensorT<S> out = tp->adopt(std::move(y));
    const int as = a.slot(), bs = b.slot(), ys = out.slot();
    tp->push_node(ys, {as, bs}, [=](TapeT<S>& t) {
        const auto& gy = t.grad(ys);
        if (as >= 0) {
            auto& ga = t.grad_mut(as);
            for (std::int64_t i = 0; i < total; ++i) ga[i] += gy[i];
        }
        if (bs >= 0) {
            auto& gb = t.grad_mut(bs);
            for (std::int64_t i = 0; i < total; ++i) gb[i] += gy[i];
        }
    });
    return out;
}

/// Multiply by a compile-time-constant scalar (not a learnable parameter).
template <class S>
TensorT<S> scale(const TensorT<S>& x, S factor) {
    TensorT<S> y(x.shape());
    const std::int64_t total = x.numel();
    const S* xd = x.data().data();
    S* yd = y.mutable_data().data();
    for (std::int64_t i = 0; i < total; ++i) yd[i] = xd[i] * factor;

    auto* tp = detail::common_tape<S>({&x});
    if (!tp) return y;
    TensorT<S> out = tp->adopt(std::move(y));
    const int xs = x.slot(), ys = out.slot();
    tp->push_node(ys, {xs}, [=](TapeT<S>& t) {
        if (xs < 0) return;
        const auto& gy = t.grad(ys);
        auto& gx = t.grad_mut(xs);
        for (std::int64_t i = 0; i < total; ++i) gx[i] += gy[i] * factor;
    });
    return out;
}

/// Sum of all elements as a scalar tensor.
template <class S>
TensorT<S> sum_all(const TensorT<S>& x) {
    TensorT<S> y(Shape5{1, 1, 1, 1, 1});
    const std::int64_t total = x.numel();
    const S* xd = x.data().data();
    double acc = 0.0;
    for (std::int64_t i = 0; i < total; ++i) acc += static_cast<double>(xd[i]);
    y.mutable_data()[0] = static_cast<S>(acc);

    auto* tp = detail::common_tape<S>({&x});
    if (!tp) return y;
    TensorT<S> out = tp->adopt(std::move(y));
    const int xs = x.slot(), ys = out.slot();
    tp->push_node(ys, {xs}, [=](TapeT<S>& t) {
        if (xs < 0) return;
        const S g = t.grad(ys)[0];
        auto& gx = t.grad_mut(xs);
        for (std::int64_t i = 0; i < total; ++i) gx[i] += g;
    });
    return out;
}

/// Learned weighted aggregation: out = sum_m weights[m] * xs[m] + bias.
/// weights has shape (1, M, 1, 1, 1) and bias (1, 1, 1, 1, 1); both are
/// differentiable along with every x_m.
template <class S>
TensorT<S> weighted_sum(const std::vector<TensorT<S>>& xs, const TensorT<S>& weights,
                        const TensorT<S>& bias) {
    if (xs.empty()) throw std::invalid_argument("weighted_sum: no inputs");
    const std::int64_t m_count = static_cast<std::int64_t>(xs.size());
    if (weights.shape().c != m_count || weights.numel() != m_count)
        throw std::invalid_argument(detail::msg("weighted_sum: weight shape ",
                                                weights.shape().str(), " does not match ", m_count,
                                                " inputs"));
    if (bias.numel() != 1)
        throw std::invalid_argument("weighted_sum: bias must be scalar");
    const Shape5 s = xs[0].shape();
    for (const auto& x : xs)
        if (!(x.shape() == s))
            throw std::invalid_argument(detail::msg("weighted_sum: input shape ", x.shape().str(),
                                                    " differs from ", s.str()));

    TensorT<S> y(s);
    const std::int64_t total = s.numel();
    S* yd = y.mutable_data().data();
    const S b = bias.data()[0];
    std::fill(yd, yd + total, b);
    for (std::int64_t m = 0; m < m_count; ++m) {
        const S wv = weights.data()[static_cast<std::size_t>(m)];
        const S* xd = xs[static_cast<std::size_t>(m)].data().data();
        for (std::int64_t i = 0; i < total; ++i) yd[i] += wv * xd[i];
    }

    std::vector<const TensorT<S>*> all;
    for (const auto& x : xs) all.push_back(&x);
    all.push_back(&weights);
    all.push_back(&bias);
    TapeT<S>* tp = nullptr;
    for (const auto* t : all) {
        if (!t->on_tape()) continue;
        if (!tp)
            tp = t->tape();
        else if (tp != t->tape())
            throw std::invalid_argument("operation inputs belong to different tapes");
    }
    if (!tp) return y;

    TensorT<S> out = tp->adopt(std::move(y));
    const int ws = weights.slot(), bs = bias.slot(), ys = out.slot();
    std::vector<int> xslots;
    std::vector<std::shared_ptr<std::vector<S>>> xbufs;
    for (const auto& x : xs) {
        xslots.push_back(x.slot());
        xbufs.push_back(x.buffer());
    }
    auto wbuf = weights.buffer();
    std::vector<int> in_slots = xslots;
    in_slots.push_back(ws);
    in_slots.push_back(bs);
    tp->push_node(ys, in_slots, [=](TapeT<S>& t) {
        const auto& gy = t.grad(ys);
        for (std::int64_t m = 0; m < m_count; ++m) {
            const std::size_t mi = static_cast<std::size_t>(m);
            if (xslots[mi] >= 0) {
                auto& gx = t.grad_mut(xslots[mi]);
                const S wv = (*wbuf)[mi];
                for (std::int64_t i = 0; i < total; ++i) gx[i] += wv * gy[i];
            }
            if (ws >= 0) {
                const S* xd = xbufs[mi]->data();
                double acc = 0.0;
                for (std::int64_t i = 0; i < total; ++i)
                    acc += static_cast<double>(gy[i]) * static_cast<double>(xd[i]);
                t.grad_mut(ws)[mi] += static_cast<S>(acc);
            }
        }
        if (bs >= 0) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < total; ++i) acc += static_cast<double>(gy[i]);
            t.grad_mut(bs)[0] += static_cast<S>(acc);
        }
    });
    return out;
}

/// Summed (not averaged) binary cross-entropy over logits, accumulated in
/// double. labels must be 0/1 and is treated as a constant. pos_weight /
/// neg_weight scale the per-voxel terms for label 1 / label 0.
template <class S>
TensorT<S> bce_logits_sum(const TensorT<S>& activations, const TensorT<S>& labels,
                          double pos_weight = 1.0, double neg_weight = 1.0) {
    if (!(activations.shape() == labels.shape()))
        throw std::invalid_argument(detail::msg("bce_logits_sum: activation shape ",
                                                activations.shape().str(),
                                                " does not match label shape ",
                                                labels.shape().str()));
    const std::int64_t total = activations.numel();
    TensorT<S> y(Shape5{1, 1, 1, 1, 1});
    y.mutable_data()[0] = static_cast<S>(detail::bce_logits_sum_value(
        activations.data().data(), labels.data().data(), total, pos_weight, neg_weight));

    auto* tp = detail::common_tape<S>({&activations});
    if (!tp) return y;
    TensorT<S> out = tp->adopt(std::move(y));
    const int as = activations.slot(), ys = out.slot();
    auto abuf = activations.buffer();
    auto lbuf = labels.buffer();
    tp->push_node(ys, {as}, [=](TapeT<S>& t) {
        if (as < 0) return;
        const S g = t.grad(ys)[0];
        auto& ga = t.grad_mut(as);
        const S* av = abuf->data();
        const S* lv = lbuf->data();
        for (std::int64_t i = 0; i < total; ++i) {
            const double wgt = lv[i] != S(0) ? pos_weight : neg_weight;
            ga[i] += g * static_cast<S>(wgt) *
                     (detail::stable_sigmoid(av[i]) - lv[i]);
        }
    });
    return out;
}

}  // namespace i2i
