#pragma once

#include <vector>

#include "i2i/ops.hpp"

namespace i2i {

namespace detail {

template <class S>
void check_binary(const TensorT<S>& labels, const char* who) {
    for (const S v : labels.data())
        if (v != S(0) && v != S(1))
            throw std::invalid_argument(msg(who, ": labels must be binary, found ",
                                            static_cast<double>(v)));
}

template <class S>
std::int64_t count_positive(const TensorT<S>& labels) {
    std::int64_t n = 0;
    for (const S v : labels.data()) n += (v != S(0));
    return n;
}

}  // namespace detail

/// Per-output cross-entropy: -sum_j [ y_j log sigma(a_j) + (1-y_j) log(1-sigma(a_j)) ],
/// summed (not averaged) over voxels. With `balanced`, label-1 terms are
/// weighted |Y-|/|Y| and label-0 terms |Y+|/|Y|; default is the unweighted
/// form.
template <class S>
TensorT<S> output_loss(const TensorT<S>& activations, const TensorT<S>& labels,
                       bool balanced = false) {
    if (!(activations.shape() == labels.shape()))
        throw std::invalid_argument(detail::msg("output_loss: activation shape ",
                                                activations.shape().str(), " vs label shape ",
                                                labels.shape().str()));
    detail::check_binary(labels, "output_loss");
    double pos_weight = 1.0, neg_weight = 1.0;
    if (balanced) {
        const double total = static_cast<double>(labels.numel());
        const double pos = static_cast<double>(detail::count_positive(labels));
        pos_weight = (total - pos) / total;
        neg_weight = pos / total;
    }
    return bce_logits_sum(activations, labels, pos_weight, neg_weight);
}

/// Plain double-precision loss value, no tape. Same accumulation as
/// output_loss; used for reports and plateau detection.
template <class S>
double output_loss_value(const TensorT<S>& activations, const TensorT<S>& labels,
                         bool balanced = false) {
    if (!(activations.shape() == labels.shape()))
        throw std::invalid_argument(detail::msg("output_loss: activation shape ",
                                                activations.shape().str(), " vs label shape ",
                                                labels.shape().str()));
    double pos_weight = 1.0, neg_weight = 1.0;
    if (balanced) {
        const double total = static_cast<double>(labels.numel());
        const double pos = static_cast<double>(detail::count_positive(labels));
        pos_weight = (total - pos) / total;
        neg_weight = pos / total;
    }
    return detail::bce_logits_sum_value(activations.data().data(), labels.data().data(),
                                        activations.numel(), pos_weight, neg_weight);
}

/// 2x2x2 max-pool downsampling of binary labels: any positive voxel in a
/// block survives coarsening, so thin boundaries persist at every level.
template <class S>
TensorT<S> downsample_labels(const TensorT<S>& labels) {
    const Shape5 s = labels.shape();
    if (s.d % 2 || s.h % 2 || s.w % 2)
        throw std::invalid_argument(detail::msg(
            "downsample_labels: extents must be even, got ", s.str()));
    const Shape5 os{s.n, s.c, s.d / 2, s.h / 2, s.w / 2};
    TensorT<S> out(os);
    const S* xd = labels.data().data();
    auto od = out.mutable_data();
    const std::int64_t planes = s.n * s.c;
    for (std::int64_t p = 0; p < planes; ++p) {
        const S* xc = xd + p * s.d * s.h * s.w;
        S* oc = od.data() + p * os.d * os.h * os.w;
        for (std::int64_t oz = 0; oz < os.d; ++oz)
            for (std::int64_t oy = 0; oy < os.h; ++oy)
                for (std::int64_t ox = 0; ox < os.w; ++ox) {
                    S m = S(0);
                    for (std::int64_t bz = 0; bz < 2 && m == S(0); ++bz)
                        for (std::int64_t by = 0; by < 2 && m == S(0); ++by) {
                            const S* row =
                                xc + ((oz * 2 + bz) * s.h + oy * 2 + by) * s.w + ox * 2;
                            if (row[0] != S(0) || row[1] != S(0)) m = S(1);
                        }
                    oc[(oz * os.h + oy) * os.w + ox] = m;
                }
    }
    return out;
}

/// Label pyramid for deep supervision. Index m-1 holds level m; level M is
/// the original label volume and each coarser level halves the extents.
template <class S>
std::vector<TensorT<S>> build_label_pyramid(const TensorT<S>& labels, int m_levels) {
    if (m_levels < 1) throw std::invalid_argument("build_label_pyramid: need at least one level");
    const Shape5 s = labels.shape();
    const std::int64_t div = std::int64_t(1) << (m_levels - 1);
    if (s.d % div || s.h % div || s.w % div)
        throw std::invalid_argument(detail::msg("build_label_pyramid: extents ", s.str(),
                                                " not divisible by ", div));
    detail::check_binary(labels, "build_label_pyramid");
    std::vector<TensorT<S>> pyramid(static_cast<std::size_t>(m_levels));
    pyramid[static_cast<std::size_t>(m_levels - 1)] = labels;
    for (int m = m_levels - 1; m >= 1; --m)
        pyramid[static_cast<std::size_t>(m - 1)] =
            downsample_labels(pyramid[static_cast<std::size_t>(m)]);
    return pyramid;
}

}  // namespace i2i
