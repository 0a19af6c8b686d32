#pragma once

#include <vector>

#include "i2i/ops.hpp"
#include "i2i/rng.hpp"

namespace i2i {

/// Weights and bias of one convolution layer. kernel extents are
/// (C_out, C_in, k_d, k_h, k_w); bias holds one value per output channel.
template <class S>
struct ConvParamsT {
    TensorT<S> kernel;
    TensorT<S> bias;

    std::int64_t out_channels() const { return kernel.shape().n; }
    std::int64_t in_channels() const { return kernel.shape().c; }
};

/// 1x1x1 classifier mapping stage features to a single activation channel.
template <class S>
struct SideOutputParamsT {
    ConvParamsT<S> classifier;
};

/// Scalar weight per fused side output, plus one shared bias.
template <class S>
struct FusionWeightsT {
    TensorT<S> weights;  ///< (1, M, 1, 1, 1)
    TensorT<S> bias;     ///< (1, 1, 1, 1, 1)

    std::int64_t count() const { return weights.shape().c; }
};

using ConvParams = ConvParamsT<float>;
using SideOutputParams = SideOutputParamsT<float>;
using FusionWeights = FusionWeightsT<float>;

template <class S>
ConvParamsT<S> make_conv_params(std::int64_t c_out, std::int64_t c_in, std::int64_t k_d,
                                std::int64_t k_h, std::int64_t k_w) {
    if (c_out < 1)
        throw std::invalid_argument("conv params: need at least one output channel");
    if (k_d % 2 == 0 || k_h % 2 == 0 || k_w % 2 == 0)
        throw std::invalid_argument("conv params: kernel extents must be odd");
    return {TensorT<S>(Shape5{c_out, c_in, k_d, k_h, k_w}), TensorT<S>(Shape5{1, c_out, 1, 1, 1})};
}

/// Zero-mean Gaussian weights with standard deviation sqrt(2 / fan_in),
/// zero bias.
template <class S>
ConvParamsT<S> random_conv_params(std::int64_t c_out, std::int64_t c_in, std::int64_t k_d,
                                  std::int64_t k_h, std::int64_t k_w, Rng& rng) {
    ConvParamsT<S> p = make_conv_params<S>(c_out, c_in, k_d, k_h, k_w);
    const double fan_in = static_cast<double>(c_in * k_d * k_h * k_w);
    const double stddev = std::sqrt(2.0 / fan_in);
    auto buf = p.kernel.mutable_data();
    for (auto& v : buf) v = static_cast<S>(rng.normal(0.0, stddev));
    return p;
}

template <class S>
TensorT<S> conv3d(const TensorT<S>& x, const ConvParamsT<S>& p, bool same_padding = true,
                  ConvAlgo algo = ConvAlgo::kAuto) {
    return conv3d(x, p.kernel, p.bias, same_padding, algo);
}

/// Mixing layer: concatenate fine and upsampled coarse features, then blend
/// with a 1x1x1 convolution. A spatial mismatch between the two inputs means
/// the coarse features were upsampled by the wrong factor upstream.
template <class S>
TensorT<S> mixing_layer(const TensorT<S>& fine, const TensorT<S>& coarse_upsampled,
                        const ConvParamsT<S>& params) {
    const Shape5 ks = params.kernel.shape();
    if (ks.d != 1 || ks.h != 1 || ks.w != 1)
        throw std::invalid_argument(
            detail::msg("mixing_layer: params must be 1x1x1, got kernel ", ks.str()));
    if (ks.c != fine.shape().c + coarse_upsampled.shape().c)
        throw std::invalid_argument(detail::msg(
            "mixing_layer: kernel expects ", ks.c, " input channels but fine+coarse provide ",
            fine.shape().c + coarse_upsampled.shape().c));
    return conv3d(concat_channels(fine, coarse_upsampled), params);
}

/// Mixing-layer parameters that reproduce the fine input and ignore the
/// coarse input: identity on the fine block, zeros on the coarse block.
template <class S>
ConvParamsT<S> init_passthrough(std::int64_t c_fine, std::int64_t c_coarse) {
    ConvParamsT<S> p = make_conv_params<S>(c_fine, c_fine + c_coarse, 1, 1, 1);
    for (std::int64_t o = 0; o < c_fine; ++o) p.kernel.at_mut(o, o, 0, 0, 0) = S(1);
    return p;
}

/// k x k x k convolution parameters realizing the exact identity map:
/// center tap 1 on the channel diagonal, everything else (and bias) zero.
template <class S>
ConvParamsT<S> init_identity_conv(std::int64_t k, std::int64_t c) {
    ConvParamsT<S> p = make_conv_params<S>(c, c, k, k, k);
    for (std::int64_t o = 0; o < c; ++o) p.kernel.at_mut(o, o, k / 2, k / 2, k / 2) = S(1);
    return p;
}

/// Stage classifier producing the 1-channel activation volume at the
/// features' native resolution.
template <class S>
TensorT<S> side_output(const TensorT<S>& features, const SideOutputParamsT<S>& params) {
    const Shape5 ks = params.classifier.kernel.shape();
    if (ks.n != 1 || ks.d != 1 || ks.h != 1 || ks.w != 1)
        throw std::invalid_argument(
            detail::msg("side_output: classifier must be 1x1x1 with one output channel, got ",
                        ks.str()));
    return conv3d(features, params.classifier);
}

/// Learned weighted aggregation of M same-resolution activations.
template <class S>
TensorT<S> fuse_side_outputs(const std::vector<TensorT<S>>& activations,
                             const FusionWeightsT<S>& w) {
    if (static_cast<std::int64_t>(activations.size()) != w.count())
        throw std::invalid_argument(detail::msg("fuse_side_outputs: ", activations.size(),
                                                " activations but ", w.count(), " weights"));
    return weighted_sum(activations, w.weights, w.bias);
}

/// Neutral fusion start: every weight 1/M, bias 0.
template <class S>
FusionWeightsT<S> init_fusion_weights(std::int64_t m) {
    FusionWeightsT<S> w{TensorT<S>::full(Shape5{1, m, 1, 1, 1}, S(1) / static_cast<S>(m)),
                        TensorT<S>(Shape5{1, 1, 1, 1, 1})};
    return w;
}

}  // namespace i2i
