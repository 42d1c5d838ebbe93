#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sevkit/tensor.hpp"

namespace sevkit {

/// Convolution weights, (out_channels, in_channels, kh, kw). Kernels in this
/// toolkit are 1x1 or 3x3 only. Bias is empty on the scale-equivariant path;
/// H(0)=0 would not survive a bias term.
template <typename T>
struct ConvKernelT {
    TensorT<T> weights;
    std::vector<T> bias;  // empty or out_channels long

    ConvKernelT() = default;
    ConvKernelT(std::size_t oc, std::size_t ic, std::size_t kh, std::size_t kw);

    std::size_t out_channels() const { return weights.n(); }
    std::size_t in_channels() const { return weights.c(); }
    std::size_t kh() const { return weights.h(); }
    std::size_t kw() const { return weights.w(); }
};

using ConvKernel = ConvKernelT<float>;

template <typename To, typename From>
ConvKernelT<To> kernel_cast(const ConvKernelT<From>& k) {
    ConvKernelT<To> out;
    out.weights = tensor_cast<To>(k.weights);
    out.bias.assign(k.bias.begin(), k.bias.end());
    return out;
}

/// Per-token (per-pixel) statistics across channels, shapes (n,1,h,w).
/// Variance is the population form (divide by channel count).
template <typename T>
struct TokenStatsT {
    TensorT<T> mean;
    TensorT<T> variance;
};

using TokenStats = TokenStatsT<float>;

/// Cross-correlation with zero padding. Bias-free kernels commute with
/// positive scaling: conv2d(k*x) == k*conv2d(x).
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const ConvKernelT<T>& kernel,
                  std::size_t stride = 1, std::size_t padding = 0);

/// Adjoint of conv2d. Either output may be null to skip it; grad_weights is
/// accumulated (+=) so one buffer can serve a whole batch sweep.
template <typename T>
void conv2d_backward(const TensorT<T>& input, const ConvKernelT<T>& kernel,
                     std::size_t stride, std::size_t padding, const TensorT<T>& grad_out,
                     TensorT<T>* grad_input, TensorT<T>* grad_weights);

template <typename T>
TensorT<T> relu(const TensorT<T>& input);

/// Mask rule: gradient passes where input > 0; the subgradient at 0 is 0.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& input, const TensorT<T>& grad_out);

template <typename T>
TokenStatsT<T> token_stats(const TensorT<T>& input);

template <typename T>
void token_stats_backward(const TensorT<T>& input, const TensorT<T>& grad_mean,
                          const TensorT<T>& grad_variance, TensorT<T>* grad_input);

/// First c/2 and last c/2 channels. Odd channel counts are an error.
template <typename T>
std::pair<TensorT<T>, TensorT<T>> channel_split(const TensorT<T>& input);

template <typename T>
TensorT<T> channel_concat(const TensorT<T>& a, const TensorT<T>& b);

/// Depth-to-space with block size r: (n, c, h, w) -> (n, c/r^2, r*h, r*w).
template <typename T>
TensorT<T> depth_to_space(const TensorT<T>& input, std::size_t r);

template <typename T>
TensorT<T> space_to_depth(const TensorT<T>& input, std::size_t r);

/// Stride-2 3x3 conv doubling channels: (n,c,h,w) -> (n,2c,h/2,w/2).
template <typename T>
TensorT<T> downsample(const TensorT<T>& input, const ConvKernelT<T>& kernel);

/// 1x1 conv to 2c channels then depth-to-space: (n,c,h,w) -> (n,c/2,2h,2w).
template <typename T>
TensorT<T> upsample(const TensorT<T>& input, const ConvKernelT<T>& kernel);

/// Kaiming fan-in init: N(0, sqrt(2/fan_in)), deterministic per seed.
template <typename T>
void kaiming_init(ConvKernelT<T>& kernel, std::uint64_t seed);

}  // namespace sevkit
