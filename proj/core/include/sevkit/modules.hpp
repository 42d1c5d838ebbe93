#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sevkit/autodiff.hpp"
#include "sevkit/ops.hpp"
#include "sevkit/tensor.hpp"

namespace sevkit {

/// Named handle onto one learnable tensor and its gradient accumulator.
template <typename T>
struct ParamRef {
    std::string name;
    TensorT<T>* value;
    TensorT<T>* grad;
};

// Tape wrappers for the primitive ops. Weight gradients accumulate into the
// caller-owned buffer, which must outlive the tape.
template <typename T>
typename TapeT<T>::NodeId tape_conv2d(TapeT<T>& tape, typename TapeT<T>::NodeId x,
                                      const ConvKernelT<T>& kernel, TensorT<T>* weight_grad,
                                      std::size_t stride, std::size_t padding);
template <typename T>
typename TapeT<T>::NodeId tape_relu(TapeT<T>& tape, typename TapeT<T>::NodeId x);

/// Per-channel gain divided by sqrt(c): y = x * gain[c] / sqrt(c).
/// Commutes exactly with positive input scaling.
template <typename T>
struct CSLayerT {
    TensorT<T> gain;  // (1,c,1,1), initialized to 1
    TensorT<T> gain_grad;

    CSLayerT() = default;
    explicit CSLayerT(std::size_t channels);

    std::size_t channels() const { return gain.c(); }
    TensorT<T> forward(const TensorT<T>& x) const;
    typename TapeT<T>::NodeId forward(TapeT<T>& tape, typename TapeT<T>::NodeId x);
    void backward(const TensorT<T>& x, const TensorT<T>& grad_out, TensorT<T>* grad_x);
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out);
};

/// Normalized self-modulation: per-token normalize, then re-scale and shift
/// with gamma/beta produced by a bias-free 1x1 projection of the
/// pre-normalized input. Tokens whose variance falls below `tau` skip the
/// normalized term and emit beta alone; beta scales linearly with the input,
/// so the degenerate branch stays first-order homogeneous (an epsilon inside
/// the square root would not).
template <typename T>
struct NSMLayerT {
    ConvKernelT<T> proj;  // 1x1, c -> 2c (gamma then beta halves)
    TensorT<T> proj_grad;
    T tau = T(1e-12);
    bool affine_from_normalized = false;  // ablation: derive gamma/beta post-norm (order 0)

    NSMLayerT() = default;
    NSMLayerT(std::size_t channels, std::uint64_t seed);

    std::size_t channels() const { return proj.in_channels(); }
    TensorT<T> forward(const TensorT<T>& x) const;
    typename TapeT<T>::NodeId forward(TapeT<T>& tape, typename TapeT<T>::NodeId x);
    void backward(const TensorT<T>& x, const TensorT<T>& grad_out, TensorT<T>* grad_x);
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out);
};

enum class IgmScaling { dual, single, none };

/// Interactive gating: split channels, project the first half with a 3x3
/// conv (value path), gate with the raw second half, and normalize each token
/// by sqrt of the summed per-token variances of both signals. The dual-signal
/// denominator turns a second-order product into a first-order map. Output
/// has c/2 channels.
template <typename T>
struct IGMLayerT {
    ConvKernelT<T> value_proj;  // 3x3, c/2 -> c/2
    TensorT<T> value_proj_grad;
    T tau = T(1e-12);
    IgmScaling scaling = IgmScaling::dual;

    IGMLayerT() = default;
    IGMLayerT(std::size_t channels, std::uint64_t seed);

    std::size_t channels() const { return value_proj.in_channels() * 2; }
    TensorT<T> forward(const TensorT<T>& x) const;
    typename TapeT<T>::NodeId forward(TapeT<T>& tape, typename TapeT<T>::NodeId x);
    void backward(const TensorT<T>& x, const TensorT<T>& grad_out, TensorT<T>* grad_x);
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out);
};

/// Heterogeneous normalization: even channel partition, CS on the first half,
/// NSM on the second, reconcatenated.
template <typename T>
struct HNMLayerT {
    CSLayerT<T> cs;
    NSMLayerT<T> nsm;
    double partition_fraction = 0.5;

    HNMLayerT() = default;
    HNMLayerT(std::size_t channels, std::uint64_t seed);

    std::size_t channels() const { return cs.channels() + nsm.channels(); }
    TensorT<T> forward(const TensorT<T>& x) const;
    typename TapeT<T>::NodeId forward(TapeT<T>& tape, typename TapeT<T>::NodeId x);
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out);
};

/// Per-token layer normalization with learnable per-channel affine. Used only
/// by ablation variants: the normalized term is scale-independent and the
/// affine parameters are constants, so the whole map has order 0, not 1.
/// Degenerate tokens (variance < tau) emit beta, keeping order 0 exact.
template <typename T>
struct LayerNormT {
    TensorT<T> gamma;  // (1,c,1,1), init 1
    TensorT<T> beta;   // (1,c,1,1), init 0
    TensorT<T> gamma_grad;
    TensorT<T> beta_grad;
    T tau = T(1e-12);

    LayerNormT() = default;
    explicit LayerNormT(std::size_t channels);

    std::size_t channels() const { return gamma.c(); }
    TensorT<T> forward(const TensorT<T>& x) const;
    typename TapeT<T>::NodeId forward(TapeT<T>& tape, typename TapeT<T>::NodeId x);
    void backward(const TensorT<T>& x, const TensorT<T>& grad_out, TensorT<T>* grad_x);
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out);
};

// Pointwise activations for the ablation grid. ELU and GELU are not
// first-order homogeneous.
template <typename T>
TensorT<T> elu(const TensorT<T>& x);
template <typename T>
TensorT<T> elu_backward(const TensorT<T>& x, const TensorT<T>& grad_out);
template <typename T>
TensorT<T> gelu(const TensorT<T>& x);
template <typename T>
TensorT<T> gelu_backward(const TensorT<T>& x, const TensorT<T>& grad_out);

template <typename T>
typename TapeT<T>::NodeId tape_elu(TapeT<T>& tape, typename TapeT<T>::NodeId x);
template <typename T>
typename TapeT<T>::NodeId tape_gelu(TapeT<T>& tape, typename TapeT<T>::NodeId x);

/// Conv-ReLU-Conv with identity skip; both kernels bias-free and
/// channel-preserving.
template <typename T>
TensorT<T> residual_block(const TensorT<T>& x, const ConvKernelT<T>& conv1,
                          const ConvKernelT<T>& conv2);

// Images are centered before the core network and restored after it; the
// offset is 0.5 for data in [0,1].
template <typename T>
TensorT<T> centralize(const TensorT<T>& image);
template <typename T>
TensorT<T> decentralize(const TensorT<T>& core_output);

}  // namespace sevkit
