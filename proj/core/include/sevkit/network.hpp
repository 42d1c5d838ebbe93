#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sevkit/autodiff.hpp"
#include "sevkit/modules.hpp"
#include "sevkit/ops.hpp"
#include "sevkit/tensor.hpp"

namespace sevkit {

enum class BlockKind { baseline_rb, sevb };
enum class HnmMode { full_cs, cs_only, hnm, none };
enum class Activation { igm, relu, elu, gelu, none };
enum class NormOverride { none, layer_norm };
enum class AffineSource { prenorm, postnorm };

std::string to_string(BlockKind v);
std::string to_string(HnmMode v);
std::string to_string(Activation v);
std::string to_string(IgmScaling v);
std::string to_string(NormOverride v);
std::string to_string(AffineSource v);

/// Declarative description of one U-Net variant, including every ablation
/// toggle of the comparison grid. Building the same spec twice yields
/// bit-identical parameters.
struct NetworkSpec {
    std::size_t in_channels = 3;
    std::size_t base_channels = 16;  // desk-scale default
    std::size_t depth = 2;           // encoder/decoder stage pairs
    std::size_t blocks_per_stage = 2;
    BlockKind block_kind = BlockKind::sevb;
    HnmMode hnm_mode = HnmMode::hnm;
    Activation activation = Activation::igm;
    IgmScaling igm_scaling = IgmScaling::dual;
    NormOverride norm_override = NormOverride::none;
    AffineSource nsm_affine_source = AffineSource::prenorm;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument naming the offending flag pair.
    void validate() const;

    /// True for the second-order gating configuration (no scaling term);
    /// such nets are constructible and trainable but divergence is expected.
    bool expected_unstable() const;

    std::string to_text() const;
    static NetworkSpec from_text(const std::string& text);
};

/// One residual unit. baseline_rb is conv3x3 - relu - conv3x3 + skip; sevb is
/// conv3x3 - [norm slot] - [activation slot] - conv1x1 + skip where the slots
/// are chosen by the spec flags.
template <typename T>
struct BlockT {
    BlockKind kind = BlockKind::sevb;
    HnmMode hnm_mode = HnmMode::hnm;
    Activation activation = Activation::igm;
    NormOverride norm_override = NormOverride::none;

    ConvKernelT<T> conv_in;  // 3x3 c -> c
    TensorT<T> conv_in_grad;
    ConvKernelT<T> conv_out;  // rb: 3x3 c -> c; sevb: 1x1 (c or c/2) -> c
    TensorT<T> conv_out_grad;

    std::optional<HNMLayerT<T>> hnm;
    std::optional<CSLayerT<T>> cs;  // full_cs: width c; cs_only: width c/2 on the first half
    std::optional<LayerNormT<T>> layer_norm;
    std::optional<IGMLayerT<T>> igm;

    std::size_t channels = 0;

    TensorT<T> forward(const TensorT<T>& x) const;
    typename TapeT<T>::NodeId forward(TapeT<T>& tape, typename TapeT<T>::NodeId x);
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out);
};

/// U-Net with additive skip connections and a global input skip:
/// G(z) = z + tail(decoder(bottleneck(encoder(head(z))))). The network core G
/// acts on centered data; denoise() wraps it with centralize/decentralize.
template <typename T>
struct NetworkT {
    NetworkSpec spec;
    bool built = false;
    /// True iff every layer comes from the certified first-order-homogeneous
    /// set; implies G(k*z) = k*G(z).
    bool certificate = false;

    ConvKernelT<T> head;
    TensorT<T> head_grad;
    ConvKernelT<T> tail;
    TensorT<T> tail_grad;
    std::vector<std::vector<BlockT<T>>> enc;  // [depth][blocks]
    std::vector<ConvKernelT<T>> down;         // [depth], stride-2 3x3
    std::vector<TensorT<T>> down_grad;
    std::vector<BlockT<T>> mid;
    std::vector<ConvKernelT<T>> up;  // [depth], 1x1 + depth-to-space
    std::vector<TensorT<T>> up_grad;
    std::vector<std::vector<BlockT<T>>> dec;  // [depth][blocks]

    /// Core network G on centered inputs. Spatial dims must be divisible by
    /// 2^depth.
    TensorT<T> forward_core(const TensorT<T>& z) const;
    typename TapeT<T>::NodeId forward_core(TapeT<T>& tape, typename TapeT<T>::NodeId z);

    /// decentralize(G(centralize(x))), clamped to [0,1] at emission only.
    TensorT<T> denoise(const TensorT<T>& image, bool clamp_output = true) const;

    /// Throws unless the input matches in_channels and both spatial dims are
    /// divisible by 2^depth (the message suggests the pad size).
    bool forward_shape_check(const TensorT<T>& z) const;

    std::vector<ParamRef<T>> params();
    std::size_t count_parameters() const;
    void zero_grads();
};

using Network = NetworkT<float>;
using Block = BlockT<float>;

Network build(const NetworkSpec& spec);

/// Rebuild the same architecture in another precision, copying parameters.
template <typename To>
NetworkT<To> convert_network(const Network& net);

// Checkpoint format: magic "EQNET1", uint32 version, uint64 spec text length,
// the NetworkSpec as config text, uint32 parameter count, then per parameter a
// length-prefixed name and an EQT1 tensor. Byte-stable across save/load/save.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace sevkit
