#include "sevkit/network.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "sevkit/config.hpp"
#include "sevkit/rng.hpp"

namespace sevkit {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

template <typename E>
E parse_enum(const std::string& value, std::initializer_list<std::pair<const char*, E>> table,
             const char* field) {
    for (const auto& [name, v] : table) {
        if (value == name) return v;
    }
    std::ostringstream os;
    os << "network spec: unknown " << field << " '" << value << "' (expected one of:";
    for (const auto& [name, v] : table) os << " " << name;
    os << ")";
    fail(os.str());
}

constexpr char kCheckpointMagic[6] = {'E', 'Q', 'N', 'E', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::string to_string(BlockKind v) { return v == BlockKind::baseline_rb ? "baseline_rb" : "sevb"; }
std::string to_string(HnmMode v) {
    switch (v) {
        case HnmMode::full_cs: return "full_cs";
        case HnmMode::cs_only: return "cs_only";
        case HnmMode::hnm: return "hnm";
        case HnmMode::none: return "none";
    }
    return "?";
}
std::string to_string(Activation v) {
    switch (v) {
        case Activation::igm: return "igm";
        case Activation::relu: return "relu";
        case Activation::elu: return "elu";
        case Activation::gelu: return "gelu";
        case Activation::none: return "none";
    }
    return "?";
}
std::string to_string(IgmScaling v) {
    switch (v) {
        case IgmScaling::dual: return "dual";
        case IgmScaling::single: return "single";
        case IgmScaling::none: return "none";
    }
    return "?";
}
std::string to_string(NormOverride v) { return v == NormOverride::none ? "none" : "layer_norm"; }
std::string to_string(AffineSource v) { return v == AffineSource::prenorm ? "prenorm" : "postnorm"; }

void NetworkSpec::validate() const {
    if (depth < 1) fail("network spec: depth must be >= 1");
    if (blocks_per_stage < 1) fail("network spec: blocks_per_stage must be >= 1");
    if (in_channels < 1) fail("network spec: in_channels must be >= 1");
    if (base_channels < 2 || base_channels % 2 != 0) {
        fail("network spec: base_channels must be even and >= 2");
    }
    if (block_kind == BlockKind::sevb) {
        if (igm_scaling != IgmScaling::dual && activation != Activation::igm) {
            fail("network spec: invalid combination (igm_scaling=" + to_string(igm_scaling) +
                 ", activation=" + to_string(activation) +
                 "): the gating scale term exists only when activation=igm");
        }
        const bool has_nsm = norm_override == NormOverride::none && hnm_mode == HnmMode::hnm;
        if (nsm_affine_source == AffineSource::postnorm && !has_nsm) {
            fail("network spec: invalid combination (nsm_affine_source=postnorm, hnm_mode=" +
                 to_string(hnm_mode) + ", norm_override=" + to_string(norm_override) +
                 "): no NSM branch is present");
        }
    }
}

bool NetworkSpec::expected_unstable() const {
    return block_kind == BlockKind::sevb && activation == Activation::igm &&
           igm_scaling == IgmScaling::none;
}

std::string NetworkSpec::to_text() const {
    KVConfig cfg;
    cfg.set_u64("in_channels", in_channels);
    cfg.set_u64("base_channels", base_channels);
    cfg.set_u64("depth", depth);
    cfg.set_u64("blocks_per_stage", blocks_per_stage);
    cfg.set("block_kind", to_string(block_kind));
    cfg.set("hnm_mode", to_string(hnm_mode));
    cfg.set("activation", to_string(activation));
    cfg.set("igm_scaling", to_string(igm_scaling));
    cfg.set("norm_override", to_string(norm_override));
    cfg.set("nsm_affine_source", to_string(nsm_affine_source));
    cfg.set_u64("seed", seed);
    return cfg.to_text();
}

NetworkSpec NetworkSpec::from_text(const std::string& text) {
    KVConfig cfg = KVConfig::parse(text);
    NetworkSpec s;
    if (cfg.has("in_channels")) s.in_channels = cfg.get_u64("in_channels");
    if (cfg.has("base_channels")) s.base_channels = cfg.get_u64("base_channels");
    if (cfg.has("depth")) s.depth = cfg.get_u64("depth");
    if (cfg.has("blocks_per_stage")) s.blocks_per_stage = cfg.get_u64("blocks_per_stage");
    if (cfg.has("block_kind")) {
        s.block_kind = parse_enum<BlockKind>(*cfg.get("block_kind"),
                                             {{"baseline_rb", BlockKind::baseline_rb},
                                              {"sevb", BlockKind::sevb}},
                                             "block_kind");
    }
    if (cfg.has("hnm_mode")) {
        s.hnm_mode = parse_enum<HnmMode>(*cfg.get("hnm_mode"),
                                         {{"full_cs", HnmMode::full_cs},
                                          {"cs_only", HnmMode::cs_only},
                                          {"hnm", HnmMode::hnm},
                                          {"none", HnmMode::none}},
                                         "hnm_mode");
    }
    if (cfg.has("activation")) {
        s.activation = parse_enum<Activation>(*cfg.get("activation"),
                                              {{"igm", Activation::igm},
                                               {"relu", Activation::relu},
                                               {"elu", Activation::elu},
                                               {"gelu", Activation::gelu},
                                               {"none", Activation::none}},
                                              "activation");
    }
    if (cfg.has("igm_scaling")) {
        s.igm_scaling = parse_enum<IgmScaling>(*cfg.get("igm_scaling"),
                                               {{"dual", IgmScaling::dual},
                                                {"single", IgmScaling::single},
                                                {"none", IgmScaling::none}},
                                               "igm_scaling");
    }
    if (cfg.has("norm_override")) {
        s.norm_override = parse_enum<NormOverride>(*cfg.get("norm_override"),
                                                   {{"none", NormOverride::none},
                                                    {"layer_norm", NormOverride::layer_norm}},
                                                   "norm_override");
    }
    if (cfg.has("nsm_affine_source")) {
        s.nsm_affine_source = parse_enum<AffineSource>(*cfg.get("nsm_affine_source"),
                                                       {{"prenorm", AffineSource::prenorm},
                                                        {"postnorm", AffineSource::postnorm}},
                                                       "nsm_affine_source");
    }
    if (cfg.has("seed")) s.seed = cfg.get_u64("seed");
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Block

template <typename T>
TensorT<T> BlockT<T>::forward(const TensorT<T>& x) const {
    if (x.c() != channels) {
        fail("block: expected " + std::to_string(channels) + " channels, got " +
             shape_string(x.shape()));
    }
    if (kind == BlockKind::baseline_rb) {
        return conv2d(relu(conv2d(x, conv_in, 1, 1)), conv_out, 1, 1) + x;
    }
    TensorT<T> t = conv2d(x, conv_in, 1, 1);
    if (norm_override == NormOverride::layer_norm) {
        t = layer_norm->forward(t);
    } else if (hnm_mode == HnmMode::hnm) {
        t = hnm->forward(t);
    } else if (hnm_mode == HnmMode::full_cs) {
        t = cs->forward(t);
    } else if (hnm_mode == HnmMode::cs_only) {
        auto [t1, t2] = channel_split(t);
        t = channel_concat(cs->forward(t1), t2);
    }
    switch (activation) {
        case Activation::igm: t = igm->forward(t); break;
        case Activation::relu: t = relu(t); break;
        case Activation::elu: t = elu(t); break;
        case Activation::gelu: t = gelu(t); break;
        case Activation::none: break;
    }
    return conv2d(t, conv_out, 1, 0) + x;
}

template <typename T>
typename TapeT<T>::NodeId BlockT<T>::forward(TapeT<T>& tape, typename TapeT<T>::NodeId x) {
    if (kind == BlockKind::baseline_rb) {
        auto t = tape_conv2d(tape, x, conv_in, &conv_in_grad, 1, 1);
        t = tape_relu(tape, t);
        t = tape_conv2d(tape, t, conv_out, &conv_out_grad, 1, 1);
        return tape_add(tape, t, x);
    }
    auto t = tape_conv2d(tape, x, conv_in, &conv_in_grad, 1, 1);
    if (norm_override == NormOverride::layer_norm) {
        t = layer_norm->forward(tape, t);
    } else if (hnm_mode == HnmMode::hnm) {
        t = hnm->forward(tape, t);
    } else if (hnm_mode == HnmMode::full_cs) {
        t = cs->forward(tape, t);
    } else if (hnm_mode == HnmMode::cs_only) {
        auto [v1, v2] = channel_split(tape.value(t));
        TensorT<T> y = channel_concat(cs->forward(v1), v2);
        CSLayerT<T>* cs_ptr = &*cs;
        t = tape.push(std::move(y), [cs_ptr, t](TapeT<T>& tp, typename TapeT<T>::NodeId self) {
            auto [x1, x2] = channel_split(tp.value(t));
            auto [g1, g2] = channel_split(tp.grad(self));
            TensorT<T> gx1;
            cs_ptr->backward(x1, g1, &gx1);
            tp.grad(t) += channel_concat(gx1, g2);
        });
    }
    switch (activation) {
        case Activation::igm: t = igm->forward(tape, t); break;
        case Activation::relu: t = tape_relu(tape, t); break;
        case Activation::elu: t = tape_elu(tape, t); break;
        case Activation::gelu: t = tape_gelu(tape, t); break;
        case Activation::none: break;
    }
    t = tape_conv2d(tape, t, conv_out, &conv_out_grad, 1, 0);
    return tape_add(tape, t, x);
}

template <typename T>
void BlockT<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".conv_in", &conv_in.weights, &conv_in_grad});
    if (hnm) hnm->collect_params(prefix + ".hnm", out);
    if (cs) cs->collect_params(prefix + ".cs", out);
    if (layer_norm) layer_norm->collect_params(prefix + ".ln", out);
    if (igm) igm->collect_params(prefix + ".igm", out);
    out.push_back({prefix + ".conv_out", &conv_out.weights, &conv_out_grad});
}

// ---------------------------------------------------------------------------
// Builder

namespace {

template <typename T>
BlockT<T> make_block(const NetworkSpec& spec, std::size_t channels,
                     const std::function<std::uint64_t()>& next_seed) {
    BlockT<T> b;
    b.kind = spec.block_kind;
    b.hnm_mode = spec.hnm_mode;
    b.activation = spec.activation;
    b.norm_override = spec.norm_override;
    b.channels = channels;

    b.conv_in = ConvKernelT<T>(channels, channels, 3, 3);
    b.conv_in_grad = TensorT<T>::zeros_like(b.conv_in.weights);
    kaiming_init(b.conv_in, next_seed());

    if (b.kind == BlockKind::baseline_rb) {
        b.conv_out = ConvKernelT<T>(channels, channels, 3, 3);
        b.conv_out_grad = TensorT<T>::zeros_like(b.conv_out.weights);
        kaiming_init(b.conv_out, next_seed());
        b.conv_out.weights *= T(0.1);  // residual branches start near identity
        return b;
    }

    if (b.norm_override == NormOverride::layer_norm) {
        b.layer_norm.emplace(channels);
    } else if (b.hnm_mode == HnmMode::hnm) {
        b.hnm.emplace(channels, next_seed());
        b.hnm->nsm.affine_from_normalized = spec.nsm_affine_source == AffineSource::postnorm;
    } else if (b.hnm_mode == HnmMode::full_cs) {
        b.cs.emplace(channels);
    } else if (b.hnm_mode == HnmMode::cs_only) {
        if (channels % 2 != 0) fail("block: cs_only partition needs an even channel count");
        b.cs.emplace(channels / 2);
    }

    std::size_t act_out = channels;
    if (b.activation == Activation::igm) {
        b.igm.emplace(channels, next_seed());
        b.igm->scaling = spec.igm_scaling;
        act_out = channels / 2;
    }
    b.conv_out = ConvKernelT<T>(channels, act_out, 1, 1);
    b.conv_out_grad = TensorT<T>::zeros_like(b.conv_out.weights);
    kaiming_init(b.conv_out, next_seed());
    b.conv_out.weights *= T(0.1);
    return b;
}

bool compute_certificate(const NetworkSpec& spec) {
    if (spec.block_kind == BlockKind::baseline_rb) return true;
    if (spec.norm_override == NormOverride::layer_norm) return false;
    if (spec.activation == Activation::elu || spec.activation == Activation::gelu) return false;
    if (spec.activation == Activation::igm && spec.igm_scaling == IgmScaling::none) return false;
    const bool has_nsm = spec.norm_override == NormOverride::none && spec.hnm_mode == HnmMode::hnm;
    if (has_nsm && spec.nsm_affine_source == AffineSource::postnorm) return false;
    return true;
}

template <typename T>
NetworkT<T> build_t(const NetworkSpec& spec) {
    spec.validate();
    NetworkT<T> net;
    net.spec = spec;
    net.built = true;
    net.certificate = compute_certificate(spec);

    std::uint64_t stream = 0;
    auto next_seed = [&]() { return derive_seed(spec.seed, stream++); };
    std::function<std::uint64_t()> seed_fn = next_seed;

    net.head = ConvKernelT<T>(spec.base_channels, spec.in_channels, 3, 3);
    net.head_grad = TensorT<T>::zeros_like(net.head.weights);
    kaiming_init(net.head, next_seed());

    for (std::size_t l = 0; l < spec.depth; ++l) {
        const std::size_t width = spec.base_channels << l;
        std::vector<BlockT<T>> blocks;
        for (std::size_t b = 0; b < spec.blocks_per_stage; ++b) {
            blocks.push_back(make_block<T>(spec, width, seed_fn));
        }
        net.enc.push_back(std::move(blocks));
        net.down.emplace_back(2 * width, width, 3, 3);
        net.down_grad.push_back(TensorT<T>::zeros_like(net.down.back().weights));
        kaiming_init(net.down.back(), next_seed());
    }

    const std::size_t mid_width = spec.base_channels << spec.depth;
    for (std::size_t b = 0; b < spec.blocks_per_stage; ++b) {
        net.mid.push_back(make_block<T>(spec, mid_width, seed_fn));
    }

    for (std::size_t l = 0; l < spec.depth; ++l) {
        const std::size_t width = spec.base_channels << (l + 1);  // input width of up[l]
        net.up.emplace_back(2 * width, width, 1, 1);
        net.up_grad.push_back(TensorT<T>::zeros_like(net.up.back().weights));
        kaiming_init(net.up.back(), next_seed());
        std::vector<BlockT<T>> blocks;
        for (std::size_t b = 0; b < spec.blocks_per_stage; ++b) {
            blocks.push_back(make_block<T>(spec, spec.base_channels << l, seed_fn));
        }
        net.dec.push_back(std::move(blocks));
    }

    net.tail = ConvKernelT<T>(spec.in_channels, spec.base_channels, 3, 3);
    net.tail_grad = TensorT<T>::zeros_like(net.tail.weights);
    kaiming_init(net.tail, next_seed());
    net.tail.weights *= T(0.1);  // the global skip dominates at init
    return net;
}

}  // namespace

Network build(const NetworkSpec& spec) { return build_t<float>(spec); }

// ---------------------------------------------------------------------------
// Forward

template <typename T>
TensorT<T> NetworkT<T>::forward_core(const TensorT<T>& z) const {
    (void)forward_shape_check(z);

    TensorT<T> f = conv2d(z, head, 1, 1);
    std::vector<TensorT<T>> skips;
    for (std::size_t l = 0; l < spec.depth; ++l) {
        for (const auto& b : enc[l]) f = b.forward(f);
        skips.push_back(f);
        f = conv2d(f, down[l], 2, 1);
    }
    for (const auto& b : mid) f = b.forward(f);
    for (std::size_t l = spec.depth; l-- > 0;) {
        f = upsample(f, up[l]);
        f += skips[l];
        for (const auto& b : dec[l]) f = b.forward(f);
    }
    return conv2d(f, tail, 1, 1) + z;
}

template <typename T>
typename TapeT<T>::NodeId NetworkT<T>::forward_core(TapeT<T>& tape, typename TapeT<T>::NodeId z) {
    // Same shape checks as the pure path.
    (void)forward_shape_check(tape.value(z));

    auto f = tape_conv2d(tape, z, head, &head_grad, 1, 1);
    std::vector<typename TapeT<T>::NodeId> skips;
    for (std::size_t l = 0; l < spec.depth; ++l) {
        for (auto& b : enc[l]) f = b.forward(tape, f);
        skips.push_back(f);
        f = tape_conv2d(tape, f, down[l], &down_grad[l], 2, 1);
    }
    for (auto& b : mid) f = b.forward(tape, f);
    for (std::size_t l = spec.depth; l-- > 0;) {
        f = tape_conv2d(tape, f, up[l], &up_grad[l], 1, 0);
        {
            TensorT<T> y = depth_to_space(tape.value(f), 2);
            auto parent = f;
            f = tape.push(std::move(y), [parent](TapeT<T>& t, typename TapeT<T>::NodeId self) {
                t.grad(parent) += space_to_depth(t.grad(self), 2);
            });
        }
        f = tape_add(tape, f, skips[l]);
        for (auto& b : dec[l]) f = b.forward(tape, f);
    }
    f = tape_conv2d(tape, f, tail, &tail_grad, 1, 1);
    return tape_add(tape, f, z);
}

template <typename T>
bool NetworkT<T>::forward_shape_check(const TensorT<T>& z) const {
    if (!built) fail("network: not built");
    if (z.c() != spec.in_channels) {
        fail("network: expected " + std::to_string(spec.in_channels) + " channels, got " +
             shape_string(z.shape()));
    }
    const std::size_t mult = std::size_t(1) << spec.depth;
    if (z.h() % mult != 0 || z.w() % mult != 0) {
        const std::size_t ph = (z.h() + mult - 1) / mult * mult;
        const std::size_t pw = (z.w() + mult - 1) / mult * mult;
        fail("network: spatial dims " + shape_string(z.shape()) + " not divisible by " +
             std::to_string(mult) + "; pad input to " + std::to_string(ph) + "x" +
             std::to_string(pw));
    }
    return true;
}

template <typename T>
TensorT<T> NetworkT<T>::denoise(const TensorT<T>& image, bool clamp_output) const {
    TensorT<T> out = decentralize(forward_core(centralize(image)));
    if (clamp_output) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = std::clamp(out[i], T(0), T(1));
        }
    }
    return out;
}

template <typename T>
std::vector<ParamRef<T>> NetworkT<T>::params() {
    std::vector<ParamRef<T>> out;
    if (!built) return out;
    out.push_back({"head", &head.weights, &head_grad});
    for (std::size_t l = 0; l < enc.size(); ++l) {
        for (std::size_t b = 0; b < enc[l].size(); ++b) {
            enc[l][b].collect_params("enc" + std::to_string(l) + ".b" + std::to_string(b), out);
        }
        out.push_back({"down" + std::to_string(l), &down[l].weights, &down_grad[l]});
    }
    for (std::size_t b = 0; b < mid.size(); ++b) {
        mid[b].collect_params("mid.b" + std::to_string(b), out);
    }
    for (std::size_t l = 0; l < dec.size(); ++l) {
        out.push_back({"up" + std::to_string(l), &up[l].weights, &up_grad[l]});
        for (std::size_t b = 0; b < dec[l].size(); ++b) {
            dec[l][b].collect_params("dec" + std::to_string(l) + ".b" + std::to_string(b), out);
        }
    }
    out.push_back({"tail", &tail.weights, &tail_grad});
    return out;
}

template <typename T>
std::size_t NetworkT<T>::count_parameters() const {
    auto refs = const_cast<NetworkT<T>*>(this)->params();
    std::size_t total = 0;
    for (const auto& r : refs) total += r.value->size();
    return total;
}

template <typename T>
void NetworkT<T>::zero_grads() {
    for (auto& r : params()) r.grad->fill(T(0));
}

template <typename To>
NetworkT<To> convert_network(const Network& net) {
    if (!net.built) fail("convert_network: source not built");
    NetworkT<To> out = build_t<To>(net.spec);
    auto src = const_cast<Network&>(net).params();
    auto dst = out.params();
    for (std::size_t i = 0; i < src.size(); ++i) {
        *dst[i].value = tensor_cast<To>(*src[i].value);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

void save_network(const Network& net, const std::string& path) {
    if (!net.built) fail("save_network: network not built");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(kCheckpointMagic, 6);
    write_u32(out, kCheckpointVersion);
    const std::string spec_text = net.spec.to_text();
    write_u32(out, static_cast<std::uint32_t>(spec_text.size()));
    out.write(spec_text.data(), static_cast<std::streamsize>(spec_text.size()));
    auto refs = const_cast<Network&>(net).params();
    write_u32(out, static_cast<std::uint32_t>(refs.size()));
    for (const auto& r : refs) {
        write_u32(out, static_cast<std::uint32_t>(r.name.size()));
        out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        save_tensor(*r.value, out);
    }
    if (!out) throw std::runtime_error("write error: " + path);
}

Network load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kCheckpointMagic, 6) != 0) {
        throw std::runtime_error("checkpoint: bad magic, expected EQNET1: " + path);
    }
    const std::uint32_t version = read_u32(in);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t spec_len = read_u32(in);
    std::string spec_text(spec_len, '\0');
    in.read(spec_text.data(), spec_len);
    if (!in) throw std::runtime_error("checkpoint: truncated spec");
    Network net = build(NetworkSpec::from_text(spec_text));
    auto refs = net.params();
    const std::uint32_t count = read_u32(in);
    if (count != refs.size()) {
        throw std::runtime_error("checkpoint: expected " + std::to_string(refs.size()) +
                                 " parameters, file has " + std::to_string(count));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        Tensor t = load_tensor(in);
        auto it = std::find_if(refs.begin(), refs.end(),
                               [&](const ParamRef<float>& r) { return r.name == name; });
        if (it == refs.end()) {
            throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
        }
        if (!it->value->same_shape(t)) {
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
        }
        *it->value = std::move(t);
    }
    return net;
}

template struct BlockT<float>;
template struct BlockT<double>;
template struct NetworkT<float>;
template struct NetworkT<double>;
template NetworkT<double> convert_network<double>(const Network&);
template NetworkT<float> convert_network<float>(const Network&);

}  // namespace sevkit
