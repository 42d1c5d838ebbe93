#include "sevkit/modules.hpp"

#include <cmath>
#include <stdexcept>

#include "sevkit/rng.hpp"

namespace sevkit {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

template <typename T>
void check_channels(const TensorT<T>& x, std::size_t expected, const char* op) {
    if (x.c() != expected) {
        fail(std::string(op) + ": expected " + std::to_string(expected) + " channels, got tensor " +
             shape_string(x.shape()));
    }
}

// Per-token normalized view u = (x - mean) / sqrt(var), with tokens below the
// variance threshold zeroed. Returns u; mean/var through out-params.
template <typename T>
TensorT<T> normalize_tokens(const TensorT<T>& x, T tau, TokenStatsT<T>* stats_out) {
    TokenStatsT<T> st = token_stats(x);
    const std::size_t c = x.c(), plane = x.h() * x.w();
    TensorT<T> u = TensorT<T>::zeros_like(x);
    for (std::size_t img = 0; img < x.n(); ++img) {
        for (std::size_t p = 0; p < plane; ++p) {
            const T var = st.variance[img * plane + p];
            if (var < tau) continue;
            const T mean = st.mean[img * plane + p];
            const T inv_s = T(1) / std::sqrt(var);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t idx = (img * c + ch) * plane + p;
                u[idx] = (x[idx] - mean) * inv_s;
            }
        }
    }
    if (stats_out) *stats_out = std::move(st);
    return u;
}

// Adjoint of normalize_tokens: given h = dL/du, produce dL/dx.
// For a non-degenerate token, dL/dx_j = (h_j - mean(h) - u_j * mean(h*u)) / s.
// Degenerate tokens contribute nothing (the branch is constant zero there).
template <typename T>
void normalize_tokens_backward(const TensorT<T>& u, const TokenStatsT<T>& stats, T tau,
                               const TensorT<T>& h, TensorT<T>* grad_x) {
    const std::size_t c = u.c(), plane = u.h() * u.w();
    const T inv_c = T(1) / static_cast<T>(c);
    if (!grad_x->same_shape(u)) *grad_x = TensorT<T>::zeros_like(u);
    for (std::size_t img = 0; img < u.n(); ++img) {
        for (std::size_t p = 0; p < plane; ++p) {
            const T var = stats.variance[img * plane + p];
            if (var < tau) continue;
            const T inv_s = T(1) / std::sqrt(var);
            T mean_h = T(0), mean_hu = T(0);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t idx = (img * c + ch) * plane + p;
                mean_h += h[idx];
                mean_hu += h[idx] * u[idx];
            }
            mean_h *= inv_c;
            mean_hu *= inv_c;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t idx = (img * c + ch) * plane + p;
                (*grad_x)[idx] += (h[idx] - mean_h - u[idx] * mean_hu) * inv_s;
            }
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// CS

template <typename T>
CSLayerT<T>::CSLayerT(std::size_t channels)
    : gain(TensorT<T>::full(1, channels, 1, 1, T(1))), gain_grad(1, channels, 1, 1) {}

template <typename T>
TensorT<T> CSLayerT<T>::forward(const TensorT<T>& x) const {
    check_channels(x, channels(), "constant_scaling");
    const T inv_sqrt_c = T(1) / std::sqrt(static_cast<T>(channels()));
    const std::size_t plane = x.h() * x.w();
    TensorT<T> y = x;
    for (std::size_t img = 0; img < x.n(); ++img)
        for (std::size_t ch = 0; ch < x.c(); ++ch) {
            const T s = gain[ch] * inv_sqrt_c;
            T* p = y.data() + (img * x.c() + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) p[i] *= s;
        }
    return y;
}

template <typename T>
void CSLayerT<T>::backward(const TensorT<T>& x, const TensorT<T>& grad_out, TensorT<T>* grad_x) {
    require_same_shape(x, grad_out, "constant_scaling backward");
    const T inv_sqrt_c = T(1) / std::sqrt(static_cast<T>(channels()));
    const std::size_t plane = x.h() * x.w();
    if (grad_x && !grad_x->same_shape(x)) *grad_x = TensorT<T>::zeros_like(x);
    for (std::size_t img = 0; img < x.n(); ++img)
        for (std::size_t ch = 0; ch < x.c(); ++ch) {
            const std::size_t base = (img * x.c() + ch) * plane;
            T acc = T(0);
            for (std::size_t i = 0; i < plane; ++i) {
                acc += grad_out[base + i] * x[base + i];
                if (grad_x) (*grad_x)[base + i] += grad_out[base + i] * gain[ch] * inv_sqrt_c;
            }
            gain_grad[ch] += acc * inv_sqrt_c;
        }
}

template <typename T>
typename TapeT<T>::NodeId CSLayerT<T>::forward(TapeT<T>& tape, typename TapeT<T>::NodeId x) {
    TensorT<T> y = forward(tape.value(x));
    return tape.push(std::move(y), [this, x](TapeT<T>& t, typename TapeT<T>::NodeId self) {
        TensorT<T> gx;
        backward(t.value(x), t.grad(self), &gx);
        t.grad(x) += gx;
    });
}

template <typename T>
void CSLayerT<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".gain", &gain, &gain_grad});
}

// ---------------------------------------------------------------------------
// NSM

template <typename T>
NSMLayerT<T>::NSMLayerT(std::size_t channels, std::uint64_t seed)
    : proj(2 * channels, channels, 1, 1), proj_grad(2 * channels, channels, 1, 1) {
    kaiming_init(proj, seed);
}

template <typename T>
TensorT<T> NSMLayerT<T>::forward(const TensorT<T>& x) const {
    check_channels(x, channels(), "nsm");
    TokenStatsT<T> stats;
    TensorT<T> u = normalize_tokens(x, tau, &stats);
    const TensorT<T>& source = affine_from_normalized ? u : x;
    TensorT<T> gb = conv2d(source, proj, 1, 0);
    const std::size_t c = x.c(), plane = x.h() * x.w();
    TensorT<T> y(x.n(), c, x.h(), x.w());
    for (std::size_t img = 0; img < x.n(); ++img)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* g = gb.data() + (img * 2 * c + ch) * plane;
            const T* b = gb.data() + (img * 2 * c + c + ch) * plane;
            const T* up = u.data() + (img * c + ch) * plane;
            T* yp = y.data() + (img * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) yp[i] = g[i] * up[i] + b[i];
        }
    return y;
}

template <typename T>
void NSMLayerT<T>::backward(const TensorT<T>& x, const TensorT<T>& grad_out, TensorT<T>* grad_x) {
    require_same_shape(x, grad_out, "nsm backward");
    TokenStatsT<T> stats;
    TensorT<T> u = normalize_tokens(x, tau, &stats);
    const TensorT<T>& source = affine_from_normalized ? u : x;
    TensorT<T> gb = conv2d(source, proj, 1, 0);

    const std::size_t c = x.c(), plane = x.h() * x.w();
    // Upstream gradient for the projection output: [gy*u ; gy].
    TensorT<T> g_gb(x.n(), 2 * c, x.h(), x.w());
    // Direct modulation path: h = gy * gamma.
    TensorT<T> h = TensorT<T>::zeros_like(x);
    for (std::size_t img = 0; img < x.n(); ++img)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t xoff = (img * c + ch) * plane;
            const std::size_t goff = (img * 2 * c + ch) * plane;
            const std::size_t boff = (img * 2 * c + c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                g_gb[goff + i] = grad_out[xoff + i] * u[xoff + i];
                g_gb[boff + i] = grad_out[xoff + i];
                h[xoff + i] = grad_out[xoff + i] * gb[goff + i];
            }
        }

    TensorT<T> g_source;
    conv2d_backward(source, proj, 1, 0, g_gb, &g_source, &proj_grad);

    if (grad_x && !grad_x->same_shape(x)) *grad_x = TensorT<T>::zeros_like(x);
    if (!grad_x) return;
    if (affine_from_normalized) {
        h += g_source;  // projection input is u as well
        normalize_tokens_backward(u, stats, tau, h, grad_x);
    } else {
        normalize_tokens_backward(u, stats, tau, h, grad_x);
        *grad_x += g_source;
    }
}

template <typename T>
typename TapeT<T>::NodeId NSMLayerT<T>::forward(TapeT<T>& tape, typename TapeT<T>::NodeId x) {
    TensorT<T> y = forward(tape.value(x));
    return tape.push(std::move(y), [this, x](TapeT<T>& t, typename TapeT<T>::NodeId self) {
        TensorT<T> gx;
        backward(t.value(x), t.grad(self), &gx);
        t.grad(x) += gx;
    });
}

template <typename T>
void NSMLayerT<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".proj", &proj.weights, &proj_grad});
}

// ---------------------------------------------------------------------------
// IGM

template <typename T>
IGMLayerT<T>::IGMLayerT(std::size_t channels, std::uint64_t seed) {
    if (channels % 2 != 0) fail("igm: channel count must be even");
    value_proj = ConvKernelT<T>(channels / 2, channels / 2, 3, 3);
    value_proj_grad = TensorT<T>(channels / 2, channels / 2, 3, 3);
    kaiming_init(value_proj, seed);
}

template <typename T>
TensorT<T> IGMLayerT<T>::forward(const TensorT<T>& x) const {
    check_channels(x, channels(), "igm");
    auto [x1, x2] = channel_split(x);
    TensorT<T> a = conv2d(x1, value_proj, 1, 1);  // value path F_v
    const TensorT<T>& b = x2;                     // gating path F_g
    TokenStatsT<T> sa = token_stats(a);
    TokenStatsT<T> sb = token_stats(b);
    const std::size_t half = a.c(), plane = a.h() * a.w();
    TensorT<T> y(a.n(), half, a.h(), a.w());
    for (std::size_t img = 0; img < a.n(); ++img)
        for (std::size_t p = 0; p < plane; ++p) {
            T den2 = T(1);
            switch (scaling) {
                case IgmScaling::dual: den2 = sa.variance[img * plane + p] + sb.variance[img * plane + p]; break;
                case IgmScaling::single: den2 = sb.variance[img * plane + p]; break;
                case IgmScaling::none: den2 = T(1); break;
            }
            if (scaling != IgmScaling::none && den2 < tau) {
                for (std::size_t ch = 0; ch < half; ++ch) y[(img * half + ch) * plane + p] = T(0);
                continue;
            }
            const T inv_d = T(1) / std::sqrt(den2);
            for (std::size_t ch = 0; ch < half; ++ch) {
                const std::size_t idx = (img * half + ch) * plane + p;
                y[idx] = a[idx] * b[idx] * inv_d;
            }
        }
    return y;
}

template <typename T>
void IGMLayerT<T>::backward(const TensorT<T>& x, const TensorT<T>& grad_out, TensorT<T>* grad_x) {
    check_channels(x, channels(), "igm backward");
    auto [x1, x2] = channel_split(x);
    TensorT<T> a = conv2d(x1, value_proj, 1, 1);
    const TensorT<T>& b = x2;
    TokenStatsT<T> sa = token_stats(a);
    TokenStatsT<T> sb = token_stats(b);
    const std::size_t half = a.c(), plane = a.h() * a.w();
    const T inv_half = T(1) / static_cast<T>(half);

    TensorT<T> ga = TensorT<T>::zeros_like(a);
    TensorT<T> gb = TensorT<T>::zeros_like(b);
    for (std::size_t img = 0; img < a.n(); ++img)
        for (std::size_t p = 0; p < plane; ++p) {
            T den2 = T(1);
            switch (scaling) {
                case IgmScaling::dual: den2 = sa.variance[img * plane + p] + sb.variance[img * plane + p]; break;
                case IgmScaling::single: den2 = sb.variance[img * plane + p]; break;
                case IgmScaling::none: den2 = T(1); break;
            }
            if (scaling != IgmScaling::none && den2 < tau) continue;
            const T inv_d = T(1) / std::sqrt(den2);
            // S = sum_i g_i a_i b_i feeds the variance path of the denominator.
            T S = T(0);
            for (std::size_t ch = 0; ch < half; ++ch) {
                const std::size_t idx = (img * half + ch) * plane + p;
                S += grad_out[idx] * a[idx] * b[idx];
            }
            const T k = S * inv_d * inv_d * inv_d * inv_half;
            const T mu_a = sa.mean[img * plane + p];
            const T mu_b = sb.mean[img * plane + p];
            for (std::size_t ch = 0; ch < half; ++ch) {
                const std::size_t idx = (img * half + ch) * plane + p;
                ga[idx] = grad_out[idx] * b[idx] * inv_d;
                gb[idx] = grad_out[idx] * a[idx] * inv_d;
                if (scaling == IgmScaling::dual) {
                    ga[idx] -= k * (a[idx] - mu_a);
                    gb[idx] -= k * (b[idx] - mu_b);
                } else if (scaling == IgmScaling::single) {
                    gb[idx] -= k * (b[idx] - mu_b);
                }
            }
        }

    TensorT<T> gx1;
    conv2d_backward(x1, value_proj, 1, 1, ga, &gx1, &value_proj_grad);
    if (grad_x) *grad_x = channel_concat(gx1, gb);
}

template <typename T>
typename TapeT<T>::NodeId IGMLayerT<T>::forward(TapeT<T>& tape, typename TapeT<T>::NodeId x) {
    TensorT<T> y = forward(tape.value(x));
    return tape.push(std::move(y), [this, x](TapeT<T>& t, typename TapeT<T>::NodeId self) {
        TensorT<T> gx;
        backward(t.value(x), t.grad(self), &gx);
        t.grad(x) += gx;
    });
}

template <typename T>
void IGMLayerT<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".value_proj", &value_proj.weights, &value_proj_grad});
}

// ---------------------------------------------------------------------------
// HNM

template <typename T>
HNMLayerT<T>::HNMLayerT(std::size_t channels, std::uint64_t seed) {
    if (channels % 2 != 0) fail("hnm: channel count must be even");
    cs = CSLayerT<T>(channels / 2);
    nsm = NSMLayerT<T>(channels / 2, seed);
}

template <typename T>
TensorT<T> HNMLayerT<T>::forward(const TensorT<T>& x) const {
    check_channels(x, channels(), "hnm");
    auto [x1, x2] = channel_split(x);
    return channel_concat(cs.forward(x1), nsm.forward(x2));
}

template <typename T>
typename TapeT<T>::NodeId HNMLayerT<T>::forward(TapeT<T>& tape, typename TapeT<T>::NodeId x) {
    TensorT<T> y = forward(tape.value(x));
    return tape.push(std::move(y), [this, x](TapeT<T>& t, typename TapeT<T>::NodeId self) {
        auto [x1, x2] = channel_split(t.value(x));
        auto [g1, g2] = channel_split(t.grad(self));
        TensorT<T> gx1, gx2;
        cs.backward(x1, g1, &gx1);
        nsm.backward(x2, g2, &gx2);
        t.grad(x) += channel_concat(gx1, gx2);
    });
}

template <typename T>
void HNMLayerT<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    cs.collect_params(prefix + ".cs", out);
    nsm.collect_params(prefix + ".nsm", out);
}

// ---------------------------------------------------------------------------
// LayerNorm (ablation only)

template <typename T>
LayerNormT<T>::LayerNormT(std::size_t channels)
    : gamma(TensorT<T>::full(1, channels, 1, 1, T(1))),
      beta(1, channels, 1, 1),
      gamma_grad(1, channels, 1, 1),
      beta_grad(1, channels, 1, 1) {}

template <typename T>
TensorT<T> LayerNormT<T>::forward(const TensorT<T>& x) const {
    check_channels(x, channels(), "layer_norm");
    TensorT<T> u = normalize_tokens(x, tau, static_cast<TokenStatsT<T>*>(nullptr));
    const std::size_t c = x.c(), plane = x.h() * x.w();
    for (std::size_t img = 0; img < x.n(); ++img)
        for (std::size_t ch = 0; ch < c; ++ch) {
            T* p = u.data() + (img * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) p[i] = gamma[ch] * p[i] + beta[ch];
        }
    return u;
}

template <typename T>
void LayerNormT<T>::backward(const TensorT<T>& x, const TensorT<T>& grad_out, TensorT<T>* grad_x) {
    require_same_shape(x, grad_out, "layer_norm backward");
    TokenStatsT<T> stats;
    TensorT<T> u = normalize_tokens(x, tau, &stats);
    const std::size_t c = x.c(), plane = x.h() * x.w();
    TensorT<T> h = TensorT<T>::zeros_like(x);
    for (std::size_t img = 0; img < x.n(); ++img)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (img * c + ch) * plane;
            T acc_g = T(0), acc_b = T(0);
            for (std::size_t i = 0; i < plane; ++i) {
                acc_g += grad_out[base + i] * u[base + i];
                acc_b += grad_out[base + i];
                h[base + i] = grad_out[base + i] * gamma[ch];
            }
            gamma_grad[ch] += acc_g;
            beta_grad[ch] += acc_b;
        }
    if (grad_x) {
        if (!grad_x->same_shape(x)) *grad_x = TensorT<T>::zeros_like(x);
        normalize_tokens_backward(u, stats, tau, h, grad_x);
    }
}

template <typename T>
typename TapeT<T>::NodeId LayerNormT<T>::forward(TapeT<T>& tape, typename TapeT<T>::NodeId x) {
    TensorT<T> y = forward(tape.value(x));
    return tape.push(std::move(y), [this, x](TapeT<T>& t, typename TapeT<T>::NodeId self) {
        TensorT<T> gx;
        backward(t.value(x), t.grad(self), &gx);
        t.grad(x) += gx;
    });
}

template <typename T>
void LayerNormT<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".gamma", &gamma, &gamma_grad});
    out.push_back({prefix + ".beta", &beta, &beta_grad});
}

// ---------------------------------------------------------------------------
// Pointwise activations

template <typename T>
TensorT<T> elu(const TensorT<T>& x) {
    TensorT<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < T(0)) y[i] = std::expm1(y[i]);
    }
    return y;
}

template <typename T>
TensorT<T> elu_backward(const TensorT<T>& x, const TensorT<T>& grad_out) {
    require_same_shape(x, grad_out, "elu_backward");
    TensorT<T> gx = grad_out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= T(0)) gx[i] *= std::exp(x[i]);
    }
    return gx;
}

template <typename T>
TensorT<T> gelu(const TensorT<T>& x) {
    TensorT<T> y = x;
    const T inv_sqrt2 = T(0.70710678118654752440);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * inv_sqrt2));
    }
    return y;
}

template <typename T>
TensorT<T> gelu_backward(const TensorT<T>& x, const TensorT<T>& grad_out) {
    require_same_shape(x, grad_out, "gelu_backward");
    TensorT<T> gx = grad_out;
    const T inv_sqrt2 = T(0.70710678118654752440);
    const T inv_sqrt2pi = T(0.39894228040143267794);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T cdf = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
        const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x[i] * x[i]);
        gx[i] *= cdf + x[i] * pdf;
    }
    return gx;
}

// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> residual_block(const TensorT<T>& x, const ConvKernelT<T>& conv1,
                          const ConvKernelT<T>& conv2) {
    if (conv1.out_channels() != conv2.in_channels() || conv2.out_channels() != x.c()) {
        fail("residual_block: kernels must preserve the channel count");
    }
    const std::size_t p1 = (conv1.kh() - 1) / 2, p2 = (conv2.kh() - 1) / 2;
    return conv2d(relu(conv2d(x, conv1, 1, p1)), conv2, 1, p2) + x;
}

template <typename T>
TensorT<T> centralize(const TensorT<T>& image) {
    TensorT<T> y = image;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= T(0.5);
    return y;
}

template <typename T>
TensorT<T> decentralize(const TensorT<T>& core_output) {
    TensorT<T> y = core_output;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += T(0.5);
    return y;
}

#define SEVKIT_INSTANTIATE_MODULES(T)                                                          \
    template struct CSLayerT<T>;                                                               \
    template struct NSMLayerT<T>;                                                              \
    template struct IGMLayerT<T>;                                                              \
    template struct HNMLayerT<T>;                                                              \
    template struct LayerNormT<T>;                                                             \
    template TensorT<T> elu<T>(const TensorT<T>&);                                             \
    template TensorT<T> elu_backward<T>(const TensorT<T>&, const TensorT<T>&);                 \
    template TensorT<T> gelu<T>(const TensorT<T>&);                                            \
    template TensorT<T> gelu_backward<T>(const TensorT<T>&, const TensorT<T>&);                \
    template TensorT<T> residual_block<T>(const TensorT<T>&, const ConvKernelT<T>&,            \
                                          const ConvKernelT<T>&);                              \
    template TensorT<T> centralize<T>(const TensorT<T>&);                                      \
    template TensorT<T> decentralize<T>(const TensorT<T>&);

SEVKIT_INSTANTIATE_MODULES(float)
SEVKIT_INSTANTIATE_MODULES(double)

#undef SEVKIT_INSTANTIATE_MODULES

}  // namespace sevkit
