#include "sevkit/ops.hpp"

#include <Eigen/Core>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sevkit/rng.hpp"

namespace sevkit {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using MapCM = Eigen::Map<const MatRM<T>>;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

template <typename T>
void check_conv_args(const TensorT<T>& input, const ConvKernelT<T>& kernel) {
    if (kernel.in_channels() != input.c()) {
        std::ostringstream os;
        os << "conv2d: kernel expects " << kernel.in_channels() << " input channels, got tensor "
           << shape_string(input.shape());
        fail(os.str());
    }
    if (!kernel.bias.empty() && kernel.bias.size() != kernel.out_channels()) {
        fail("conv2d: bias length does not match out_channels");
    }
}

// Gather the padded receptive fields of one image into a (c*kh*kw) x (oh*ow)
// matrix, row-major in `col`.
template <typename T>
void im2col(const TensorT<T>& x, std::size_t img, std::size_t kh, std::size_t kw,
            std::size_t stride, std::size_t padding, std::size_t oh, std::size_t ow, T* col) {
    const std::size_t c = x.c(), h = x.h(), w = x.w();
    const std::size_t plane = oh * ow;
    for (std::size_t ic = 0; ic < c; ++ic) {
        for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj) {
                T* row = col + ((ic * kh + ki) * kw + kj) * plane;
                for (std::size_t oi = 0; oi < oh; ++oi) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oi * stride + ki) - static_cast<std::ptrdiff_t>(padding);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                        for (std::size_t oj = 0; oj < ow; ++oj) row[oi * ow + oj] = T(0);
                        continue;
                    }
                    const T* src = x.data() + ((img * c + ic) * h + static_cast<std::size_t>(iy)) * w;
                    for (std::size_t oj = 0; oj < ow; ++oj) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(oj * stride + kj) - static_cast<std::ptrdiff_t>(padding);
                        row[oi * ow + oj] =
                            (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Scatter-add of the column matrix back onto the input layout; adjoint of im2col.
template <typename T>
void col2im_add(const T* col, std::size_t img, std::size_t kh, std::size_t kw, std::size_t stride,
                std::size_t padding, std::size_t oh, std::size_t ow, TensorT<T>& gx) {
    const std::size_t c = gx.c(), h = gx.h(), w = gx.w();
    const std::size_t plane = oh * ow;
    for (std::size_t ic = 0; ic < c; ++ic) {
        for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj) {
                const T* row = col + ((ic * kh + ki) * kw + kj) * plane;
                for (std::size_t oi = 0; oi < oh; ++oi) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oi * stride + ki) - static_cast<std::ptrdiff_t>(padding);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    T* dst = gx.data() + ((img * c + ic) * h + static_cast<std::size_t>(iy)) * w;
                    for (std::size_t oj = 0; oj < ow; ++oj) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(oj * stride + kj) - static_cast<std::ptrdiff_t>(padding);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) {
                            dst[ix] += row[oi * ow + oj];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
std::pair<std::size_t, std::size_t> conv_output_dims(const TensorT<T>& input,
                                                     const ConvKernelT<T>& kernel,
                                                     std::size_t stride, std::size_t padding) {
    const std::size_t h = input.h() + 2 * padding;
    const std::size_t w = input.w() + 2 * padding;
    if (h < kernel.kh() || w < kernel.kw()) {
        fail("conv2d: input " + shape_string(input.shape()) + " smaller than kernel window");
    }
    return {(h - kernel.kh()) / stride + 1, (w - kernel.kw()) / stride + 1};
}

}  // namespace

template <typename T>
ConvKernelT<T>::ConvKernelT(std::size_t oc, std::size_t ic, std::size_t kh, std::size_t kw)
    : weights(oc, ic, kh, kw) {
    if (!((kh == 1 && kw == 1) || (kh == 3 && kw == 3))) {
        fail("ConvKernel: only 1x1 and 3x3 kernels are supported");
    }
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const ConvKernelT<T>& kernel, std::size_t stride,
                  std::size_t padding) {
    check_conv_args(input, kernel);
    const auto [oh, ow] = conv_output_dims(input, kernel, stride, padding);
    const std::size_t oc = kernel.out_channels();
    const std::size_t K = kernel.in_channels() * kernel.kh() * kernel.kw();
    const std::size_t plane = oh * ow;

    TensorT<T> out(input.n(), oc, oh, ow);
    std::vector<T> col(K * plane);
    MapCM<T> wmat(kernel.weights.data(), static_cast<Eigen::Index>(oc), static_cast<Eigen::Index>(K));
    for (std::size_t img = 0; img < input.n(); ++img) {
        im2col(input, img, kernel.kh(), kernel.kw(), stride, padding, oh, ow, col.data());
        MapCM<T> cmat(col.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(plane));
        MapM<T> omat(out.data() + img * oc * plane, static_cast<Eigen::Index>(oc),
                     static_cast<Eigen::Index>(plane));
        omat.noalias() = wmat * cmat;
    }
    if (!kernel.bias.empty()) {
        for (std::size_t img = 0; img < out.n(); ++img)
            for (std::size_t ch = 0; ch < oc; ++ch) {
                T* p = out.data() + (img * oc + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) p[i] += kernel.bias[ch];
            }
    }
    return out;
}

template <typename T>
void conv2d_backward(const TensorT<T>& input, const ConvKernelT<T>& kernel, std::size_t stride,
                     std::size_t padding, const TensorT<T>& grad_out, TensorT<T>* grad_input,
                     TensorT<T>* grad_weights) {
    check_conv_args(input, kernel);
    const auto [oh, ow] = conv_output_dims(input, kernel, stride, padding);
    const std::size_t oc = kernel.out_channels();
    const std::size_t K = kernel.in_channels() * kernel.kh() * kernel.kw();
    const std::size_t plane = oh * ow;
    if (grad_out.n() != input.n() || grad_out.c() != oc || grad_out.h() != oh || grad_out.w() != ow) {
        fail("conv2d_backward: grad_out shape " + shape_string(grad_out.shape()) +
             " does not match forward output");
    }
    if (grad_input && !grad_input->same_shape(input)) *grad_input = TensorT<T>::zeros_like(input);
    if (grad_weights && !grad_weights->same_shape(kernel.weights)) {
        *grad_weights = TensorT<T>::zeros_like(kernel.weights);
    }

    std::vector<T> col(K * plane);
    std::vector<T> gcol(K * plane);
    MapCM<T> wmat(kernel.weights.data(), static_cast<Eigen::Index>(oc), static_cast<Eigen::Index>(K));
    for (std::size_t img = 0; img < input.n(); ++img) {
        MapCM<T> gout(grad_out.data() + img * oc * plane, static_cast<Eigen::Index>(oc),
                      static_cast<Eigen::Index>(plane));
        if (grad_weights) {
            im2col(input, img, kernel.kh(), kernel.kw(), stride, padding, oh, ow, col.data());
            MapCM<T> cmat(col.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(plane));
            MapM<T> gw(grad_weights->data(), static_cast<Eigen::Index>(oc), static_cast<Eigen::Index>(K));
            gw.noalias() += gout * cmat.transpose();
        }
        if (grad_input) {
            MapM<T> gc(gcol.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(plane));
            gc.noalias() = wmat.transpose() * gout;
            col2im_add(gcol.data(), img, kernel.kh(), kernel.kw(), stride, padding, oh, ow, *grad_input);
        }
    }
}

template <typename T>
TensorT<T> relu(const TensorT<T>& input) {
    TensorT<T> out = input;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] < T(0)) out[i] = T(0);
    }
    return out;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& input, const TensorT<T>& grad_out) {
    require_same_shape(input, grad_out, "relu_backward");
    TensorT<T> gx = TensorT<T>::zeros_like(input);
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (input[i] > T(0)) gx[i] = grad_out[i];
    }
    return gx;
}

template <typename T>
TokenStatsT<T> token_stats(const TensorT<T>& input) {
    if (input.c() == 0) fail("token_stats: channel count must be >= 1");
    const std::size_t n = input.n(), c = input.c(), plane = input.h() * input.w();
    TokenStatsT<T> st{TensorT<T>(n, 1, input.h(), input.w()), TensorT<T>(n, 1, input.h(), input.w())};
    const T inv_c = T(1) / static_cast<T>(c);
    for (std::size_t img = 0; img < n; ++img) {
        for (std::size_t p = 0; p < plane; ++p) {
            T mean = T(0);
            for (std::size_t ch = 0; ch < c; ++ch) mean += input[(img * c + ch) * plane + p];
            mean *= inv_c;
            T var = T(0);
            for (std::size_t ch = 0; ch < c; ++ch) {
                T d = input[(img * c + ch) * plane + p] - mean;
                var += d * d;
            }
            st.mean[img * plane + p] = mean;
            st.variance[img * plane + p] = var * inv_c;
        }
    }
    return st;
}

template <typename T>
void token_stats_backward(const TensorT<T>& input, const TensorT<T>& grad_mean,
                          const TensorT<T>& grad_variance, TensorT<T>* grad_input) {
    const std::size_t n = input.n(), c = input.c(), plane = input.h() * input.w();
    if (grad_mean.n() != n || grad_mean.c() != 1 || grad_mean.h() != input.h() ||
        grad_mean.w() != input.w()) {
        fail("token_stats_backward: grad_mean shape mismatch");
    }
    require_same_shape(grad_mean, grad_variance, "token_stats_backward");
    if (!grad_input->same_shape(input)) *grad_input = TensorT<T>::zeros_like(input);
    const T inv_c = T(1) / static_cast<T>(c);
    for (std::size_t img = 0; img < n; ++img) {
        for (std::size_t p = 0; p < plane; ++p) {
            T mean = T(0);
            for (std::size_t ch = 0; ch < c; ++ch) mean += input[(img * c + ch) * plane + p];
            mean *= inv_c;
            const T gm = grad_mean[img * plane + p] * inv_c;
            const T gv = grad_variance[img * plane + p];
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t idx = (img * c + ch) * plane + p;
                (*grad_input)[idx] += gm + gv * T(2) * inv_c * (input[idx] - mean);
            }
        }
    }
}

template <typename T>
std::pair<TensorT<T>, TensorT<T>> channel_split(const TensorT<T>& input) {
    if (input.c() % 2 != 0) {
        fail("channel_split: channel count must be even, got " + shape_string(input.shape()));
    }
    const std::size_t half = input.c() / 2;
    const std::size_t plane = input.h() * input.w();
    TensorT<T> a(input.n(), half, input.h(), input.w());
    TensorT<T> b(input.n(), half, input.h(), input.w());
    for (std::size_t img = 0; img < input.n(); ++img) {
        for (std::size_t ch = 0; ch < half; ++ch) {
            const T* lo = input.data() + (img * input.c() + ch) * plane;
            const T* hi = input.data() + (img * input.c() + half + ch) * plane;
            T* pa = a.data() + (img * half + ch) * plane;
            T* pb = b.data() + (img * half + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                pa[i] = lo[i];
                pb[i] = hi[i];
            }
        }
    }
    return {std::move(a), std::move(b)};
}

template <typename T>
TensorT<T> channel_concat(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
        fail("channel_concat: spatial/batch mismatch " + shape_string(a.shape()) + " vs " +
             shape_string(b.shape()));
    }
    const std::size_t plane = a.h() * a.w();
    TensorT<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
    for (std::size_t img = 0; img < a.n(); ++img) {
        for (std::size_t ch = 0; ch < a.c(); ++ch) {
            const T* src = a.data() + (img * a.c() + ch) * plane;
            T* dst = out.data() + (img * out.c() + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i];
        }
        for (std::size_t ch = 0; ch < b.c(); ++ch) {
            const T* src = b.data() + (img * b.c() + ch) * plane;
            T* dst = out.data() + (img * out.c() + a.c() + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i];
        }
    }
    return out;
}

template <typename T>
TensorT<T> depth_to_space(const TensorT<T>& input, std::size_t r) {
    if (r == 0 || input.c() % (r * r) != 0) {
        fail("depth_to_space: channels " + shape_string(input.shape()) +
             " not divisible by block size squared");
    }
    const std::size_t oc = input.c() / (r * r);
    TensorT<T> out(input.n(), oc, input.h() * r, input.w() * r);
    for (std::size_t img = 0; img < input.n(); ++img)
        for (std::size_t ch = 0; ch < oc; ++ch)
            for (std::size_t di = 0; di < r; ++di)
                for (std::size_t dj = 0; dj < r; ++dj) {
                    const std::size_t ic = ch * r * r + di * r + dj;
                    for (std::size_t y = 0; y < input.h(); ++y)
                        for (std::size_t x = 0; x < input.w(); ++x) {
                            out.at(img, ch, y * r + di, x * r + dj) = input.at(img, ic, y, x);
                        }
                }
    return out;
}

template <typename T>
TensorT<T> space_to_depth(const TensorT<T>& input, std::size_t r) {
    if (r == 0 || input.h() % r != 0 || input.w() % r != 0) {
        fail("space_to_depth: spatial dims " + shape_string(input.shape()) +
             " not divisible by block size");
    }
    TensorT<T> out(input.n(), input.c() * r * r, input.h() / r, input.w() / r);
    for (std::size_t img = 0; img < input.n(); ++img)
        for (std::size_t ch = 0; ch < input.c(); ++ch)
            for (std::size_t di = 0; di < r; ++di)
                for (std::size_t dj = 0; dj < r; ++dj) {
                    const std::size_t oc = ch * r * r + di * r + dj;
                    for (std::size_t y = 0; y < out.h(); ++y)
                        for (std::size_t x = 0; x < out.w(); ++x) {
                            out.at(img, oc, y, x) = input.at(img, ch, y * r + di, x * r + dj);
                        }
                }
    return out;
}

template <typename T>
TensorT<T> downsample(const TensorT<T>& input, const ConvKernelT<T>& kernel) {
    if (input.h() % 2 != 0 || input.w() % 2 != 0) {
        fail("downsample: spatial dims must be even, got " + shape_string(input.shape()));
    }
    if (kernel.kh() != 3 || kernel.out_channels() != 2 * input.c()) {
        fail("downsample: expects a 3x3 kernel with 2x input channels out");
    }
    return conv2d(input, kernel, 2, 1);
}

template <typename T>
TensorT<T> upsample(const TensorT<T>& input, const ConvKernelT<T>& kernel) {
    if (input.c() % 2 != 0) {
        fail("upsample: channel count must be even, got " + shape_string(input.shape()));
    }
    if (kernel.kh() != 1 || kernel.out_channels() != 2 * input.c()) {
        fail("upsample: expects a 1x1 kernel with 2x input channels out");
    }
    return depth_to_space(conv2d(input, kernel, 1, 0), 2);
}

template <typename T>
void kaiming_init(ConvKernelT<T>& kernel, std::uint64_t seed) {
    Rng rng(seed);
    const double fan_in = static_cast<double>(kernel.in_channels() * kernel.kh() * kernel.kw());
    const double stddev = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < kernel.weights.size(); ++i) {
        kernel.weights[i] = static_cast<T>(stddev * rng.normal());
    }
}

#define SEVKIT_INSTANTIATE_OPS(T)                                                                  \
    template struct ConvKernelT<T>;                                                               \
    template TensorT<T> conv2d<T>(const TensorT<T>&, const ConvKernelT<T>&, std::size_t,          \
                                  std::size_t);                                                   \
    template void conv2d_backward<T>(const TensorT<T>&, const ConvKernelT<T>&, std::size_t,       \
                                     std::size_t, const TensorT<T>&, TensorT<T>*, TensorT<T>*);   \
    template TensorT<T> relu<T>(const TensorT<T>&);                                               \
    template TensorT<T> relu_backward<T>(const TensorT<T>&, const TensorT<T>&);                   \
    template TokenStatsT<T> token_stats<T>(const TensorT<T>&);                                    \
    template void token_stats_backward<T>(const TensorT<T>&, const TensorT<T>&,                   \
                                          const TensorT<T>&, TensorT<T>*);                        \
    template std::pair<TensorT<T>, TensorT<T>> channel_split<T>(const TensorT<T>&);               \
    template TensorT<T> channel_concat<T>(const TensorT<T>&, const TensorT<T>&);                  \
    template TensorT<T> depth_to_space<T>(const TensorT<T>&, std::size_t);                        \
    template TensorT<T> space_to_depth<T>(const TensorT<T>&, std::size_t);                        \
    template TensorT<T> downsample<T>(const TensorT<T>&, const ConvKernelT<T>&);                  \
    template TensorT<T> upsample<T>(const TensorT<T>&, const ConvKernelT<T>&);                    \
    template void kaiming_init<T>(ConvKernelT<T>&, std::uint64_t);

SEVKIT_INSTANTIATE_OPS(float)
SEVKIT_INSTANTIATE_OPS(double)

#undef SEVKIT_INSTANTIATE_OPS

}  // namespace sevkit
