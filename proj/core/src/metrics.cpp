#include "sevkit/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace sevkit::metrics {

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = 5;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_taps() {
    static const std::vector<double> taps = [] {
        std::vector<double> t(kWindow);
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - kRadius;
            t[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += t[i];
        }
        for (auto& v : t) v /= sum;
        return t;
    }();
    return taps;
}

// Horizontal then vertical pass of the normalized 11-tap kernel; valid
// region only, output (h-10) x (w-10).
void filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                  std::vector<double>& tmp, std::vector<double>& dst) {
    const auto& taps = gaussian_taps();
    const std::size_t ow = w - 2 * kRadius;
    const std::size_t oh = h - 2 * kRadius;
    tmp.assign(h * ow, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += taps[k] * src[y * w + x + k];
            tmp[y * ow + x] = acc;
        }
    dst.assign(oh * ow, 0.0);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += taps[k] * tmp[(y + k) * ow + x];
            dst[y * ow + x] = acc;
        }
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "psnr");
    if (a.empty()) throw std::invalid_argument("psnr: empty tensors");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "ssim");
    if (a.h() < kWindow || a.w() < kWindow) {
        throw std::invalid_argument("ssim: image " + shape_string(a.shape()) +
                                    " smaller than the 11x11 window");
    }
    const std::size_t h = a.h(), w = a.w(), plane = h * w;
    std::vector<double> pa(plane), pb(plane), paa(plane), pbb(plane), pab(plane);
    std::vector<double> tmp, mu_a, mu_b, m_aa, m_bb, m_ab;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t img = 0; img < a.n(); ++img) {
        for (std::size_t ch = 0; ch < a.c(); ++ch) {
            const float* ap = a.data() + (img * a.c() + ch) * plane;
            const float* bp = b.data() + (img * a.c() + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                pa[i] = ap[i];
                pb[i] = bp[i];
                paa[i] = pa[i] * pa[i];
                pbb[i] = pb[i] * pb[i];
                pab[i] = pa[i] * pb[i];
            }
            filter_valid(pa, h, w, tmp, mu_a);
            filter_valid(pb, h, w, tmp, mu_b);
            filter_valid(paa, h, w, tmp, m_aa);
            filter_valid(pbb, h, w, tmp, m_bb);
            filter_valid(pab, h, w, tmp, m_ab);
            for (std::size_t i = 0; i < mu_a.size(); ++i) {
                const double ma = mu_a[i], mb = mu_b[i];
                const double va = m_aa[i] - ma * ma;
                const double vb = m_bb[i] - mb * mb;
                const double cov = m_ab[i] - ma * mb;
                const double num = (2.0 * ma * mb + kC1) * (2.0 * cov + kC2);
                const double den = (ma * ma + mb * mb + kC1) * (va + vb + kC2);
                total += num / den;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

double feature_cosine(const Tensor& fa, const Tensor& fb) {
    require_same_shape(fa, fb, "feature_cosine");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        dot += static_cast<double>(fa[i]) * static_cast<double>(fb[i]);
        na += static_cast<double>(fa[i]) * static_cast<double>(fa[i]);
        nb += static_cast<double>(fb[i]) * static_cast<double>(fb[i]);
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double MetricReport::mean_psnr() const {
    if (rows.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& r : rows) acc += r.mean_psnr;
    return acc / static_cast<double>(rows.size());
}

std::string MetricReport::to_csv() const {
    std::ostringstream os;
    os << "image_id,noise_spec,psnr,ssim\n";
    char buf[64];
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.psnr_per_image.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.6f", r.psnr_per_image[i]);
            os << i << ",\"" << r.noise_desc << "\"," << buf << ",";
            std::snprintf(buf, sizeof(buf), "%.6f", r.ssim_per_image[i]);
            os << buf << "\n";
        }
    }
    return os.str();
}

std::string MetricReport::to_table() const {
    std::ostringstream os;
    os << "row                              psnr     ssim    clipped\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-30s %8.3f %8.4f %8.4f\n", r.label.c_str(), r.mean_psnr,
                      r.mean_ssim, r.clipped_fraction);
        os << buf;
    }
    return os.str();
}

}  // namespace sevkit::metrics
