#include "sevkit/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "sevkit/rng.hpp"

namespace sevkit {

namespace {

// Separable box blur, repeated to approximate a Gaussian.
void blur(std::vector<double>& img, std::size_t h, std::size_t w, std::size_t radius,
          std::size_t passes) {
    std::vector<double> tmp(img.size());
    for (std::size_t pass = 0; pass < passes; ++pass) {
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double acc = 0.0;
                std::size_t cnt = 0;
                for (std::ptrdiff_t d = -static_cast<std::ptrdiff_t>(radius);
                     d <= static_cast<std::ptrdiff_t>(radius); ++d) {
                    const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) + d;
                    if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) {
                        acc += img[y * w + sx];
                        ++cnt;
                    }
                }
                tmp[y * w + x] = acc / cnt;
            }
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double acc = 0.0;
                std::size_t cnt = 0;
                for (std::ptrdiff_t d = -static_cast<std::ptrdiff_t>(radius);
                     d <= static_cast<std::ptrdiff_t>(radius); ++d) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + d;
                    if (sy >= 0 && sy < static_cast<std::ptrdiff_t>(h)) {
                        acc += tmp[sy * w + x];
                        ++cnt;
                    }
                }
                img[y * w + x] = acc / cnt;
            }
    }
}

}  // namespace

std::vector<Tensor> make_synthetic_corpus(std::size_t count, std::size_t h, std::size_t w,
                                          std::size_t channels, std::uint64_t seed) {
    std::vector<Tensor> corpus;
    corpus.reserve(count);
    for (std::size_t idx = 0; idx < count; ++idx) {
        Rng rng(derive_seed(seed, idx));
        Tensor img(1, channels, h, w);

        // Smooth base texture per channel, correlated across channels.
        std::vector<double> base(h * w);
        for (auto& v : base) v = rng.uniform();
        blur(base, h, w, 3 + rng.below(5), 2);
        double lo = base[0], hi = base[0];
        for (double v : base) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double range = std::max(1e-9, hi - lo);
        std::vector<double> tint(channels);
        for (auto& t : tint) t = rng.uniform(0.6, 1.0);
        for (std::size_t ch = 0; ch < channels; ++ch)
            for (std::size_t i = 0; i < h * w; ++i) {
                img[ch * h * w + i] = static_cast<float>(tint[ch] * (base[i] - lo) / range);
            }

        // A few flat shapes for hard edges.
        const std::size_t shapes = 2 + rng.below(4);
        for (std::size_t s = 0; s < shapes; ++s) {
            const bool circle = rng.uniform() < 0.5;
            const double cy = rng.uniform(0.0, static_cast<double>(h));
            const double cx = rng.uniform(0.0, static_cast<double>(w));
            const double r = rng.uniform(static_cast<double>(std::min(h, w)) / 10.0,
                                         static_cast<double>(std::min(h, w)) / 3.0);
            std::vector<double> color(channels);
            for (auto& cv : color) cv = rng.uniform();
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const double dy = y - cy, dx = x - cx;
                    const bool inside = circle ? (dy * dy + dx * dx < r * r)
                                               : (std::abs(dy) < r * 0.8 && std::abs(dx) < r);
                    if (!inside) continue;
                    for (std::size_t ch = 0; ch < channels; ++ch) {
                        img.at(0, ch, y, x) = static_cast<float>(color[ch]);
                    }
                }
        }

        // Optional grating layered on top.
        if (rng.uniform() < 0.6) {
            const double freq = rng.uniform(2.0, 9.0);
            const double angle = rng.uniform(0.0, 3.14159);
            const double amp = rng.uniform(0.05, 0.2);
            const double kx = std::cos(angle) * freq / w, ky = std::sin(angle) * freq / h;
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const double v = amp * std::sin(6.2831853 * (kx * x + ky * y));
                    for (std::size_t ch = 0; ch < channels; ++ch) {
                        img.at(0, ch, y, x) += static_cast<float>(v);
                    }
                }
        }

        for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.0f, 1.0f);
        corpus.push_back(std::move(img));
    }
    return corpus;
}

}  // namespace sevkit
