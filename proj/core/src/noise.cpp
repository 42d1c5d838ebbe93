#include "sevkit/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "sevkit/config.hpp"
#include "sevkit/rng.hpp"

namespace sevkit::noise {

namespace {

constexpr std::uint64_t kSpeckleStream = 0x53504b4c;  // distinct per-component streams
constexpr std::uint64_t kPoissonStream = 0x504f4953;

double base_draw(Rng& rng, BaseDist dist) {
    return dist == BaseDist::gaussian ? rng.normal() : rng.laplace_unit();
}

Tensor clip_unit(Tensor y, double* clipped_fraction) {
    std::size_t clipped = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0.0f) {
            y[i] = 0.0f;
            ++clipped;
        } else if (y[i] > 1.0f) {
            y[i] = 1.0f;
            ++clipped;
        }
    }
    if (clipped_fraction) {
        *clipped_fraction = y.size() ? static_cast<double>(clipped) / y.size() : 0.0;
    }
    return y;
}

// Unclipped speckle term (phi/255)*sqrt(X)*B added in place.
void add_speckle_term(Tensor& y, const Tensor& clean, const Tensor& phi, BaseDist base_dist,
                      std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t plane = clean.h() * clean.w();
    for (std::size_t img = 0; img < clean.n(); ++img)
        for (std::size_t ch = 0; ch < clean.c(); ++ch)
            for (std::size_t p = 0; p < plane; ++p) {
                const std::size_t idx = (img * clean.c() + ch) * plane + p;
                const double level = static_cast<double>(phi[p]) / 255.0;
                const double b = base_draw(rng, base_dist);
                y[idx] += static_cast<float>(level * std::sqrt(static_cast<double>(clean[idx])) * b);
            }
}

void add_poisson_term(Tensor& y, const Tensor& clean, double alpha, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double x = static_cast<double>(clean[i]);
        const double np = static_cast<double>(rng.poisson(255.0 * x)) / 255.0 - x;
        y[i] += static_cast<float>(alpha * np);
    }
}

}  // namespace

std::string to_string(Family v) {
    switch (v) {
        case Family::gaussian: return "gaussian";
        case Family::speckle: return "speckle";
        case Family::poisson: return "poisson";
        case Family::mixture: return "mixture";
        case Family::speckle_variant: return "speckle_variant";
    }
    return "?";
}
std::string to_string(BaseDist v) { return v == BaseDist::gaussian ? "gaussian" : "laplace"; }
std::string to_string(VariantKind v) {
    switch (v) {
        case VariantKind::sincos: return "sincos";
        case VariantKind::peaks: return "peaks";
        case VariantKind::gauss_kernels: return "gauss_kernels";
    }
    return "?";
}

void NoiseSpec::validate() const {
    if (sigma < 0.0) throw std::invalid_argument("noise spec: sigma must be >= 0");
    if (alpha <= 0.0 && (family == Family::poisson || family == Family::mixture)) {
        throw std::invalid_argument("noise spec: alpha must be > 0");
    }
}

std::string NoiseSpec::to_text() const {
    KVConfig cfg;
    cfg.set("family", to_string(family));
    cfg.set_f64("sigma", sigma);
    cfg.set_f64("alpha", alpha);
    cfg.set("base_dist", to_string(base_dist));
    cfg.set("variant_kind", to_string(variant_kind));
    cfg.set_u64("seed", seed);
    return cfg.to_text();
}

NoiseSpec NoiseSpec::from_text(const std::string& text) {
    KVConfig cfg = KVConfig::parse(text);
    NoiseSpec s;
    if (auto v = cfg.get("family")) {
        if (*v == "gaussian") s.family = Family::gaussian;
        else if (*v == "speckle") s.family = Family::speckle;
        else if (*v == "poisson") s.family = Family::poisson;
        else if (*v == "mixture") s.family = Family::mixture;
        else if (*v == "speckle_variant") s.family = Family::speckle_variant;
        else throw std::invalid_argument("noise spec: unknown family '" + *v + "'");
    }
    if (cfg.has("sigma")) s.sigma = cfg.get_f64("sigma");
    if (cfg.has("alpha")) s.alpha = cfg.get_f64("alpha");
    if (auto v = cfg.get("base_dist")) {
        if (*v == "gaussian") s.base_dist = BaseDist::gaussian;
        else if (*v == "laplace") s.base_dist = BaseDist::laplace;
        else throw std::invalid_argument("noise spec: unknown base_dist '" + *v + "'");
    }
    if (auto v = cfg.get("variant_kind")) {
        if (*v == "sincos") s.variant_kind = VariantKind::sincos;
        else if (*v == "peaks") s.variant_kind = VariantKind::peaks;
        else if (*v == "gauss_kernels") s.variant_kind = VariantKind::gauss_kernels;
        else throw std::invalid_argument("noise spec: unknown variant_kind '" + *v + "'");
    }
    if (cfg.has("seed")) s.seed = cfg.get_u64("seed");
    s.validate();
    return s;
}

std::string NoiseSpec::describe() const {
    switch (family) {
        case Family::gaussian: return "gaussian sigma=" + std::to_string(sigma);
        case Family::speckle:
            return "speckle sigma=" + std::to_string(sigma) + " base=" + to_string(base_dist);
        case Family::poisson: return "poisson alpha=" + std::to_string(alpha);
        case Family::mixture:
            return "mixture sigma=" + std::to_string(sigma) + " alpha=" + std::to_string(alpha);
        case Family::speckle_variant:
            return "speckle_variant " + to_string(variant_kind) + " base=" + to_string(base_dist);
    }
    return "?";
}

Tensor gaussian(const Tensor& clean, double sigma, std::uint64_t seed, double* clipped_fraction) {
    Tensor y = clean;
    Rng rng(seed);
    const double level = sigma / 255.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] += static_cast<float>(level * rng.normal());
    }
    return clip_unit(std::move(y), clipped_fraction);
}

Tensor speckle(const Tensor& clean, double sigma, BaseDist base_dist, std::uint64_t seed,
               double* clipped_fraction) {
    // Shared kernel with the spatially-variant form: a constant level map
    // phi == sigma must reproduce this output for the same seed.
    LevelMap constant;
    constant.phi = Tensor::full(1, 1, clean.h(), clean.w(), static_cast<float>(sigma));
    constant.declared_min = constant.declared_max = sigma;
    return speckle_variant(clean, constant, base_dist, seed, clipped_fraction);
}

Tensor poisson(const Tensor& clean, double alpha, std::uint64_t seed, double* clipped_fraction) {
    Tensor y = clean;
    add_poisson_term(y, clean, alpha, seed);
    return clip_unit(std::move(y), clipped_fraction);
}

Tensor mixture(const Tensor& clean, double sigma, double alpha, std::uint64_t seed,
               double* clipped_fraction) {
    Tensor y = clean;
    Tensor phi = Tensor::full(1, 1, clean.h(), clean.w(), static_cast<float>(sigma));
    add_speckle_term(y, clean, phi, BaseDist::gaussian, derive_seed(seed, kSpeckleStream));
    add_poisson_term(y, clean, alpha, derive_seed(seed, kPoissonStream));
    return clip_unit(std::move(y), clipped_fraction);
}

LevelMap make_level_map(VariantKind kind, std::size_t h, std::size_t w, std::uint64_t seed) {
    if (h < 8 || w < 8) throw std::invalid_argument("level map: dims must be >= 8");
    Tensor f(1, 1, h, w);
    const double two_pi = 6.283185307179586476925286766559;
    switch (kind) {
        case VariantKind::sincos:
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    f.at(0, 0, i, j) = static_cast<float>(std::sin(two_pi * static_cast<double>(i) / h) *
                                                          std::cos(two_pi * static_cast<double>(j) / w));
                }
            break;
        case VariantKind::peaks:
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    const double y = -3.0 + 6.0 * static_cast<double>(i) / (h - 1);
                    const double x = -3.0 + 6.0 * static_cast<double>(j) / (w - 1);
                    const double z =
                        3.0 * (1.0 - x) * (1.0 - x) * std::exp(-x * x - (y + 1.0) * (y + 1.0)) -
                        10.0 * (x / 5.0 - x * x * x - std::pow(y, 5.0)) * std::exp(-x * x - y * y) -
                        (1.0 / 3.0) * std::exp(-(x + 1.0) * (x + 1.0) - y * y);
                    f.at(0, 0, i, j) = static_cast<float>(z);
                }
            break;
        case VariantKind::gauss_kernels: {
            Rng rng(seed);
            const double smin = static_cast<double>(std::min(h, w)) / 8.0;
            const double smax = static_cast<double>(std::min(h, w)) / 3.0;
            struct Bump {
                double ci, cj, inv_2s2, amp;
            };
            Bump bumps[4];
            for (auto& b : bumps) {
                b.ci = rng.uniform(0.0, static_cast<double>(h));
                b.cj = rng.uniform(0.0, static_cast<double>(w));
                const double s = rng.uniform(smin, smax);
                b.inv_2s2 = 1.0 / (2.0 * s * s);
                b.amp = rng.uniform(0.5, 1.5);
            }
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    double acc = 0.0;
                    for (const auto& b : bumps) {
                        const double di = static_cast<double>(i) - b.ci;
                        const double dj = static_cast<double>(j) - b.cj;
                        acc += b.amp * std::exp(-(di * di + dj * dj) * b.inv_2s2);
                    }
                    f.at(0, 0, i, j) = static_cast<float>(acc);
                }
            break;
        }
    }
    float lo = f[0], hi = f[0];
    for (std::size_t i = 0; i < f.size(); ++i) {
        lo = std::min(lo, f[i]);
        hi = std::max(hi, f[i]);
    }
    LevelMap map;
    map.phi = Tensor(1, 1, h, w);
    const float range = hi - lo;
    for (std::size_t i = 0; i < f.size(); ++i) {
        map.phi[i] = 60.0f + 60.0f * ((f[i] - lo) / range);
    }
    return map;
}

Tensor speckle_variant(const Tensor& clean, const LevelMap& level_map, BaseDist base_dist,
                       std::uint64_t seed, double* clipped_fraction) {
    const Tensor& phi = level_map.phi;
    if (phi.h() != clean.h() || phi.w() != clean.w()) {
        throw std::invalid_argument("speckle_variant: level map " + shape_string(phi.shape()) +
                                    " does not match image " + shape_string(clean.shape()));
    }
    Tensor y = clean;
    add_speckle_term(y, clean, phi, base_dist, seed);
    return clip_unit(std::move(y), clipped_fraction);
}

Tensor speckle_term(const Tensor& clean, const Tensor& phi, BaseDist base_dist,
                    std::uint64_t seed) {
    if (phi.h() != clean.h() || phi.w() != clean.w()) {
        throw std::invalid_argument("speckle_term: level map shape mismatch");
    }
    Tensor term = Tensor::zeros_like(clean);
    add_speckle_term(term, clean, phi, base_dist, seed);
    return term;
}

Tensor poisson_term(const Tensor& clean, double alpha, std::uint64_t seed) {
    Tensor term = Tensor::zeros_like(clean);
    add_poisson_term(term, clean, alpha, seed);
    return term;
}

Tensor apply(const Tensor& clean, const NoiseSpec& spec, double* clipped_fraction) {
    spec.validate();
    switch (spec.family) {
        case Family::gaussian: return gaussian(clean, spec.sigma, spec.seed, clipped_fraction);
        case Family::speckle:
            return speckle(clean, spec.sigma, spec.base_dist, spec.seed, clipped_fraction);
        case Family::poisson: return poisson(clean, spec.alpha, spec.seed, clipped_fraction);
        case Family::mixture:
            return mixture(clean, spec.sigma, spec.alpha, spec.seed, clipped_fraction);
        case Family::speckle_variant: {
            LevelMap map = make_level_map(spec.variant_kind, clean.h(), clean.w(),
                                          derive_seed(spec.seed, 0x4c4d4150));
            return speckle_variant(clean, map, spec.base_dist, spec.seed, clipped_fraction);
        }
    }
    throw std::invalid_argument("noise apply: unknown family");
}

std::vector<Tensor> training_sampler(const std::vector<Tensor>& clean_batch, std::uint64_t seed,
                                     double sigma_min, double sigma_max,
                                     std::vector<double>* sigmas_out) {
    std::vector<Tensor> out;
    out.reserve(clean_batch.size());
    Rng level_rng(derive_seed(seed, 0x5349474d));
    for (std::size_t i = 0; i < clean_batch.size(); ++i) {
        const double sigma = level_rng.uniform(sigma_min, sigma_max);
        if (sigmas_out) sigmas_out->push_back(sigma);
        out.push_back(gaussian(clean_batch[i], sigma, derive_seed(seed, i)));
    }
    return out;
}

}  // namespace sevkit::noise
