#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sevkit/tensor.hpp"

namespace sevkit::noise {

enum class Family { gaussian, speckle, poisson, mixture, speckle_variant };
enum class BaseDist { gaussian, laplace };
enum class VariantKind { sincos, peaks, gauss_kernels };

std::string to_string(Family v);
std::string to_string(BaseDist v);
std::string to_string(VariantKind v);

/// One degradation recipe. Images live in [0,1]; sigma/alpha/phi are
/// 8-bit-referenced and divided by 255 on application.
struct NoiseSpec {
    Family family = Family::gaussian;
    double sigma = 20.0;   // gaussian/speckle/mixture level
    double alpha = 6.0;    // poisson/mixture scale
    BaseDist base_dist = BaseDist::gaussian;
    VariantKind variant_kind = VariantKind::sincos;
    std::uint64_t seed = 1;

    void validate() const;
    std::string to_text() const;
    static NoiseSpec from_text(const std::string& text);
    /// Short one-line description for tables and manifests.
    std::string describe() const;
};

/// Per-pixel noise-level field, shape (1,1,h,w), strictly positive, affinely
/// rescaled so min and max hit the declared range exactly.
struct LevelMap {
    Tensor phi;
    double declared_min = 60.0;
    double declared_max = 120.0;
};

// Every generator clips to [0,1] exactly once, at the end; the clipped pixel
// fraction is reported through the optional out-param. Identical
// (inputs, seed) pairs produce byte-identical outputs.

/// Y = clip(X + (sigma/255) * N), N iid standard normal.
Tensor gaussian(const Tensor& clean, double sigma, std::uint64_t seed,
                double* clipped_fraction = nullptr);

/// Y = clip(X + (sigma/255) * sqrt(X) .* B), B standard normal or
/// unit-variance Laplace.
Tensor speckle(const Tensor& clean, double sigma, BaseDist base_dist, std::uint64_t seed,
               double* clipped_fraction = nullptr);

/// Shot-noise component N_p = Pois(255*X)/255 - X (zero mean, variance X/255
/// per pixel); Y = clip(X + alpha * N_p).
Tensor poisson(const Tensor& clean, double alpha, std::uint64_t seed,
               double* clipped_fraction = nullptr);

/// Independent speckle and Poisson components, one final clip.
Tensor mixture(const Tensor& clean, double sigma, double alpha, std::uint64_t seed,
               double* clipped_fraction = nullptr);

/// Smooth positive field rescaled so min = 60 and max = 120 exactly.
/// sincos: sin(2*pi*i/h) * cos(2*pi*j/w).
/// peaks: the classic three-term Gaussian-mixture surface on [-3,3]^2.
/// gauss_kernels: sum of 4 seeded random isotropic Gaussian bumps.
LevelMap make_level_map(VariantKind kind, std::size_t h, std::size_t w, std::uint64_t seed);

/// Y = clip(X + (phi/255) .* sqrt(X) .* B), phi broadcast over batch/channels.
Tensor speckle_variant(const Tensor& clean, const LevelMap& level_map, BaseDist base_dist,
                       std::uint64_t seed, double* clipped_fraction = nullptr);

// Additive components before the final clip, for distributional analysis:
// speckle(...) == clip(clean + speckle_term(...)) for the same seed, and
// likewise for the Poisson family. Per-pixel targets: Var(speckle_term) =
// (phi/255)^2 * X, Var(alpha * N_p) = alpha^2 * X / 255.
Tensor speckle_term(const Tensor& clean, const Tensor& phi, BaseDist base_dist,
                    std::uint64_t seed);
Tensor poisson_term(const Tensor& clean, double alpha, std::uint64_t seed);

/// Dispatch on spec.family.
Tensor apply(const Tensor& clean, const NoiseSpec& spec, double* clipped_fraction = nullptr);

/// Training degradation: per-image sigma drawn uniformly from
/// [sigma_min, sigma_max], Gaussian noise applied.
std::vector<Tensor> training_sampler(const std::vector<Tensor>& clean_batch, std::uint64_t seed,
                                     double sigma_min = 5.0, double sigma_max = 20.0,
                                     std::vector<double>* sigmas_out = nullptr);

}  // namespace sevkit::noise
