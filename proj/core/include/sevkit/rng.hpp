#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sevkit {

// splitmix64 step; used to derive independent seed streams from one root seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic sub-seed for stream `stream` of root seed `seed`.
// Same (seed, stream) pair always yields the same value, on every platform.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0x632be59bd9b4e019ull + stream * 0x9e3779b97f4a7c15ull);
    splitmix64(s);
    return splitmix64(s);
}

// Seeded generator with explicit samplers. The std:: distribution objects are
// implementation-defined, so everything here maps mt19937 draws itself to keep
// outputs identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

    std::uint32_t next_u32() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() { return (static_cast<double>(gen_()) + 0.5) * (1.0 / 4294967296.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    std::uint32_t below(std::uint32_t n) {
        return static_cast<std::uint32_t>(uniform() * static_cast<double>(n));
    }

    // Standard normal via Box-Muller; one spare value is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));  // u1 in [0,1) so 1-u1 in (0,1]
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Unit-variance Laplace (scale b = 1/sqrt(2)) by inverse CDF.
    double laplace_unit() {
        double u = uniform() - 0.5;
        double b = 0.70710678118654752440;
        return (u < 0.0 ? b : -b) * std::log1p(-2.0 * std::abs(u));
    }

    // Exact Poisson sample. Knuth's product method for small means, Hormann's
    // PTRS transformed rejection for large ones.
    std::uint32_t poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda < 10.0) return poisson_knuth(lambda);
        return poisson_ptrs(lambda);
    }

private:
    std::uint32_t poisson_knuth(double lambda) {
        double limit = std::exp(-lambda);
        double p = 1.0;
        std::uint32_t k = 0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    std::uint32_t poisson_ptrs(double lambda) {
        const double slam = std::sqrt(lambda);
        const double loglam = std::log(lambda);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            double u = uniform() - 0.5;
            double v = uniform();
            double us = 0.5 - std::abs(u);
            double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<std::uint32_t>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                kf * loglam - lambda - std::lgamma(kf + 1.0)) {
                return static_cast<std::uint32_t>(kf);
            }
        }
    }

    std::mt19937 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace sevkit
