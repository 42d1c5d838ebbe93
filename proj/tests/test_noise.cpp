#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "oracles.hpp"
#include "sevkit/noise.hpp"
#include "sevkit/rng.hpp"

using namespace sevkit;
using namespace sevkit::noise;

TEST_CASE("gaussian sigma=0 is the identity") {
    Tensor x = oracles::random_image<float>(1, 3, 8, 8, 1);
    Tensor y = gaussian(x, 0.0, 42);
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0);
}

TEST_CASE("same spec and seed give byte-identical output") {
    Tensor x = oracles::random_image<float>(1, 3, 16, 16, 2);
    for (Family family : {Family::gaussian, Family::speckle, Family::poisson, Family::mixture,
                          Family::speckle_variant}) {
        NoiseSpec spec;
        spec.family = family;
        spec.sigma = 60;
        spec.alpha = 5;
        spec.seed = 77;
        Tensor a = apply(x, spec);
        Tensor b = apply(x, spec);
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
        spec.seed = 78;
        Tensor c = apply(x, spec);
        CHECK(std::memcmp(a.data(), c.data(), a.size() * sizeof(float)) != 0);
    }
}

TEST_CASE("signal-dependent families leave black pixels untouched") {
    Tensor zero(1, 1, 8, 8);
    for (Family family : {Family::speckle, Family::poisson, Family::mixture}) {
        NoiseSpec spec;
        spec.family = family;
        spec.sigma = 90;
        spec.alpha = 6;
        spec.seed = 5;
        Tensor y = apply(zero, spec);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0f);
    }
}

TEST_CASE("gaussian noise std matches sigma/255 (Monte-Carlo)") {
    const double sigma = 20.0;
    Tensor x = Tensor::full(1, 1, 512, 512, 0.5f);
    Rng rng(4);
    // measure the pre-clip residual: x = 0.5 keeps clipping negligible
    Tensor y = gaussian(x, sigma, 9);
    std::vector<double> noise;
    noise.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) noise.push_back(y[i] - 0.5f);
    auto m = oracles::sample_moments(noise);
    const double want = sigma / 255.0;
    CHECK(std::sqrt(m.variance) == doctest::Approx(want).epsilon(0.01));
    CHECK(std::abs(m.mean) < 5e-4);
}

TEST_CASE("speckle per-pixel std tracks (sigma/255)*sqrt(X)") {
    // Component statistics are measured pre-clip; the public op is the
    // clipped sum of the same term (checked below bit-exactly).
    const double sigma = 60.0;
    for (float level : {0.25f, 0.75f}) {
        Tensor x = Tensor::full(1, 1, 512, 512, level);
        Tensor phi = Tensor::full(1, 1, 512, 512, static_cast<float>(sigma));
        Tensor term = speckle_term(x, phi, BaseDist::gaussian, 11);
        std::vector<double> noise(term.data(), term.data() + term.size());
        auto m = oracles::sample_moments(noise);
        const double want = sigma / 255.0 * std::sqrt(level);
        CHECK(std::sqrt(m.variance) == doctest::Approx(want).epsilon(0.02));
    }
}

TEST_CASE("public speckle op equals clip(X + speckle_term)") {
    Tensor x = oracles::random_image<float>(1, 3, 16, 16, 77);
    Tensor phi = Tensor::full(1, 1, 16, 16, 90.0f);
    Tensor term = speckle_term(x, phi, BaseDist::gaussian, 5);
    Tensor manual = x;
    for (std::size_t i = 0; i < manual.size(); ++i) {
        manual[i] = std::clamp(manual[i] + term[i], 0.0f, 1.0f);
    }
    Tensor op = speckle(x, 90.0, BaseDist::gaussian, 5);
    CHECK(std::memcmp(manual.data(), op.data(), op.size() * sizeof(float)) == 0);
}

TEST_CASE("laplace base noise has excess kurtosis 3") {
    Rng rng(6);
    std::vector<double> xs;
    xs.reserve(1000000);
    for (int i = 0; i < 1000000; ++i) xs.push_back(rng.laplace_unit());
    auto m = oracles::sample_moments(xs);
    CHECK(m.variance == doctest::Approx(1.0).epsilon(0.01));
    CHECK(m.excess_kurtosis == doctest::Approx(3.0).epsilon(0.10));
}

TEST_CASE("poisson component has zero mean and variance alpha^2 X / 255") {
    const double alpha = 5.0;
    for (float level : {0.3f, 0.8f}) {
        Tensor x = Tensor::full(1, 1, 512, 512, level);
        Tensor term = poisson_term(x, alpha, 13);
        std::vector<double> noise(term.data(), term.data() + term.size());
        auto m = oracles::sample_moments(noise);
        const double want_var = alpha * alpha * level / 255.0;
        CHECK(m.variance == doctest::Approx(want_var).epsilon(0.03));
        CHECK(std::abs(m.mean) < 0.005);
    }
}

TEST_CASE("mixture variance is the sum of the independent component variances") {
    const double sigma = 90.0, alpha = 6.0;
    const float level = 0.25f;
    Tensor x = Tensor::full(1, 1, 512, 512, level);
    Tensor phi = Tensor::full(1, 1, 512, 512, static_cast<float>(sigma));
    Tensor sterm = speckle_term(x, phi, BaseDist::gaussian, 171);
    Tensor pterm = poisson_term(x, alpha, 172);
    std::vector<double> noise(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) noise[i] = sterm[i] + pterm[i];
    auto m = oracles::sample_moments(noise);
    const double want = sigma / 255.0 * sigma / 255.0 * level + alpha * alpha * level / 255.0;
    CHECK(m.variance == doctest::Approx(want).epsilon(0.03));
}

TEST_CASE("level maps hit [60,120] exactly and are deterministic") {
    for (VariantKind kind : {VariantKind::sincos, VariantKind::peaks, VariantKind::gauss_kernels}) {
        LevelMap map = make_level_map(kind, 48, 64, 21);
        float lo = map.phi[0], hi = map.phi[0];
        for (std::size_t i = 0; i < map.phi.size(); ++i) {
            lo = std::min(lo, map.phi[i]);
            hi = std::max(hi, map.phi[i]);
            CHECK(map.phi[i] > 0.0f);
        }
        CHECK(lo == doctest::Approx(60.0f).epsilon(1e-6));
        CHECK(hi == doctest::Approx(120.0f).epsilon(1e-6));
        CHECK(std::abs(lo - 60.0f) <= 1e-4f);
        CHECK(std::abs(hi - 120.0f) <= 1e-4f);

        LevelMap again = make_level_map(kind, 48, 64, 21);
        CHECK(std::memcmp(map.phi.data(), again.phi.data(), map.phi.size() * sizeof(float)) == 0);
    }
    CHECK_THROWS_AS(make_level_map(VariantKind::sincos, 4, 64, 1), std::invalid_argument);
}

TEST_CASE("sincos field is symmetric under j -> w-j") {
    // cos(2 pi (w-j)/w) == cos(2 pi j/w): direct evaluation oracle.
    LevelMap map = make_level_map(VariantKind::sincos, 32, 40, 3);
    for (std::size_t i = 0; i < 32; ++i)
        for (std::size_t j = 1; j < 40; ++j) {
            CHECK(map.phi.at(0, 0, i, j) ==
                  doctest::Approx(map.phi.at(0, 0, i, 40 - j)).epsilon(1e-4));
        }
}

TEST_CASE("constant level map reproduces plain speckle bit-exactly") {
    Tensor x = oracles::random_image<float>(1, 3, 16, 16, 23);
    LevelMap constant;
    constant.phi = Tensor::full(1, 1, 16, 16, 80.0f);
    Tensor a = speckle(x, 80.0, BaseDist::gaussian, 31);
    Tensor b = speckle_variant(x, constant, BaseDist::gaussian, 31);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("speckle_variant per-pixel std tracks the level map within 3%") {
    // 8000 draws per pixel via the batch axis; phi varies across the plane.
    const std::size_t n = 8000, hw = 8;
    LevelMap map = make_level_map(VariantKind::sincos, hw, hw, 41);
    Tensor clean = Tensor::full(n, 1, hw, hw, 0.5f);
    Tensor term = speckle_term(clean, map.phi, BaseDist::gaussian, 43);
    for (std::size_t p = 0; p < hw * hw; ++p) {
        double mean = 0, var = 0;
        for (std::size_t img = 0; img < n; ++img) mean += term[img * hw * hw + p] / n;
        for (std::size_t img = 0; img < n; ++img) {
            const double d = term[img * hw * hw + p] - mean;
            var += d * d / n;
        }
        const double want = map.phi[p] / 255.0 * std::sqrt(0.5);
        CHECK(std::sqrt(var) == doctest::Approx(want).epsilon(0.03));
    }
}

TEST_CASE("speckle_variant rejects mismatched level maps") {
    Tensor x(1, 1, 16, 16);
    LevelMap map = make_level_map(VariantKind::peaks, 8, 8, 1);
    CHECK_THROWS_AS(speckle_variant(x, map, BaseDist::gaussian, 1), std::invalid_argument);
}

TEST_CASE("noise variance is monotone in the pixel level (two-level image)") {
    Tensor x(1, 1, 512, 512);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = i < x.size() / 2 ? 0.2f : 0.7f;
    for (Family family : {Family::speckle, Family::poisson}) {
        NoiseSpec spec;
        spec.family = family;
        spec.sigma = 60;
        spec.alpha = 5;
        spec.seed = 37;
        Tensor y = apply(x, spec);
        std::vector<double> low, high;
        for (std::size_t i = 0; i < x.size(); ++i) {
            (i < x.size() / 2 ? low : high).push_back(y[i] - x[i]);
        }
        CHECK(oracles::sample_moments(high).variance > oracles::sample_moments(low).variance);
    }
}

TEST_CASE("clipping happens once and is reported") {
    Tensor bright = Tensor::full(1, 1, 64, 64, 0.98f);
    double clipped = 0.0;
    Tensor y = gaussian(bright, 40.0, 3, &clipped);
    CHECK(clipped > 0.1);
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(y[i] >= 0.0f);
        CHECK(y[i] <= 1.0f);
    }
    double none = 0.0;
    gaussian(Tensor::full(1, 1, 64, 64, 0.5f), 1.0, 3, &none);
    CHECK(none < 0.01);
}

TEST_CASE("training sampler draws sigma uniformly from [5,20]") {
    std::vector<Tensor> batch(1, Tensor::full(1, 1, 4, 4, 0.5f));
    std::vector<double> sigmas;
    for (int rep = 0; rep < 10000; ++rep) {
        std::vector<double> s;
        training_sampler(batch, 1000 + rep, 5.0, 20.0, &s);
        sigmas.push_back(s[0]);
    }
    for (double s : sigmas) {
        CHECK(s >= 5.0);
        CHECK(s <= 20.0);
    }
    // KS oracle against U(5,20)
    CHECK(oracles::ks_uniform_p_value(sigmas, 5.0, 20.0) > 0.01);

    // determinism
    std::vector<double> s1, s2;
    auto n1 = training_sampler(batch, 7, 5.0, 20.0, &s1);
    auto n2 = training_sampler(batch, 7, 5.0, 20.0, &s2);
    CHECK(s1 == s2);
    CHECK(std::memcmp(n1[0].data(), n2[0].data(), n1[0].size() * sizeof(float)) == 0);
}

TEST_CASE("noise spec text round-trip") {
    NoiseSpec spec;
    spec.family = Family::speckle_variant;
    spec.variant_kind = VariantKind::peaks;
    spec.base_dist = BaseDist::laplace;
    spec.sigma = 90;
    spec.seed = 123;
    NoiseSpec back = NoiseSpec::from_text(spec.to_text());
    CHECK(back.to_text() == spec.to_text());
    CHECK_THROWS_AS(NoiseSpec::from_text("family = salt\n"), std::invalid_argument);
}
