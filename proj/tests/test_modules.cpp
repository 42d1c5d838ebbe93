#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sevkit/modules.hpp"

using namespace sevkit;

namespace {

// fp32 scale-relative and fp64 elementwise deviations over the probe scales.
template <typename FnF, typename FnD>
void check_first_order(FnF&& fn32, FnD&& fn64, const Tensor& x32, const TensorD& x64,
                       double tol32 = 1e-5, double tol64 = 1e-5) {
    for (double k : oracles::kProbeScales) {
        double scale_rel = 0, elementwise = 0;
        oracles::equivariance_deviation(fn32, x32, k, &scale_rel, nullptr);
        CHECK(scale_rel <= tol32);
        oracles::equivariance_deviation(fn64, x64, k, nullptr, &elementwise);
        CHECK(elementwise <= tol64);
    }
}

}  // namespace

TEST_CASE("constant scaling direct evaluation") {
    CSLayerT<float> cs(4);
    Tensor v(1, 4, 1, 1);

    // eta = 1: division by sqrt(4) alone.
    v.fill(2.0f);
    Tensor y = cs.forward(v);
    for (int i = 0; i < 4; ++i) CHECK(y[i] == 1.0f);

    const float eta[4] = {1.0f, 0.5f, 2.0f, 1.0f};
    const float in[4] = {1, 2, 3, 4};
    const float expect[4] = {0.5f, 0.5f, 3.0f, 2.0f};
    for (int i = 0; i < 4; ++i) {
        cs.gain[i] = eta[i];
        v[i] = in[i];
    }
    y = cs.forward(v);
    for (int i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(expect[i]));
}

TEST_CASE("constant scaling commutes with scaling exactly up to round-off") {
    CSLayerT<float> cs(8);
    for (std::size_t i = 0; i < 8; ++i) cs.gain[i] = 0.5f + 0.25f * i;
    CSLayerT<double> cs64(8);
    for (std::size_t i = 0; i < 8; ++i) cs64.gain[i] = 0.5 + 0.25 * i;
    Tensor x = oracles::random_tensor<float>(2, 8, 6, 6, 41);
    TensorD xd = oracles::random_tensor<double>(2, 8, 6, 6, 41);
    check_first_order([&](const Tensor& t) { return cs.forward(t); },
                      [&](const TensorD& t) { return cs64.forward(t); }, x, xd);

    // elementwise op: even the strict elementwise form holds in fp32
    double elementwise = 0;
    oracles::equivariance_deviation([&](const Tensor& t) { return cs.forward(t); }, x, 3.0,
                                    nullptr, &elementwise);
    CHECK(elementwise <= 1e-6);
}

TEST_CASE("cs channel mismatch errors") {
    CSLayerT<float> cs(4);
    CHECK_THROWS_AS(cs.forward(Tensor(1, 6, 2, 2)), std::invalid_argument);
}

TEST_CASE("nsm with gamma forced to 1 and beta to 0 reproduces the normalized token") {
    // v = [1,-1]: mu = 0, sigma = 1. Projection weights are chosen so that
    // gamma == [1,1] and beta == [0,0] for this input.
    NSMLayerT<float> nsm(2, 1);
    nsm.proj.weights.fill(0.0f);
    // gamma rows: 0.5*v0 - 0.5*v1 = 1 for v = [1,-1]
    nsm.proj.weights.at(0, 0, 0, 0) = 0.5f;
    nsm.proj.weights.at(0, 1, 0, 0) = -0.5f;
    nsm.proj.weights.at(1, 0, 0, 0) = 0.5f;
    nsm.proj.weights.at(1, 1, 0, 0) = -0.5f;
    Tensor v(1, 2, 1, 1);
    v[0] = 1.0f;
    v[1] = -1.0f;
    Tensor y = nsm.forward(v);
    CHECK(y[0] == doctest::Approx(1.0f));
    CHECK(y[1] == doctest::Approx(-1.0f));
}

TEST_CASE("nsm degenerate token emits beta alone") {
    NSMLayerT<float> nsm(3, 5);
    kaiming_init(nsm.proj, 5);
    Tensor v = Tensor::full(1, 3, 1, 1, 5.0f);
    Tensor y = nsm.forward(v);
    // beta = lower half of the 1x1 projection of v.
    Tensor gb = conv2d(v, nsm.proj, 1, 0);
    for (int i = 0; i < 3; ++i) CHECK(y[i] == gb[3 + i]);
}

TEST_CASE("nsm is first-order homogeneous (prenorm affine)") {
    NSMLayerT<float> nsm(8, 11);
    NSMLayerT<double> nsm64(8, 11);
    Tensor x = oracles::random_tensor<float>(2, 8, 6, 6, 42);
    TensorD xd = oracles::random_tensor<double>(2, 8, 6, 6, 42);
    check_first_order([&](const Tensor& t) { return nsm.forward(t); },
                      [&](const TensorD& t) { return nsm64.forward(t); }, x, xd);
}

TEST_CASE("nsm with postnorm affine is NOT first-order homogeneous") {
    NSMLayerT<double> nsm(8, 11);
    nsm.affine_from_normalized = true;
    TensorD x = oracles::random_tensor<double>(1, 8, 4, 4, 43);
    double elementwise = 0;
    oracles::equivariance_deviation([&](const TensorD& t) { return nsm.forward(t); }, x, 10.0,
                                    nullptr, &elementwise);
    CHECK(elementwise > 0.01);
}

TEST_CASE("hnm composes its branches and stays homogeneous") {
    HNMLayerT<float> hnm(2, 3);
    Tensor x(1, 2, 2, 2);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.25f * (1 + static_cast<int>(i));
    auto [x1, x2] = channel_split(x);
    Tensor want = channel_concat(hnm.cs.forward(x1), hnm.nsm.forward(x2));
    Tensor got = hnm.forward(x);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);

    HNMLayerT<float> h8(8, 7);
    HNMLayerT<double> h8d(8, 7);
    Tensor xf = oracles::random_tensor<float>(2, 8, 6, 6, 44);
    TensorD xd = oracles::random_tensor<double>(2, 8, 6, 6, 44);
    check_first_order([&](const Tensor& t) { return h8.forward(t); },
                      [&](const TensorD& t) { return h8d.forward(t); }, xf, xd);

    CHECK_THROWS_AS(HNMLayerT<float>(7, 1), std::invalid_argument);
}

TEST_CASE("hnm maps zero to zero") {
    HNMLayerT<float> hnm(8, 9);
    Tensor z(1, 8, 4, 4);
    Tensor y = hnm.forward(z);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0f);
}

TEST_CASE("igm direct evaluation of the gated product") {
    // Identity 3x3 value projection; token F_v = [1,-1], F_g = [2,-2].
    IGMLayerT<float> igm(4, 1);
    igm.value_proj.weights.fill(0.0f);
    igm.value_proj.weights.at(0, 0, 1, 1) = 1.0f;
    igm.value_proj.weights.at(1, 1, 1, 1) = 1.0f;
    Tensor x(1, 4, 1, 1);
    x[0] = 1.0f;
    x[1] = -1.0f;
    x[2] = 2.0f;
    x[3] = -2.0f;
    Tensor y = igm.forward(x);
    REQUIRE(y.c() == 2);
    // numerator [2,2]; var(F_v)=1, var(F_g)=4 -> 2/sqrt(5)
    const float expect = 2.0f / std::sqrt(5.0f);
    CHECK(y[0] == doctest::Approx(expect));
    CHECK(y[1] == doctest::Approx(expect));
}

TEST_CASE("igm degenerate rule: both signals constant gives zero") {
    // Identity value projection keeps F_v constant when F_1 is constant, so
    // both per-token variances vanish and the degenerate branch emits 0.
    IGMLayerT<float> igm(4, 2);
    igm.value_proj.weights.fill(0.0f);
    igm.value_proj.weights.at(0, 0, 1, 1) = 1.0f;
    igm.value_proj.weights.at(1, 1, 1, 1) = 1.0f;
    Tensor x(1, 4, 1, 1);
    x[0] = x[1] = 3.0f;   // F_v constant per token
    x[2] = x[3] = -1.5f;  // F_g constant
    Tensor y = igm.forward(x);
    CHECK(y[0] == 0.0f);
    CHECK(y[1] == 0.0f);
}

TEST_CASE("igm gate weight lies in [0,1] and the formula holds bit-for-formula") {
    IGMLayerT<double> igm(8, 5);
    kaiming_init(igm.value_proj, 13);
    TensorD x = oracles::random_tensor<double>(1, 8, 5, 5, 45);
    auto [x1, x2] = channel_split(x);
    TensorD fv = conv2d(x1, igm.value_proj, 1, 1);
    auto sv = token_stats(fv);
    auto sg = token_stats(x2);
    TensorD y = igm.forward(x);
    const std::size_t plane = 25;
    for (std::size_t p = 0; p < plane; ++p) {
        const double den2 = sv.variance[p] + sg.variance[p];
        const double gate_weight = sg.variance[p] / den2;
        CHECK(gate_weight >= 0.0);
        CHECK(gate_weight <= 1.0);
        for (std::size_t ch = 0; ch < 4; ++ch) {
            const double want = fv[ch * plane + p] * x2[ch * plane + p] / std::sqrt(den2);
            CHECK(y[ch * plane + p] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("igm is first-order homogeneous under dual and single scaling") {
    for (IgmScaling scaling : {IgmScaling::dual, IgmScaling::single}) {
        IGMLayerT<float> igm(8, 6);
        igm.scaling = scaling;
        IGMLayerT<double> igm64(8, 6);
        igm64.scaling = scaling;
        Tensor x = oracles::random_tensor<float>(2, 8, 6, 6, 46);
        TensorD xd = oracles::random_tensor<double>(2, 8, 6, 6, 46);
        check_first_order([&](const Tensor& t) { return igm.forward(t); },
                          [&](const TensorD& t) { return igm64.forward(t); }, x, xd);
    }
}

TEST_CASE("igm without the scaling term is second-order") {
    IGMLayerT<double> igm(8, 6);
    igm.scaling = IgmScaling::none;
    TensorD x = oracles::random_tensor<double>(1, 8, 4, 4, 47);
    TensorD y1 = igm.forward(x);
    TensorD y3 = igm.forward(x * 3.0);
    for (std::size_t i = 0; i < y1.size(); ++i) {
        CHECK(y3[i] == doctest::Approx(9.0 * y1[i]).epsilon(1e-9));
    }
}

TEST_CASE("igm odd channel count errors") {
    CHECK_THROWS_AS(IGMLayerT<float>(5, 1), std::invalid_argument);
}

TEST_CASE("residual block identity and homogeneity") {
    ConvKernel c1(4, 4, 3, 3), c2(4, 4, 3, 3);
    Tensor x = oracles::random_tensor<float>(1, 4, 6, 6, 48);

    // zero weights: skip path only
    Tensor y = residual_block(x, c1, c2);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    kaiming_init(c1, 1);
    kaiming_init(c2, 2);
    ConvKernelT<double> d1 = kernel_cast<double>(c1), d2 = kernel_cast<double>(c2);
    TensorD xd = tensor_cast<double>(x);
    check_first_order([&](const Tensor& t) { return residual_block(t, c1, c2); },
                      [&](const TensorD& t) { return residual_block(t, d1, d2); }, x, xd);

    ConvKernel bad(3, 4, 3, 3);
    CHECK_THROWS_AS(residual_block(x, c1, bad), std::invalid_argument);
}

TEST_CASE("layer norm is exactly order 0 and gelu breaks homogeneity") {
    LayerNormT<double> ln(6);
    for (std::size_t i = 0; i < 6; ++i) {
        ln.gamma[i] = 0.5 + 0.2 * i;
        ln.beta[i] = 0.1 * i;
    }
    TensorD x = oracles::random_tensor<double>(1, 6, 5, 5, 49);
    TensorD ref = ln.forward(x);
    for (double k : oracles::kProbeScales) {
        TensorD scaled = ln.forward(x * k);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(scaled[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        }
    }

    // GELU at k=10 on unit-scale inputs: >= 1% relative deviation.
    TensorD u = oracles::random_tensor<double>(1, 4, 8, 8, 50);
    double elementwise = 0;
    oracles::equivariance_deviation([](const TensorD& t) { return gelu(t); }, u, 10.0, nullptr,
                                    &elementwise);
    CHECK(elementwise >= 0.01);
}

TEST_CASE("module adjoints match central finite differences") {
    const TensorD x0 = oracles::random_tensor<double>(1, 8, 5, 5, 51, 0.6);
    TensorD proj_out = oracles::projection_like(TensorD(1, 8, 5, 5), 52);
    TensorD proj_half = oracles::projection_like(TensorD(1, 4, 5, 5), 53);

    SUBCASE("cs") {
        CSLayerT<double> cs(8);
        for (std::size_t i = 0; i < 8; ++i) cs.gain[i] = 0.8 + 0.1 * i;
        TensorD x = x0;
        auto loss = [&]() { return oracles::dot(cs.forward(x), proj_out); };
        TensorD gx;
        cs.backward(x, proj_out, &gx);
        CHECK(oracles::check_gradient(loss, x, gx, 61).failed == 0);
        CHECK(oracles::check_gradient(loss, cs.gain, cs.gain_grad, 62).failed == 0);
    }
    SUBCASE("nsm prenorm and postnorm") {
        for (bool postnorm : {false, true}) {
            NSMLayerT<double> nsm(8, 21);
            nsm.affine_from_normalized = postnorm;
            TensorD x = x0;
            auto loss = [&]() { return oracles::dot(nsm.forward(x), proj_out); };
            TensorD gx;
            nsm.proj_grad.fill(0.0);
            nsm.backward(x, proj_out, &gx);
            CHECK(oracles::check_gradient(loss, x, gx, 63).failed == 0);
            CHECK(oracles::check_gradient(loss, nsm.proj.weights, nsm.proj_grad, 64).failed == 0);
        }
    }
    SUBCASE("igm all scalings") {
        for (IgmScaling scaling : {IgmScaling::dual, IgmScaling::single, IgmScaling::none}) {
            IGMLayerT<double> igm(8, 22);
            igm.scaling = scaling;
            TensorD x = x0;
            auto loss = [&]() { return oracles::dot(igm.forward(x), proj_half); };
            TensorD gx;
            igm.value_proj_grad.fill(0.0);
            igm.backward(x, proj_half, &gx);
            CHECK(oracles::check_gradient(loss, x, gx, 65).failed == 0);
            CHECK(oracles::check_gradient(loss, igm.value_proj.weights, igm.value_proj_grad, 66)
                      .failed == 0);
        }
    }
    SUBCASE("layer norm") {
        LayerNormT<double> ln(8);
        for (std::size_t i = 0; i < 8; ++i) {
            ln.gamma[i] = 0.9 + 0.05 * i;
            ln.beta[i] = 0.02 * i;
        }
        TensorD x = x0;
        auto loss = [&]() { return oracles::dot(ln.forward(x), proj_out); };
        TensorD gx;
        ln.backward(x, proj_out, &gx);
        CHECK(oracles::check_gradient(loss, x, gx, 67).failed == 0);
        CHECK(oracles::check_gradient(loss, ln.gamma, ln.gamma_grad, 68).failed == 0);
        CHECK(oracles::check_gradient(loss, ln.beta, ln.beta_grad, 69).failed == 0);
    }
    SUBCASE("elu and gelu") {
        TensorD x = x0;
        TensorD ge = elu_backward(x, proj_out);
        auto loss_elu = [&]() { return oracles::dot(elu(x), proj_out); };
        CHECK(oracles::check_gradient(loss_elu, x, ge, 70).failed == 0);
        TensorD gg = gelu_backward(x, proj_out);
        auto loss_gelu = [&]() { return oracles::dot(gelu(x), proj_out); };
        CHECK(oracles::check_gradient(loss_gelu, x, gg, 71).failed == 0);
    }
}

TEST_CASE("centralize/decentralize round trip and constant case") {
    Tensor x = oracles::random_image<float>(1, 3, 4, 4, 54);
    Tensor back = decentralize(centralize(x));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]));

    Tensor half = Tensor::full(1, 3, 2, 2, 0.5f);
    Tensor c = centralize(half);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == 0.0f);
}
