#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <sstream>

#include "oracles.hpp"
#include "sevkit/ops.hpp"
#include "sevkit/tensor.hpp"

using namespace sevkit;

TEST_CASE("tensor shape and storage") {
    Tensor t(2, 3, 4, 5);
    CHECK(t.size() == 2 * 3 * 4 * 5);
    t.at(1, 2, 3, 4) = 7.0f;
    CHECK(t[t.size() - 1] == 7.0f);
    CHECK(Tensor().size() == 0);

    Tensor f = Tensor::full(1, 1, 2, 2, 0.5f);
    CHECK(f.sum() == doctest::Approx(2.0));
}

TEST_CASE("shape mismatch errors name both shapes") {
    Tensor a(1, 2, 3, 3), b(1, 3, 3, 3);
    CHECK_THROWS_WITH_AS(a += b, doctest::Contains("(1,2,3,3)"), std::invalid_argument);
    try {
        a -= b;
        CHECK(false);
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("(1,3,3,3)") != std::string::npos);
    }
}

TEST_CASE("serialization round-trip is byte-identical") {
    Tensor t = oracles::random_tensor<float>(2, 3, 5, 4, 11);
    std::ostringstream s1;
    save_tensor(t, s1);
    std::istringstream in(s1.str());
    Tensor back = load_tensor(in);
    CHECK(back.same_shape(t));
    CHECK(std::memcmp(back.data(), t.data(), t.size() * sizeof(float)) == 0);

    std::ostringstream s2;
    save_tensor(back, s2);
    CHECK(s1.str() == s2.str());
}

TEST_CASE("serialization rejects bad magic and truncation") {
    Tensor t(1, 1, 2, 2);
    std::ostringstream s;
    save_tensor(t, s);
    std::string bytes = s.str();
    bytes[0] = 'X';
    std::istringstream bad(bytes);
    CHECK_THROWS_WITH_AS(load_tensor(bad), doctest::Contains("EQT1"), std::runtime_error);

    std::istringstream trunc(s.str().substr(0, 10));
    CHECK_THROWS_AS(load_tensor(trunc), std::runtime_error);
}

TEST_CASE("split/concat round-trip is bit-exact") {
    Tensor t = oracles::random_tensor<float>(2, 6, 4, 4, 3);
    auto [a, b] = channel_split(t);
    CHECK(a.c() == 3);
    Tensor back = channel_concat(a, b);
    CHECK(std::memcmp(back.data(), t.data(), t.size() * sizeof(float)) == 0);
}

TEST_CASE("split of odd channels errors") {
    Tensor t(1, 3, 2, 2);
    CHECK_THROWS_WITH_AS(channel_split(t), doctest::Contains("must be even"),
                         std::invalid_argument);
}

TEST_CASE("split is linear under scaling") {
    Tensor t = oracles::random_tensor<float>(1, 4, 3, 3, 5);
    auto [a, b] = channel_split(t);
    auto [ka, kb] = channel_split(t * 3.0f);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(ka[i] == 3.0f * a[i]);
        CHECK(kb[i] == 3.0f * b[i]);
    }
}

TEST_CASE("concat spatial mismatch errors") {
    Tensor a(1, 2, 3, 3), b(1, 2, 4, 4);
    CHECK_THROWS_AS(channel_concat(a, b), std::invalid_argument);
}

TEST_CASE("finiteness after public ops on finite inputs") {
    Tensor x = oracles::random_tensor<float>(2, 4, 8, 8, 17, 100.0);
    ConvKernel k(4, 4, 3, 3);
    kaiming_init(k, 5);
    CHECK(conv2d(x, k, 1, 1).all_finite());
    CHECK(relu(x).all_finite());
    auto st = token_stats(x);
    CHECK(st.mean.all_finite());
    CHECK(st.variance.all_finite());
}
