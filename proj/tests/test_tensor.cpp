#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

using namespace flowlab;

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.numel() == 6);
    t.at(1, 2) = 7.0;
    CHECK(t.data[5] == 7.0);
}

TEST_CASE("add/sub/scale/dot") {
    Tensor a({3});
    Tensor b({3});
    a.data = {1, 2, 3};
    b.data = {4, 5, 6};
    CHECK(add(a, b).data == std::vector<double>{5, 7, 9});
    CHECK(sub(b, a).data == std::vector<double>{3, 3, 3});
    CHECK(scale(a, 2.0).data == std::vector<double>{2, 4, 6});
    CHECK(dot(a, b) == doctest::Approx(32.0));
    CHECK(sq_norm(a) == doctest::Approx(14.0));
}

TEST_CASE("shape mismatch reports an error") {
    Tensor a({3}), b({4});
    CHECK_THROWS_AS(add(a, b), std::invalid_argument);
    CHECK_THROWS_AS(dot(a, b), std::invalid_argument);
}

TEST_CASE("non-finite detection") {
    Tensor a({2});
    a.data = {1.0, std::numeric_limits<double>::quiet_NaN()};
    CHECK_FALSE(all_finite(a));
    CHECK_THROWS_AS(check_finite(a, "x"), std::runtime_error);
}

TEST_CASE("dual tensor enforces matching shapes") {
    Tensor v({2}), g({3});
    CHECK_THROWS_AS(DualTensor(v, g), std::invalid_argument);
    DualTensor ok(Tensor({2}), Tensor({2}));
    CHECK(ok.value.same_shape(ok.tangent));
}

TEST_CASE("rng streams are deterministic and label-separated") {
    Rng a = Rng::stream(42, "stage", 0);
    Rng b = Rng::stream(42, "stage", 0);
    Rng c = Rng::stream(42, "other", 0);
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.next_u64() != c.next_u64());
}

TEST_CASE("rng normal moments") {
    Rng rng(7);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02).scale(1.0));
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}
