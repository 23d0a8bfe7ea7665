#include <doctest.h>

#include "mfdl/activations.hpp"
#include "mfdl/error.hpp"
#include "mfdl/meanfield.hpp"
#include "mfdl/quadrature.hpp"
#include "mfdl/rng.hpp"

#include <cmath>
#include <numeric>

using namespace mfdl;

namespace {

// Monte-Carlo estimate of E[f(z)] with an independent generator family.
template <class F>
double monte_carlo(F f, int n, std::uint64_t seed) {
    Rng rng(seed);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += f(rng.normal());
    return acc / n;
}

// E[z^k] for the standard normal: (k-1)!! for even k.
double normal_moment(int k) {
    if (k % 2) return 0.0;
    double m = 1.0;
    for (int j = k - 1; j > 1; j -= 2) m *= j;
    return m;
}

}  // namespace

TEST_CASE("two-point rule by hand") {
    const QuadratureRule r = make_rule(2);
    REQUIRE(r.nodes.size() == 2);
    CHECK(r.nodes[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(r.nodes[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r.weights[1] == doctest::Approx(0.5).epsilon(1e-14));
    // Exact through degree 3.
    CHECK(expect1([](double z) { return z * z * z + z * z; }, r) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("rules are normalized, ordered and symmetric") {
    for (int order : {2, 3, 7, 16, 32, 64, 101, 256, 512}) {
        CAPTURE(order);
        const QuadratureRule r = make_rule(order);
        REQUIRE(static_cast<int>(r.nodes.size()) == order);
        const double total = std::accumulate(r.weights.begin(), r.weights.end(), 0.0);
        CHECK(std::abs(total - 1.0) < 1e-12);
        for (int i = 1; i < order; ++i) CHECK(r.nodes[i] > r.nodes[i - 1]);
        for (int i = 0; i < order; ++i) {
            CHECK(std::abs(r.nodes[i] + r.nodes[order - 1 - i]) < 1e-10 * std::max(1.0, std::abs(r.nodes[i])));
            // The outermost weights of the largest orders underflow to zero.
            CHECK(r.weights[i] >= 0.0);
            if (std::abs(r.nodes[i]) < 30.0) CHECK(r.weights[i] > 0.0);
        }
    }
}

TEST_CASE("invalid orders are rejected") {
    CHECK_THROWS_AS(make_rule(1), InvalidArgument);
    CHECK_THROWS_AS(make_rule(0), InvalidArgument);
    CHECK_THROWS_AS(make_rule(kMaxQuadOrder + 1), InvalidArgument);
}

TEST_CASE("polynomial exactness up to degree 2n-1") {
    for (int order : {4, 8, 16, 32}) {
        const QuadratureRule r = make_rule(order);
        for (int k = 0; k <= 2 * order - 1; ++k) {
            CAPTURE(order);
            CAPTURE(k);
            const double got = expect1([k](double z) { return std::pow(z, k); }, r);
            const double want = normal_moment(k);
            if (want == 0.0)
                CHECK(std::abs(got) < 1e-10 * normal_moment(k + 1));
            else
                CHECK(std::abs(got - want) <= 1e-10 * want);
        }
    }
}

TEST_CASE("single expectations") {
    const QuadratureRule r = make_rule();
    CHECK(expect1([](double) { return 1.0; }, r) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(expect1([](double z) { return z * z; }, r) - 1.0) < 1e-12);

    const auto relu_sq = [](double z) { return z > 0 ? z * z : 0.0; };
    const double panels = expect_panels(relu_sq, std::vector<double>{0.0}, 0.5, r);
    CHECK(std::abs(panels - 0.5) < 1e-12);
    // Independent oracle: ten million Monte-Carlo draws.
    const double mc = monte_carlo(relu_sq, 10'000'000, 0xfeedULL);
    CHECK(std::abs(panels - mc) < 5.0 * std::sqrt(1.25 / 1e7));
}

TEST_CASE("double expectations") {
    const QuadratureRule r = make_rule();
    CHECK(expect2([](double, double) { return 1.0; }, 0.4, r) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(expect2([](double a, double b) { return a * b; }, 0.0, r)) < 1e-14);

    const double c = 0.3;
    const double sc = std::sqrt(1 - c * c);
    const double exact = expect2([&](double z1, double z2) { return z1 * (c * z1 + sc * z2); }, c, r);
    CHECK(std::abs(exact - 0.3) < 1e-12);

    Rng rng(77);
    double acc = 0.0;
    const int n = 2'000'000;
    for (int i = 0; i < n; ++i) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        acc += z1 * (c * z1 + sc * z2);
    }
    CHECK(std::abs(acc / n - exact) < 5.0 * std::sqrt(1.09 / n));

    CHECK_THROWS_AS(expect2([](double, double) { return 1.0; }, 1.5, r), InvalidArgument);
}

TEST_CASE("product route agrees with the tensor rule") {
    const QuadratureRule r = make_rule();
    const std::vector<double> none;
    for (double c : {-0.8, 0.0, 0.35, 0.95}) {
        CAPTURE(c);
        const double s1 = 1.3, s2 = 0.7;
        const double sc = std::sqrt(1 - c * c);
        // Polynomials: the tensor rule is exact.
        const auto p1 = [](double u) { return u * u * u + u; };
        const auto p2 = [](double u) { return u * u - u; };
        const double exact = expect2([&](double z1, double z2) { return p1(s1 * z1) * p2(s2 * (c * z1 + sc * z2)); }, c, r);
        CHECK(std::abs(expect_product(p1, p2, s1, s2, c, none, none, r) - exact) < 1e-10 * std::max(1.0, std::abs(exact)));
        // tanh: Gauss-Hermite converges slowly here, so the bound is looser.
        const double tensor = expect2(
            [&](double z1, double z2) { return std::tanh(s1 * z1) * std::tanh(s2 * (c * z1 + sc * z2)); }, c, r);
        const auto t = [](double u) { return std::tanh(u); };
        CHECK(std::abs(tensor - expect_product(t, t, s1, s2, c, none, none, r)) < 1e-7);
    }
}

TEST_CASE("c = 1 collapses the double integral to the single one") {
    const QuadratureRule r = make_rule();
    for (ActivationKind a : kAllActivations) {
        const double q = 1.7;
        const auto f = [a](double u) { return value(a, u); };
        const double two = expect_product(f, f, std::sqrt(q), std::sqrt(q), 1.0, breakpoints(a), breakpoints(a), r);
        const double one = activation_average([a](double u) { return value(a, u) * value(a, u); }, q, a, r);
        CAPTURE(to_string(a));
        CHECK(std::abs(two - one) < 1e-10);
    }
}

TEST_CASE("expectations are stable in the order beyond 32") {
    const QuadratureRule r32 = make_rule(32);
    const QuadratureRule r64 = make_rule(64);
    const QuadratureRule r128 = make_rule(128);
    for (ActivationKind a : kAllActivations)
        for (double q : {0.01, 0.1, 1.0, 10.0, 100.0}) {
            const auto sq = [a](double u) { return value(a, u) * value(a, u); };
            const auto dsq = [a](double u) { return derivative(a, u) * derivative(a, u); };
            CAPTURE(to_string(a));
            CAPTURE(q);
            const double v64 = activation_average(sq, q, a, r64);
            CHECK(std::abs(activation_average(sq, q, a, r32) - v64) <= 1e-8 * std::max(1.0, v64));
            CHECK(std::abs(activation_average(sq, q, a, r128) - v64) <= 1e-8 * std::max(1.0, v64));
            const double d64 = activation_average(dsq, q, a, r64);
            CHECK(std::abs(activation_average(dsq, q, a, r32) - d64) <= 1e-8 * std::max(1.0, d64));
        }
}

TEST_CASE("non-finite integrands are reported") {
    const QuadratureRule r = make_rule(16);
    CHECK_THROWS_AS(expect1([](double) { return std::nan(""); }, r), EvaluationError);
    CHECK_THROWS_AS(expect_panels([](double) { return HUGE_VAL; }, std::vector<double>{}, 1.0, r), EvaluationError);
}
