#include <doctest.h>

#include "mfdl/ensemble.hpp"
#include "mfdl/error.hpp"
#include "mfdl/linear_theory.hpp"

#include <cmath>
#include <random>

using namespace mfdl;

namespace {

MeanFieldParams P(double sw, double sb, double rho) { return MeanFieldParams{sw, sb, rho}; }

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST_CASE("single-input closed form examples") {
    CHECK(g_aa_closed(7, 7, P(0.5, 1.5, 1.0), 3.0) == doctest::Approx(36.0).epsilon(1e-14));
    CHECK(g_aa_closed(6, 7, P(0.5, 1.5, 1.0), 3.0) == doctest::Approx(27.0).epsilon(1e-14));
    // l = L with dropout: 4 (q/rho)^2 rho.
    CHECK(g_aa_closed(3, 3, P(0.2, 0.1, 0.5), 2.0) == doctest::Approx(4 * 16 * 0.5).epsilon(1e-14));
    // Marginal point: power factor 1, bracket rho + (L - l).
    const MeanFieldParams m = P(0.6, 0.1, 0.6);
    for (int l = 1; l < 10; ++l) {
        const double ratio = g_aa_closed(l, 10, m, 1.0) / g_aa_closed(l + 1, 10, m, 1.0);
        CHECK(ratio == doctest::Approx((0.6 + 10 - l) / (0.6 + 10 - l - 1)).epsilon(1e-13));
    }
}

TEST_CASE("pair closed form examples") {
    CHECK(g_ab_closed(5, 5, P(0.5, 0.1, 0.7), 1.3) == doctest::Approx(4 * 1.3 * 1.3).epsilon(1e-14));
    const double sw = 0.45;
    CHECK(g_ab_closed(4, 5, P(sw, 0.1, 1.0), 1.3) == doctest::Approx(4 * 1.69 * sw * (1 + sw)).epsilon(1e-14));
    // sigma_w^2 > rho^2: the bracket grows geometrically toward the input.
    const MeanFieldParams p = P(0.5, 0.1, 0.5);
    const double r1 = g_ab_closed(100, 200, p, 1.0) / g_ab_closed(101, 200, p, 1.0);
    CHECK(r1 == doctest::Approx(0.5 * 0.5 / 0.25).epsilon(1e-9));
}

TEST_CASE("appendix expansions reproduce the closed forms") {
    std::mt19937_64 gen(20240917);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int draw = 0; draw < 100; ++draw) {
        const double rho = 0.1 + 0.9 * u(gen);
        const double sw = rho * (0.02 + 0.96 * u(gen));  // sigma_w^2 < rho
        const MeanFieldParams p = P(sw, 0.05 + 2 * u(gen), rho);
        const double q = 0.1 + 10 * u(gen);
        const double qab = q * (2 * u(gen) - 1);
        const int L = 3 + static_cast<int>(u(gen) * 200);
        for (int k : {0, 1, 2}) {
            CAPTURE(draw);
            CAPTURE(k);
            const double aa = appendix_layer_oracle(k, PairKind::SingleInput, p, q) *
                              delta_to_gradient_factor(PairKind::SingleInput, p, q);
            CHECK(rel(aa, g_aa_closed(L - k, L, p, q)) < 1e-12);
            const double ab = appendix_layer_oracle(k, PairKind::InputPair, p, qab) *
                              delta_to_gradient_factor(PairKind::InputPair, p, qab);
            CHECK(rel(ab, g_ab_closed(L - k, L, p, qab)) < 1e-12);
        }
    }
}

TEST_CASE("appendix examples") {
    CHECK(appendix_layer_oracle(0, PairKind::SingleInput, P(0.3, 0.1, 0.8), 2.5) == doctest::Approx(10.0));
    const double sw = 0.7;
    CHECK(appendix_layer_oracle(1, PairKind::InputPair, P(sw, 0.1, 1.0), 1.5) ==
          doctest::Approx(4 * 1.5 * sw * (1 + sw)).epsilon(1e-14));
    CHECK_THROWS_AS(appendix_layer_oracle(3, PairKind::SingleInput, P(sw, 0.1, 1.0), 1.0), InvalidArgument);
    CHECK_THROWS_AS(appendix_layer_oracle(-1, PairKind::SingleInput, P(sw, 0.1, 1.0), 1.0), InvalidArgument);
}

TEST_CASE("log-space forms agree with direct evaluation") {
    for (double rho : {1.0, 0.7, 0.3})
        for (double ratio : {0.3, 1.0, 1.7})
            for (int L : {5, 40, 51, 80, 200}) {
                const MeanFieldParams p = P(rho * ratio, 0.1, rho);
                for (int l = 1; l <= L; l += 3) {
                    const double a = g_aa_closed(l, L, p, 1.7);
                    const double b = g_ab_closed(l, L, p, -0.8);
                    if (std::isfinite(a) && a > 1e-300) CHECK(rel(std::log(a), log_g_aa_closed(l, L, p, 1.7)) < 1e-12);
                    if (std::isfinite(b) && b > 1e-300) CHECK(rel(std::log(b), log_g_ab_closed(l, L, p, -0.8)) < 1e-12);
                }
            }
    // Far past double range the log form stays finite.
    const MeanFieldParams wild = P(0.9, 0.1, 0.3);
    CHECK(std::isfinite(log_g_ab_closed(1, 2000, wild, 1.0)));
    CHECK(log_g_ab_closed(1, 2000, wild, 1.0) > 1000.0);
}

TEST_CASE("one-layer ratio tends to chi1") {
    for (double rho : {1.0, 0.8, 0.5}) {
        const MeanFieldParams p = P(0.6 * rho, 0.1, rho);
        const double r = g_aa_closed(10, 200, p, 1.0) / g_aa_closed(11, 200, p, 1.0);
        CHECK(r == doctest::Approx(0.6).epsilon(1e-10));
    }
}

TEST_CASE("closed forms are positive") {
    for (double rho : {1.0, 0.4})
        for (int l = 1; l <= 30; ++l) {
            CHECK(g_aa_closed(l, 30, P(0.3, 0.2, rho), 0.9) > 0.0);
            CHECK(g_ab_closed(l, 30, P(0.3, 0.2, rho), 0.4) > 0.0);
        }
}

TEST_CASE("layer bounds") {
    CHECK_THROWS_AS(g_aa_closed(0, 5, P(0.3, 0.2, 1.0), 1.0), InvalidArgument);
    CHECK_THROWS_AS(g_ab_closed(6, 5, P(0.3, 0.2, 1.0), 1.0), InvalidArgument);
    CHECK_THROWS_AS(independence_baseline(6, 5, 0.5, 0.5, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("independence baseline") {
    const BaselinePrediction top = independence_baseline(9, 9, 0.7, 0.4, 2.0, 3.0);
    CHECK(top.g_aa == 2.0);
    CHECK(top.g_ab == 3.0);
    const BaselinePrediction flat = independence_baseline(1, 9, 1.0, 1.0, 2.0, 3.0);
    CHECK(flat.g_aa == 2.0);
    CHECK(flat.g_ab == 3.0);
    CHECK(independence_baseline(6, 9, 0.7, 0.4, 2.0, 3.0).g_ab == doctest::Approx(3.0 * 0.064));

    // With sigma_w^2 < rho the closed form settles onto the chi1 slope up to a constant.
    const MeanFieldParams p = P(0.5, 0.1, 1.0);
    const int L = 60;
    const double gL = g_aa_closed(L, L, p, 1.0);
    const double k20 = g_aa_closed(20, L, p, 1.0) / independence_baseline(20, L, 0.5, 0.5, gL, 1.0).g_aa;
    const double k5 = g_aa_closed(5, L, p, 1.0) / independence_baseline(5, L, 0.5, 0.5, gL, 1.0).g_aa;
    CHECK(k20 == doctest::Approx(k5).epsilon(1e-9));
}

TEST_CASE("linear closed form against a small simulation") {
    // q* = 3 at (0.5, 1.5); inputs start at the fixed point.
    NetworkConfig cfg;
    cfg.depth = 2;
    cfg.width = 400;
    cfg.params = P(0.5, 1.5, 1.0);
    cfg.activation = ActivationKind::Linear;
    cfg.seed = 99;
    EnsembleOptions opts;
    opts.n_instances = 300;
    opts.metrics = {Metric::GAA};
    const EnsembleStats s = ensemble_run(cfg, opts).stats.at(Metric::GAA);
    CHECK(std::abs(s.mean[0] - 27.0) < 4 * s.std_error[0]);
    CHECK(std::abs(s.mean[1] - 36.0) < 4 * s.std_error[1]);
}
