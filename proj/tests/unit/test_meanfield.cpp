#include <doctest.h>

#include "mfdl/error.hpp"
#include "mfdl/meanfield.hpp"
#include "mfdl/phase.hpp"

#include <cmath>

using namespace mfdl;

namespace {

const QuadratureRule& rule() {
    static const QuadratureRule r = make_rule();
    return r;
}

MeanFieldParams P(double sw, double sb, double rho) { return MeanFieldParams{sw, sb, rho}; }

// Linear fixed point by geometric series.
double linear_q_star(const MeanFieldParams& p) { return p.sigma_b_sq / (1.0 - p.sigma_w_sq / p.rho); }

}  // namespace

TEST_CASE("parameter validation") {
    CHECK_NOTHROW(P(1.0, 0.0, 1.0).validate());
    CHECK_THROWS_AS(P(-1.0, 0.0, 1.0).validate(), InvalidArgument);
    CHECK_THROWS_AS(P(1.0, -0.1, 1.0).validate(), InvalidArgument);
    CHECK_THROWS_AS(P(1.0, 0.1, 0.0).validate(), InvalidArgument);
    CHECK_THROWS_AS(P(1.0, 0.1, 1.2).validate(), InvalidArgument);
    CHECK_THROWS_AS(q_step(1.0, P(1.0, 0.1, 1.5), ActivationKind::Tanh, rule()), InvalidArgument);
}

TEST_CASE("length map examples") {
    CHECK(q_step(3.0, P(0.5, 1.5, 1.0), ActivationKind::Linear, rule()) == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(q_step(2.7, P(1.0, 0.0, 1.0), ActivationKind::Linear, rule()) == doctest::Approx(2.7).epsilon(1e-13));
    CHECK(q_step(1.0, P(2.0, 0.0, 1.0), ActivationKind::ReLU, rule()) == doctest::Approx(1.0).epsilon(1e-13));
    // 1/rho scaling.
    CHECK(q_step(2.0, P(0.3, 0.2, 0.6), ActivationKind::Linear, rule()) ==
          doctest::Approx(0.3 / 0.6 * 2.0 + 0.2).epsilon(1e-13));
}

TEST_CASE("length fixed points against the geometric series") {
    const FixedPointResult a = q_fixed_point(P(0.5, 1.5, 1.0), ActivationKind::Linear, rule());
    CHECK(a.value == doctest::Approx(3.0).epsilon(1e-11));
    const FixedPointResult b = q_fixed_point(P(0.25, 1.0, 0.5), ActivationKind::Linear, rule());
    CHECK(b.value == doctest::Approx(2.0).epsilon(1e-11));
    const FixedPointResult zero = q_fixed_point(P(0.0, 0.7, 1.0), ActivationKind::Tanh, rule());
    CHECK(zero.value == 0.7);
    CHECK(zero.iterations == 1);

    for (int i = 0; i < 20; ++i) {
        const double rho = 0.3 + 0.035 * i;
        const MeanFieldParams p = P(rho * (0.1 + 0.04 * i), 0.05 + 0.1 * i, rho);
        CHECK(q_fixed_point(p, ActivationKind::Linear, rule()).value ==
              doctest::Approx(linear_q_star(p)).epsilon(1e-10));
    }
}

TEST_CASE("divergent lengths are an error carrying the last iterate") {
    try {
        q_fixed_point(P(0.8, 0.1, 0.5), ActivationKind::Linear, rule());
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.last_iterate() > 1e3);
        CHECK(e.iterations() > 0);
    }
}

TEST_CASE("fixed point does not depend on the starting length") {
    const SolverOptions opts;
    for (ActivationKind a : {ActivationKind::Tanh, ActivationKind::HardTanh, ActivationKind::Erf})
        for (double rho : {1.0, 0.7}) {
            const MeanFieldParams p = P(1.4, 0.1, rho);
            const double ref = q_fixed_point(p, a, rule(), 1.0).value;
            for (double q0 : {0.1, 10.0}) CHECK(std::abs(q_fixed_point(p, a, rule(), q0).value - ref) < 10 * opts.tol * std::max(1.0, ref) + 1e-11);
        }
}

TEST_CASE("correlation map") {
    for (ActivationKind a : kAllActivations) {
        const MeanFieldParams p = P(a == ActivationKind::Linear ? 0.5 : 1.4, 0.1, 1.0);
        const double q = q_fixed_point(p, a, rule()).value;
        const LengthState s = c_step({q, q, 1.0, 0}, p, a, rule());
        CAPTURE(to_string(a));
        CHECK(std::abs(s.c_ab - 1.0) < 1e-8);
        CHECK(s.layer == 1);
    }
    for (double c : {-0.9, -0.1, 0.3, 0.99}) {
        const LengthState s = c_step({2.0, 2.0, c, 0}, P(1.0, 0.0, 1.0), ActivationKind::Linear, rule());
        CHECK(s.c_ab == doctest::Approx(c).epsilon(1e-12));
    }
}

TEST_CASE("correlation stays bounded") {
    for (ActivationKind a : kAllActivations)
        for (double rho : {1.0, 0.5})
            for (double c : {-1.0, -0.5, 0.0, 0.7, 1.0})
                for (double sw : {0.3, 1.5, 4.0}) {
                    const LengthState s = c_step({0.8, 1.9, c, 0}, P(sw, 0.05, rho), a, rule());
                    CHECK(std::abs(s.c_ab) <= 1.0);
                    CHECK(s.q_aa >= 0.0);
                    CHECK(s.q_bb >= 0.0);
                }
}

TEST_CASE("zero length makes the correlation undefined") {
    CHECK_THROWS_AS(c_step({0.0, 0.0, 0.5, 0}, P(0.0, 0.0, 1.0), ActivationKind::Tanh, rule()), DegenerateState);
}

TEST_CASE("correlation fixed points") {
    CHECK(std::abs(c_fixed_point(P(1.4, 0.1, 1.0), ActivationKind::Tanh, rule()).value - 1.0) < 1e-6);
    // The iteration settles below one as soon as dropout is on.
    const double c07 = c_fixed_point(P(0.81, 0.25, 0.7), ActivationKind::ReLU, rule()).value;
    CHECK(c07 < 1.0 - 1e-3);
    CHECK(c07 > 0.0);
    for (ActivationKind a : {ActivationKind::Tanh, ActivationKind::HardTanh, ActivationKind::Erf})
        for (double rho : {0.95, 0.8, 0.5}) CHECK(c_fixed_point(P(1.4, 0.1, rho), a, rule()).value < 1.0 - 1e-6);
    // Identity map: the starting value is the answer.
    CHECK(c_fixed_point(P(1.0, 0.0, 1.0), ActivationKind::Linear, rule(), 0.37).value ==
          doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("dropout lowers c* on ReLU even when the lengths diverge") {
    // sigma_w^2 / rho = 2.025 > 2: q grows without bound, the scale-free map still settles.
    const double c = c_fixed_point(P(0.81, 0.25, 0.4), ActivationKind::ReLU, rule()).value;
    CHECK(c < 1.0 - 1e-3);
    CHECK(c > -1.0);
}

TEST_CASE("chi1 and chi2 examples") {
    for (double rho : {1.0, 0.7, 0.3}) {
        const MeanFieldParams p = P(0.25, 0.4, rho);
        CHECK(chi1(1.3, p, ActivationKind::Linear, rule()) == doctest::Approx(0.25 / rho).epsilon(1e-13));
        CHECK(chi2(1.3, 0.4, p, ActivationKind::Linear, rule()) == doctest::Approx(0.25).epsilon(1e-13));
    }
    CHECK(chi1(5.0, P(2.0, 0.0, 1.0), ActivationKind::ReLU, rule()) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(chi1(1.0, P(0.0, 0.3, 1.0), ActivationKind::Tanh, rule()) == 0.0);
    CHECK(chi2(1.0, 0.5, P(0.0, 0.3, 1.0), ActivationKind::Tanh, rule()) == 0.0);

    // At rho = 1 and c* = 1 the double integral collapses onto chi1.
    for (ActivationKind a : {ActivationKind::Tanh, ActivationKind::Erf, ActivationKind::HardTanh}) {
        const MeanFieldParams p = P(1.2, 0.2, 1.0);
        const double q = q_fixed_point(p, a, rule()).value;
        CHECK(chi2(q, 1.0, p, a, rule()) == doctest::Approx(chi1(q, p, a, rule())).epsilon(1e-10));
    }
}

TEST_CASE("depth scale") {
    CHECK(depth_scale(std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::isinf(depth_scale(1.0)));
    CHECK(std::isinf(depth_scale(1.0 + 1e-13)));
    CHECK(depth_scale(0.5) == doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-15));
    CHECK(depth_scale(2.0) == doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-15));

    const DepthScales d = depth_scales(P(0.5, 0.1, 1.0), ActivationKind::Linear, rule());
    CHECK(d.chi1 == doctest::Approx(0.5));
    CHECK(d.xi1 == doctest::Approx(1.4426950408889634));
}

TEST_CASE("empirical correlation decay follows xi2") {
    {
        // Linear rho = 1: at q* the correlation map is affine with slope sigma_w^2 = chi2.
        const MeanFieldParams p = P(0.5, 0.1, 1.0);
        const DepthScales d = depth_scales(p, ActivationKind::Linear, rule());
        const double rate = c_convergence_rate(p, ActivationKind::Linear, rule(), 0.2, 60);
        CHECK(rate == doctest::Approx(d.xi2).epsilon(0.02));
    }
    {
        const MeanFieldParams p = P(1.4, 0.1, 1.0);
        const DepthScales d = depth_scales(p, ActivationKind::Tanh, rule());
        const double rate = c_convergence_rate(p, ActivationKind::Tanh, rule(), 0.9, 120);
        CHECK(rate == doctest::Approx(d.xi2).epsilon(0.05));
    }
    // Identity correlation map: nothing decays.
    CHECK_THROWS_AS(c_convergence_rate(P(1.0, 0.0, 1.0), ActivationKind::Linear, rule(), 0.5, 50), ConvergenceError);
}

TEST_CASE("no dropout: xi1 <= xi2 for tanh") {
    for (double sb : {0.05, 0.5})
        for (int i = 0; i <= 25; ++i) {
            const double sw = 0.5 + 0.1 * i;
            const DepthScales d = depth_scales(P(sw, sb, 1.0), ActivationKind::Tanh, rule());
            if (!std::isfinite(d.xi1) || !std::isfinite(d.xi2)) continue;
            CAPTURE(sw);
            CAPTURE(sb);
            // Compared as rates: where c* = 1 the two scales coincide and xi
            // magnifies quadrature noise by xi^2.
            CHECK(1.0 / d.xi1 >= 1.0 / d.xi2 - 1e-9);
        }
}

TEST_CASE("chi1 is nondecreasing in sigma_w^2") {
    for (ActivationKind a : {ActivationKind::Tanh, ActivationKind::HardTanh, ActivationKind::Erf, ActivationKind::ReLU})
        for (double rho : {1.0, 0.8}) {
            double prev = 0.0;
            for (int i = 0; i < 20; ++i) {
                const double sw = 0.2 + 0.15 * i;
                double x;
                try {
                    x = chi1_at(P(sw, 0.1, rho), a, rule());
                } catch (const ConvergenceError&) {
                    continue;
                }
                CHECK(x >= prev - 1e-12);
                prev = x;
            }
        }
}
