#include <doctest.h>

#include "mfdl/activations.hpp"
#include "mfdl/error.hpp"
#include "mfdl/meanfield.hpp"

#include <cmath>
#include <vector>

using namespace mfdl;

TEST_CASE("reference values") {
    for (ActivationKind a : kAllActivations) CHECK(value(a, 0.0) == 0.0);
    CHECK(value(ActivationKind::ReLU, -2.0) == 0.0);
    CHECK(value(ActivationKind::HardTanh, 0.5) == 0.5);
    CHECK(value(ActivationKind::HardTanh, 3.0) == 1.0);
    CHECK(value(ActivationKind::Tanh, 1.0) == std::tanh(1.0));
    CHECK(value(ActivationKind::Tanh, 1.0) == doctest::Approx(0.7615941559557649));

    CHECK(derivative(ActivationKind::Linear, -123.0) == 1.0);
    CHECK(derivative(ActivationKind::ReLU, 3.0) == 1.0);
    CHECK(derivative(ActivationKind::ReLU, -3.0) == 0.0);
    const double h = 1e-6;
    const double fd = (std::tanh(0.5 + h) - std::tanh(0.5 - h)) / (2 * h);
    CHECK(std::abs(derivative(ActivationKind::Tanh, 0.5) - fd) < 1e-9);
    CHECK(derivative(ActivationKind::Tanh, 0.5) == doctest::Approx(0.786448).epsilon(1e-6));
}

TEST_CASE("subgradient convention at kinks") {
    CHECK(derivative(ActivationKind::ReLU, 0.0) == 0.0);
    CHECK(derivative(ActivationKind::HardTanh, 1.0) == 0.0);
    CHECK(derivative(ActivationKind::HardTanh, -1.0) == 0.0);
}

TEST_CASE("erf is scaled to unit slope at the origin") {
    CHECK(derivative(ActivationKind::Erf, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(value(ActivationKind::Erf, 0.7) == std::erf(std::sqrt(M_PI) * 0.7 / 2));
}

TEST_CASE("derivatives match central differences on smooth kinds") {
    const double h = 1e-5;
    for (ActivationKind a : {ActivationKind::Linear, ActivationKind::Tanh, ActivationKind::Erf})
        for (double z = -5.0; z <= 5.0; z += 0.125) {
            const double fd = (value(a, z + h) - value(a, z - h)) / (2 * h);
            CAPTURE(to_string(a));
            CAPTURE(z);
            CHECK(std::abs(derivative(a, z) - fd) < 1e-6);
        }
}

TEST_CASE("piecewise kinds away from kinks") {
    const double h = 1e-6;
    for (ActivationKind a : {ActivationKind::ReLU, ActivationKind::HardTanh})
        for (double z = -3.05; z <= 3.0; z += 0.1) {
            const double fd = (value(a, z + h) - value(a, z - h)) / (2 * h);
            CHECK(std::abs(derivative(a, z) - fd) < 1e-8);
        }
}

TEST_CASE("shape properties") {
    for (double z = -6.0; z <= 6.0; z += 0.37) {
        if (z != 0.0) CHECK(value(ActivationKind::ReLU, z) == z * derivative(ActivationKind::ReLU, z));
        for (ActivationKind a : {ActivationKind::Linear, ActivationKind::Tanh, ActivationKind::HardTanh,
                                 ActivationKind::Erf})
            CHECK(value(a, -z) == -value(a, z));
        for (ActivationKind a : kAllActivations) CHECK(std::abs(derivative(a, z)) <= 1.0);
    }
}

TEST_CASE("kink convention does not reach the quadrature") {
    // Flip the derivative value at the kinks and recompute E[phi'^2]: equal.
    const QuadratureRule rule = make_rule();
    for (ActivationKind a : {ActivationKind::ReLU, ActivationKind::HardTanh})
        for (double q : {0.3, 1.0, 4.0}) {
            const auto base = [a](double u) { return derivative(a, u) * derivative(a, u); };
            const auto flipped = [a](double u) {
                const bool kink = (a == ActivationKind::ReLU && u == 0.0) ||
                                  (a == ActivationKind::HardTanh && std::abs(u) == 1.0);
                return kink ? 1.0 : derivative(a, u) * derivative(a, u);
            };
            CHECK(activation_average(base, q, a, rule) == activation_average(flipped, q, a, rule));
        }
}

TEST_CASE("names round-trip and bad names are rejected") {
    for (ActivationKind a : kAllActivations) CHECK(parse_activation(to_string(a)) == a);
    CHECK(parse_activation("ReLU") == ActivationKind::ReLU);
    CHECK(parse_activation("HARDTANH") == ActivationKind::HardTanh);
    CHECK_THROWS_AS(parse_activation("sigmoid"), InvalidArgument);
    CHECK_THROWS_AS(parse_activation(""), InvalidArgument);
}

TEST_CASE("vector helpers agree with the scalar forms") {
    std::vector<double> in, out(41), dout(41);
    for (int i = 0; i <= 40; ++i) in.push_back(-4.0 + 0.2 * i);
    for (ActivationKind a : kAllActivations) {
        apply_value(a, in, out);
        apply_derivative(a, in, dout);
        for (std::size_t i = 0; i < in.size(); ++i) {
            CHECK(out[i] == value(a, in[i]));
            CHECK(dout[i] == derivative(a, in[i]));
        }
    }
}

TEST_CASE("homogeneity flags") {
    CHECK(positively_homogeneous(ActivationKind::Linear));
    CHECK(positively_homogeneous(ActivationKind::ReLU));
    CHECK_FALSE(positively_homogeneous(ActivationKind::Tanh));
    CHECK_FALSE(positively_homogeneous(ActivationKind::HardTanh));
    CHECK_FALSE(positively_homogeneous(ActivationKind::Erf));
}
