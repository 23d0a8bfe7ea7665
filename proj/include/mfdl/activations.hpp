#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>

namespace mfdl {

enum class ActivationKind { Linear, ReLU, Tanh, HardTanh, Erf };

inline constexpr ActivationKind kAllActivations[] = {ActivationKind::Linear, ActivationKind::ReLU,
                                                     ActivationKind::Tanh, ActivationKind::HardTanh,
                                                     ActivationKind::Erf};

// erf is rescaled to erf(sqrt(pi) z / 2) so that its slope at the origin is 1,
// making it directly comparable with tanh near criticality.
inline constexpr double kErfScale = 0.5 * std::numbers::inv_sqrtpi * std::numbers::pi;

inline double value(ActivationKind a, double z) {
    switch (a) {
        case ActivationKind::Linear: return z;
        case ActivationKind::ReLU: return z > 0.0 ? z : 0.0;
        case ActivationKind::Tanh: return std::tanh(z);
        case ActivationKind::HardTanh: return z < -1.0 ? -1.0 : (z > 1.0 ? 1.0 : z);
        case ActivationKind::Erf: return std::erf(kErfScale * z);
    }
    return z;
}

// Subgradient convention: ReLU'(0) = 0 and HardTanh'(+-1) = 0.
inline double derivative(ActivationKind a, double z) {
    switch (a) {
        case ActivationKind::Linear: return 1.0;
        case ActivationKind::ReLU: return z > 0.0 ? 1.0 : 0.0;
        case ActivationKind::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case ActivationKind::HardTanh: return (z > -1.0 && z < 1.0) ? 1.0 : 0.0;
        case ActivationKind::Erf:
            return 2.0 * std::numbers::inv_sqrtpi * kErfScale * std::exp(-kErfScale * kErfScale * z * z);
    }
    return 1.0;
}

/// Points where value or derivative is not smooth.
std::span<const double> breakpoints(ActivationKind a);

/// True when phi(s z) = s phi(z) for s > 0 (Linear, ReLU): then phi' statistics
/// do not depend on the pre-activation scale.
bool positively_homogeneous(ActivationKind a);

/// Case-insensitive parse of "linear", "relu", "tanh", "hardtanh", "erf".
/// Throws InvalidArgument on anything else.
ActivationKind parse_activation(std::string_view name);

std::string_view to_string(ActivationKind a);

// Elementwise helpers for the simulator hot loops.
void apply_value(ActivationKind a, std::span<const double> in, std::span<double> out);
void apply_derivative(ActivationKind a, std::span<const double> in, std::span<double> out);

}  // namespace mfdl
