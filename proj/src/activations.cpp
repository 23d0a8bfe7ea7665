#include "mfdl/activations.hpp"

#include "mfdl/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace mfdl {

namespace {
constexpr std::array<double, 1> kReluKinks{0.0};
constexpr std::array<double, 2> kHardTanhKinks{-1.0, 1.0};

template <class F>
void map_into(std::span<const double> in, std::span<double> out, F f) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
}
}  // namespace

std::span<const double> breakpoints(ActivationKind a) {
    switch (a) {
        case ActivationKind::ReLU: return kReluKinks;
        case ActivationKind::HardTanh: return kHardTanhKinks;
        default: return {};
    }
}

bool positively_homogeneous(ActivationKind a) {
    return a == ActivationKind::Linear || a == ActivationKind::ReLU;
}

ActivationKind parse_activation(std::string_view name) {
    std::string key;
    for (char ch : name)
        if (ch != '_' && ch != '-') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (key == "linear") return ActivationKind::Linear;
    if (key == "relu") return ActivationKind::ReLU;
    if (key == "tanh") return ActivationKind::Tanh;
    if (key == "hardtanh") return ActivationKind::HardTanh;
    if (key == "erf") return ActivationKind::Erf;
    throw InvalidArgument("unknown activation '" + std::string(name) +
                          "' (expected linear, relu, tanh, hardtanh or erf)");
}

std::string_view to_string(ActivationKind a) {
    switch (a) {
        case ActivationKind::Linear: return "linear";
        case ActivationKind::ReLU: return "relu";
        case ActivationKind::Tanh: return "tanh";
        case ActivationKind::HardTanh: return "hardtanh";
        case ActivationKind::Erf: return "erf";
    }
    return "?";
}

void apply_value(ActivationKind a, std::span<const double> in, std::span<double> out) {
    switch (a) {
        case ActivationKind::Linear: std::copy(in.begin(), in.end(), out.begin()); return;
        case ActivationKind::ReLU: map_into(in, out, [](double z) { return z > 0.0 ? z : 0.0; }); return;
        case ActivationKind::Tanh: map_into(in, out, [](double z) { return std::tanh(z); }); return;
        case ActivationKind::HardTanh: map_into(in, out, [](double z) { return std::clamp(z, -1.0, 1.0); }); return;
        case ActivationKind::Erf: map_into(in, out, [](double z) { return std::erf(kErfScale * z); }); return;
    }
}

void apply_derivative(ActivationKind a, std::span<const double> in, std::span<double> out) {
    map_into(in, out, [a](double z) { return derivative(a, z); });
}

}  // namespace mfdl
