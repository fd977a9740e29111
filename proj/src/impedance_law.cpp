#include "viasim/impedance_law.hpp"

#include "viasim/error.hpp"

#include <algorithm>
#include <cmath>

namespace viasim {

std::string_view to_string(Mode mode) {
    switch (mode) {
    case Mode::H: return "H";
    case Mode::L: return "L";
    case Mode::A: return "A";
    }
    return "?";
}

Mode parse_mode(std::string_view text) {
    if (text == "H" || text == "h") return Mode::H;
    if (text == "L" || text == "l") return Mode::L;
    if (text == "A" || text == "a") return Mode::A;
    throw InvalidArgument("unknown mode '" + std::string(text) + "' (expected H, L or A)");
}

void AdaptiveLawParams::validate() const {
    if (!(k_max > k_min && k_min > 0.0)) throw InvalidArgument("law: need k_max > k_min > 0");
    if (!(d_max > d_min && d_min > 0.0)) throw InvalidArgument("law: need d_max > d_min > 0");
    if (!(v_max > v_min && v_min >= 0.0)) throw InvalidArgument("law: need v_max > v_min >= 0");
    if (!(a_var > 0.0)) throw InvalidArgument("law: a_var must be positive");
    if (!(b_cap > 0.0)) throw InvalidArgument("law: b_cap must be positive");
    if (!(inertia > 0.0)) throw InvalidArgument("law: inertia must be positive");
    if (!(b_low_mode > 0.0)) throw InvalidArgument("law: b_low_mode must be positive");
}

namespace {

// Shared exponential transition exp(-a (|vm| - vmin) / (vmax - vmin)).
double transition(double vm, const AdaptiveLawParams& p) {
    return std::exp(-p.a_var * (std::abs(vm) - p.v_min) / (p.v_max - p.v_min));
}

} // namespace

double stiffness_law(double vm, const AdaptiveLawParams& p) {
    return std::min(p.k_max, (p.k_max - p.k_min) * transition(vm, p) + p.k_min);
}

double damping_ratio_law(double vm, const AdaptiveLawParams& p) {
    return (p.d_max - p.d_min) * transition(vm, p) + p.d_min;
}

double damping_law(double vm, const AdaptiveLawParams& p) {
    const double k = stiffness_law(vm, p);
    return std::min(2.0 * damping_ratio_law(vm, p) * std::sqrt(k * p.inertia), p.b_cap);
}

ImpedanceCommand impedance_for_mode(Mode mode, double vm, const AdaptiveLawParams& p) {
    switch (mode) {
    case Mode::H: return {p.k_max, p.b_cap};
    case Mode::L: return {p.k_min, p.b_low_mode};
    case Mode::A: return {stiffness_law(vm, p), damping_law(vm, p)};
    }
    return {p.k_max, p.b_cap};
}

} // namespace viasim
