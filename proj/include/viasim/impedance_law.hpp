#pragma once

#include <string>
#include <string_view>

namespace viasim {

/// Tool impedance setting: permanently high, permanently low, or adaptive.
enum class Mode { H, L, A };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

/// Constants of the slow-stiff/fast-soft law. Defaults are the published
/// values; `b_low_mode` is the damping of the permanent low setting.
struct AdaptiveLawParams {
    double k_max = 100.0;   // N m/rad
    double k_min = 10.0;    // N m/rad
    double d_max = 0.7;
    double d_min = 0.01;
    double a_var = 6.0;
    double v_min = 1.0;     // rad/s, upper velocity of a precision motion
    double v_max = 6.0;     // rad/s, lower velocity of a dynamic motion
    double inertia = 0.0125; // kg m^2
    double b_cap = 0.8;     // N m s/rad
    double b_low_mode = 0.01;

    void validate() const;
};

/// Stiffness and damping commanded to the tool actuator.
struct ImpedanceCommand {
    double k = 0.0; // N m/rad
    double b = 0.0; // N m s/rad

    bool operator==(const ImpedanceCommand&) const = default;
};

/// Stiffness as a function of handle speed; evaluated on |vm|.
double stiffness_law(double vm, const AdaptiveLawParams& p = {});

/// Damping ratio D(|vm|) before conversion to physical damping.
double damping_ratio_law(double vm, const AdaptiveLawParams& p = {});

/// Physical damping min(2 D sqrt(k m), b_cap); evaluated on |vm|.
double damping_law(double vm, const AdaptiveLawParams& p = {});

/// Command for a tool setting. H and L ignore `vm`.
ImpedanceCommand impedance_for_mode(Mode mode, double vm, const AdaptiveLawParams& p = {});

} // namespace viasim
