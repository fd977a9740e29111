#pragma once

#include "viasim/impedance_law.hpp"
#include "viasim/lowpass.hpp"

namespace viasim {

/// Physical constants of the simulated tool device.
struct PlantParams {
    double inertia = 0.0125;                // kg m^2, output link
    double joint_motor_cutoff = 20.0;       // Hz
    double stiffness_actuator_cutoff = 10.0; // Hz
    double wall_stiffness = 10000.0;        // N m/rad
    double wall_damping = 20.0;             // N m s/rad
    double control_dt = 0.001;              // s
    int physics_substeps = 10;

    double substep() const { return control_dt / physics_substeps; }
    void validate() const;
};

enum class EnvironmentKind { FreeAir, Wall };

/// Free air, or a one-sided wall whose free side is below `wall_position`.
struct EnvironmentConfig {
    EnvironmentKind kind = EnvironmentKind::FreeAir;
    double wall_position = 0.0; // rad

    static EnvironmentConfig free_air() { return {}; }
    static EnvironmentConfig wall(double position) { return {EnvironmentKind::Wall, position}; }
    void validate() const;
};

/// Full dynamic state of the tool device including the actuator filters.
struct PlantState {
    double theta_out = 0.0;  // rad
    double omega_out = 0.0;  // rad/s
    double env_torque = 0.0; // N m, torque applied during the last substep
    SecondOrderLowPass motor;     // joint motor position
    SecondOrderLowPass stiffness; // actual stiffness
    SecondOrderLowPass damping;   // actual damping

    double theta_motor() const { return motor.value(); }
    double omega_motor() const { return motor.derivative(); }
    double k_actual() const { return stiffness.value(); }
    double b_actual() const { return damping.value(); }

    bool finite() const;

    /// 0.5 I w^2 + 0.5 k (theta_motor - theta_out)^2
    double mechanical_energy(double inertia) const;
};

/// Rest state at `position` with filters settled on `impedance`.
PlantState make_rest_plant(const PlantParams& params, double position, ImpedanceCommand impedance);

/// Penalty torque of the environment. Zero in free air and whenever the
/// output is outside the wall; never pulls the output into the wall.
double environment_torque(double theta_out, double omega_out, const EnvironmentConfig& env,
                          const PlantParams& params = {});

/// Advance the plant by one control tick. Each substep updates the actuator
/// filters, then integrates the output inertia with the implicit midpoint
/// rule (spring-damper and active wall contact treated implicitly).
PlantState step_plant(const PlantState& state, double motor_setpoint, ImpedanceCommand impedance,
                      const EnvironmentConfig& env, const PlantParams& params);

} // namespace viasim
