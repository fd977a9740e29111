#include "viasim/plant.hpp"

#include "viasim/error.hpp"

#include <cmath>

namespace viasim {

void PlantParams::validate() const {
    if (!(inertia > 0.0)) throw InvalidArgument("plant: inertia must be positive");
    if (!(control_dt > 0.0)) throw InvalidArgument("plant: control_dt must be positive");
    if (physics_substeps < 1) throw InvalidArgument("plant: physics_substeps must be >= 1");
    const double nyquist = 0.5 / control_dt;
    if (!(joint_motor_cutoff > 0.0 && joint_motor_cutoff < nyquist))
        throw InvalidArgument("plant: joint motor cutoff must lie in (0, Nyquist)");
    if (!(stiffness_actuator_cutoff > 0.0 && stiffness_actuator_cutoff < nyquist))
        throw InvalidArgument("plant: stiffness actuator cutoff must lie in (0, Nyquist)");
    if (!(wall_stiffness >= 0.0)) throw InvalidArgument("plant: wall stiffness must be >= 0");
    if (!(wall_damping >= 0.0)) throw InvalidArgument("plant: wall damping must be >= 0");
}

void EnvironmentConfig::validate() const {
    if (kind == EnvironmentKind::Wall && !std::isfinite(wall_position))
        throw InvalidArgument("environment: wall position must be finite");
}

bool PlantState::finite() const {
    return std::isfinite(theta_out) && std::isfinite(omega_out) && std::isfinite(env_torque) &&
           std::isfinite(motor.value()) && std::isfinite(motor.derivative()) &&
           std::isfinite(stiffness.value()) && std::isfinite(stiffness.derivative()) &&
           std::isfinite(damping.value()) && std::isfinite(damping.derivative());
}

double PlantState::mechanical_energy(double inertia) const {
    const double deflection = theta_motor() - theta_out;
    return 0.5 * inertia * omega_out * omega_out + 0.5 * k_actual() * deflection * deflection;
}

PlantState make_rest_plant(const PlantParams& params, double position, ImpedanceCommand impedance) {
    params.validate();
    const double rate = 1.0 / params.substep();
    PlantState s;
    s.theta_out = position;
    s.motor = SecondOrderLowPass(params.joint_motor_cutoff, rate);
    s.stiffness = SecondOrderLowPass(params.stiffness_actuator_cutoff, rate);
    s.damping = SecondOrderLowPass(params.stiffness_actuator_cutoff, rate);
    s.motor.reset(position);
    s.stiffness.reset(impedance.k);
    s.damping.reset(impedance.b);
    return s;
}

double environment_torque(double theta_out, double omega_out, const EnvironmentConfig& env,
                          const PlantParams& params) {
    if (env.kind == EnvironmentKind::FreeAir) return 0.0;
    const double penetration = theta_out - env.wall_position;
    if (!(penetration > 0.0)) return 0.0;
    const double torque = -(params.wall_stiffness * penetration + params.wall_damping * omega_out);
    return torque < 0.0 ? torque : 0.0;
}

namespace {

struct MidpointResult {
    double theta;
    double omega;
};

// One implicit-midpoint step of I w' = c - kc theta - bc w.
MidpointResult midpoint_step(double theta0, double omega0, double c, double kc, double bc,
                             double h, double inertia) {
    const double a = h / inertia;
    const double rhs = omega0 + a * (c - kc * (theta0 + 0.25 * h * omega0) - 0.5 * bc * omega0);
    const double omega1 = rhs / (1.0 + 0.25 * a * kc * h + 0.5 * a * bc);
    return {theta0 + 0.5 * h * (omega0 + omega1), omega1};
}

} // namespace

PlantState step_plant(const PlantState& state, double motor_setpoint, ImpedanceCommand impedance,
                      const EnvironmentConfig& env, const PlantParams& params) {
    if (!state.finite() || !std::isfinite(motor_setpoint))
        throw StateCorruption("plant: non-finite state or motor setpoint");
    if (!std::isfinite(impedance.k) || !std::isfinite(impedance.b))
        throw StateCorruption("plant: non-finite impedance setpoint");
    if (impedance.k < 0.0 || impedance.b < 0.0)
        throw InvalidArgument("plant: negative impedance setpoint");

    const double h = params.substep();
    const bool wall = env.kind == EnvironmentKind::Wall;
    PlantState s = state;

    for (int i = 0; i < params.physics_substeps; ++i) {
        const double theta_m0 = s.motor.value(), omega_m0 = s.motor.derivative();
        const double k0 = s.stiffness.value(), b0 = s.damping.value();
        s.motor.step(motor_setpoint);
        s.stiffness.step(impedance.k);
        s.damping.step(impedance.b);

        const double theta_m = 0.5 * (theta_m0 + s.motor.value());
        const double omega_m = 0.5 * (omega_m0 + s.motor.derivative());
        const double k = 0.5 * (k0 + s.stiffness.value());
        const double b = 0.5 * (b0 + s.damping.value());

        const double c_free = k * theta_m + b * omega_m;
        MidpointResult next = midpoint_step(s.theta_out, s.omega_out, c_free, k, b, h, params.inertia);
        double torque = 0.0;

        if (wall && s.theta_out > env.wall_position) {
            const double kw = params.wall_stiffness, bw = params.wall_damping;
            const MidpointResult contact = midpoint_step(
                s.theta_out, s.omega_out, c_free + kw * env.wall_position, k + kw, b + bw, h,
                params.inertia);
            const double theta_mid = 0.5 * (s.theta_out + contact.theta);
            const double omega_mid = 0.5 * (s.omega_out + contact.omega);
            const double contact_torque = environment_torque(theta_mid, omega_mid, env, params);
            if (contact_torque < 0.0) {
                next = contact;
                torque = contact_torque;
            }
        }

        s.theta_out = next.theta;
        s.omega_out = next.omega;
        s.env_torque = torque;
    }

    if (!s.finite()) throw StateCorruption("plant: integration produced a non-finite state");
    return s;
}

} // namespace viasim
