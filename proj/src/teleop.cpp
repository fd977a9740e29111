#include "viasim/teleop.hpp"

#include "viasim/error.hpp"

#include <algorithm>
#include <cmath>

namespace viasim {

void CouplingGains::validate() const {
    if (!(p_gain >= 0.0) || !(i_gain >= 0.0)) throw InvalidArgument("gains: PI gains must be >= 0");
    if (!(integrator_clamp > 0.0)) throw InvalidArgument("gains: integrator clamp must be positive");
    if (!std::isfinite(c1) || !std::isfinite(c2)) throw InvalidArgument("gains: c1/c2 must be finite");
}

void LoopParams::validate() const {
    plant.validate();
    law.validate();
    gains.validate();
    if (!(handle_inertia > 0.0)) throw InvalidArgument("handle inertia must be positive");
}

TeleopState make_rest_state(const LoopParams& params, double position, Mode mode) {
    TeleopState s;
    s.handle.theta = position;
    s.handle.inertia = params.handle_inertia;
    s.plant = make_rest_plant(params.plant, params.gains.c1 * position,
                              impedance_for_mode(mode, 0.0, params.law));
    // The output rests where the spring is relaxed.
    s.plant.theta_out = params.gains.c1 * position;
    return s;
}

TeleopStep step_teleop(const TeleopState& state, Mode mode, const EnvironmentConfig& env,
                       const OperatorCommand& input, const HandleCoupling& coupling,
                       const LoopParams& params, long frame_index) {
    const HandleState& h = state.handle;
    if (!std::isfinite(h.theta) || !std::isfinite(h.omega) || !std::isfinite(h.pi_integrator) ||
        !std::isfinite(input.position) || !std::isfinite(input.velocity)) {
        throw StateCorruption("teleop: non-finite handle state or operator input", frame_index);
    }
    const double dt = params.plant.control_dt;
    const CouplingGains& g = params.gains;

    const double motor_setpoint = g.c1 * h.theta;
    const ImpedanceCommand cmd = impedance_for_mode(mode, h.omega, params.law);

    TeleopStep out;
    try {
        out.state.plant = step_plant(state.plant, motor_setpoint, cmd, env, params.plant);
    } catch (const StateCorruption& e) {
        throw StateCorruption(e.what(), frame_index);
    }
    const PlantState& p = out.state.plant;

    const double error = p.theta_out - h.theta;
    HandleState next = h;
    next.pi_integrator = std::clamp(h.pi_integrator + g.i_gain * error * dt, -g.integrator_clamp,
                                    g.integrator_clamp);
    const double feedback = g.p_gain * error + next.pi_integrator - g.c2 * p.env_torque;

    if (const auto* dyn = std::get_if<DynamicCoupling>(&coupling)) {
        const double torque = dyn->arm.k_arm * (input.position - h.theta) +
                              dyn->arm.b_arm * (input.velocity - h.omega) + feedback;
        next.omega = h.omega + dt * torque / h.inertia;
        next.theta = h.theta + dt * next.omega;
    } else {
        next.theta = input.position;
        next.omega = input.velocity;
    }
    if (!std::isfinite(next.theta) || !std::isfinite(next.omega))
        throw StateCorruption("teleop: handle state diverged", frame_index);

    out.state.handle = next;
    out.state.tick = state.tick + 1;

    SimFrame& f = out.frame;
    f.t = static_cast<double>(out.state.tick) * dt;
    f.theta_m = next.theta;
    f.omega_m = next.omega;
    f.motor_setpoint = motor_setpoint;
    f.theta_motor = p.theta_motor();
    f.theta_out = p.theta_out;
    f.omega_out = p.omega_out;
    f.k_set = cmd.k;
    f.b_set = cmd.b;
    f.k_actual = p.k_actual();
    f.b_actual = p.b_actual();
    f.env_torque = p.env_torque;
    f.feedback_torque = feedback;
    return out;
}

TeleopLoop::TeleopLoop(LoopParams params, Mode mode, EnvironmentConfig env, HandleCoupling coupling,
                       double initial_position)
    : params_(std::move(params)), mode_(mode), env_(env), coupling_(std::move(coupling)) {
    params_.validate();
    env_.validate();
    state_ = make_rest_state(params_, initial_position, mode_);
}

void TeleopLoop::set_environment(const EnvironmentConfig& env) {
    env.validate();
    env_ = env;
}

SimFrame TeleopLoop::tick(const OperatorCommand& input) {
    TeleopStep step = step_teleop(state_, mode_, env_, input, coupling_, params_, ticks_);
    state_ = step.state;
    ++ticks_;
    return step.frame;
}

std::vector<SimFrame> run_trace(const ScenarioSpec& scenario) {
    if (!(scenario.duration > 0.0)) throw InvalidArgument("trace duration must be positive");
    scenario.op.validate();
    const double dt = scenario.params.plant.control_dt;
    const auto n = static_cast<long>(std::llround(scenario.duration / dt));
    if (n < 1) throw InvalidArgument("trace duration shorter than one tick");

    const double start = scenario.initial_from_operator ? scenario.op.command(0.0).position
                                                        : scenario.initial_position;
    TeleopLoop loop(scenario.params, scenario.mode, scenario.env, scenario.op.coupling, start);
    std::vector<SimFrame> frames;
    frames.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const double t_next = static_cast<double>(i + 1) * dt;
        frames.push_back(loop.tick(scenario.op.command(t_next)));
    }
    return frames;
}

} // namespace viasim
