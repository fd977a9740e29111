#pragma once

#include "viasim/impedance_law.hpp"
#include "viasim/operator.hpp"
#include "viasim/plant.hpp"

#include <cstdint>
#include <vector>

namespace viasim {

/// Bilateral coupling gains. The shared position controller is
/// Cm = -C4 = p_gain + i_gain / s; C3 is not used.
struct CouplingGains {
    double p_gain = 0.8;
    double i_gain = 10.0;          // 1/s
    double c1 = 1.0;
    double c2 = 1.0;
    double integrator_clamp = 5.0; // N m, bound on the integral term

    void validate() const;
};

struct HandleState {
    double theta = 0.0;         // rad
    double omega = 0.0;         // rad/s
    double inertia = 0.0125;    // kg m^2 (not published; stand-in value)
    double pi_integrator = 0.0; // N m, integral term of the coupling
};

/// One control tick of every signal in the loop.
struct SimFrame {
    double t = 0.0;
    double theta_m = 0.0;
    double omega_m = 0.0;
    double motor_setpoint = 0.0;
    double theta_motor = 0.0;
    double theta_out = 0.0;
    double omega_out = 0.0;
    double k_set = 0.0;
    double b_set = 0.0;
    double k_actual = 0.0;
    double b_actual = 0.0;
    double env_torque = 0.0;
    double feedback_torque = 0.0;

    bool operator==(const SimFrame&) const = default;
};

struct LoopParams {
    PlantParams plant;
    AdaptiveLawParams law;
    CouplingGains gains;
    double handle_inertia = 0.0125;

    void validate() const;
};

struct TeleopState {
    long tick = 0; // time is tick * control_dt
    HandleState handle;
    PlantState plant;
};

struct TeleopStep {
    TeleopState state;
    SimFrame frame;
};

/// Whole loop at rest at `position`, filters settled on the mode's rest command.
TeleopState make_rest_state(const LoopParams& params, double position, Mode mode);

/// One 1 kHz tick: setpoints from the handle, plant step, coupling torque,
/// handle update, frame emission. `frame_index` only labels diagnostics.
TeleopStep step_teleop(const TeleopState& state, Mode mode, const EnvironmentConfig& env,
                       const OperatorCommand& input, const HandleCoupling& coupling,
                       const LoopParams& params, long frame_index = -1);

/// Pull-based scheduler around step_teleop. The owner supplies the clock
/// by calling tick(); batch runs and the live session share this class.
class TeleopLoop {
public:
    TeleopLoop(LoopParams params, Mode mode, EnvironmentConfig env, HandleCoupling coupling,
               double initial_position);

    SimFrame tick(const OperatorCommand& input);

    void set_mode(Mode mode) { mode_ = mode; }
    void set_environment(const EnvironmentConfig& env);
    Mode mode() const { return mode_; }
    const EnvironmentConfig& environment() const { return env_; }
    const TeleopState& state() const { return state_; }
    const LoopParams& params() const { return params_; }
    long ticks() const { return ticks_; }

private:
    LoopParams params_;
    Mode mode_;
    EnvironmentConfig env_;
    HandleCoupling coupling_;
    TeleopState state_;
    long ticks_ = 0;
};

/// Everything needed to reproduce one trace.
struct ScenarioSpec {
    double duration = 1.0; // s
    Mode mode = Mode::H;
    EnvironmentConfig env;
    OperatorModel op;
    LoopParams params;
    std::uint64_t seed = 0; // provenance of the operator draw; echoed in outputs
    double initial_position = 0.0;
    bool initial_from_operator = true; // start at op.command(0) instead
};

std::vector<SimFrame> run_trace(const ScenarioSpec& scenario);

} // namespace viasim
