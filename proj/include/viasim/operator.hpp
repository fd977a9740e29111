#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

namespace viasim {

/// Position and velocity of a trajectory sample.
struct TrajectoryPoint {
    double position = 0.0; // rad
    double velocity = 0.0; // rad/s
};

/// What the operator does this tick. For kinematic coupling the handle is
/// placed at (position, velocity); for dynamic coupling it is the reference
/// the arm impedance pulls the handle towards.
using OperatorCommand = TrajectoryPoint;

/// Human arm stand-in for dynamic coupling. Order-of-magnitude defaults.
struct ArmImpedance {
    double k_arm = 30.0; // N m/rad
    double b_arm = 1.0;  // N m s/rad
};

struct KinematicCoupling {};
struct DynamicCoupling {
    ArmImpedance arm;
};
using HandleCoupling = std::variant<KinematicCoupling, DynamicCoupling>;

/// Rest-to-rest minimum-jerk reach starting at `onset`.
struct MinJerkReach {
    double start = 0.0;    // rad
    double distance = 0.3; // rad, signed
    double duration = 0.4; // s
    double onset = 0.0;    // s
};

/// Backswing-then-forward hammer stroke starting at `onset`: a half-cosine
/// back by `backswing`, then a half-cosine forward at the same frequency
/// whose peak velocity is `peak_handle_velocity`. Both halves last
/// 1/(2 f), so the whole stroke spans one period of `strike_frequency`.
struct StrikeProfile {
    double start = 0.0;                 // rad
    double backswing = 0.10;            // rad
    double strike_frequency = 4.5;      // Hz
    double peak_handle_velocity = 5.0;  // rad/s
    double onset = 0.0;                 // s

    double forward_travel() const; // rad, from the backswing extreme
    double end_position() const;   // rad
};

/// Recorded handle positions, linearly interpolated.
struct Playback {
    std::vector<double> t;
    std::vector<double> position;
};

using Motion = std::variant<MinJerkReach, StrikeProfile, Playback>;

struct OperatorModel {
    Motion motion = MinJerkReach{};
    HandleCoupling coupling = KinematicCoupling{};

    OperatorCommand command(double t) const;
    void validate() const;
};

TrajectoryPoint min_jerk_trajectory(double t, double distance, double duration);

/// Displacement from `spec.start`, with `t` measured from the onset.
TrajectoryPoint strike_trajectory(double t, const StrikeProfile& spec);

TrajectoryPoint playback_sample(double t, const Playback& playback);

/// Two-column CSV (t, position); a non-numeric first line is a header.
Playback load_playback_csv(const std::filesystem::path& path);

/// Nominal behaviour of the synthetic cohort and the size of the
/// between-participant and between-trial perturbations.
struct CohortConfig {
    double reach_duration = 0.28;      // s
    double reaction_time = 0.25;       // s
    double strike_frequency = 4.5;     // Hz
    double peak_handle_velocity = 5.0; // rad/s
    double backswing = 0.10;           // rad
    double strike_gap = 0.015;         // rad, start below the wall
    double participant_jitter = 0.2;   // +-fraction between participants
    double trial_jitter = 0.05;        // +-fraction between trials
    bool dynamic_coupling = false;
    ArmImpedance arm;
};

/// Parameters of one scripted operator.
struct VirtualParticipant {
    std::uint64_t seed = 0;
    double reach_duration = 0.28;
    double reaction_time = 0.25;
    double strike_frequency = 4.5;
    double peak_handle_velocity = 5.0;
    double backswing = 0.10;
    double strike_gap = 0.015;
    double trial_jitter = 0.05;
    HandleCoupling coupling = KinematicCoupling{};

    bool operator==(const VirtualParticipant&) const;

    /// Reach from `from` to `to`. `trial_seed` draws the per-trial jitter.
    OperatorModel precision_operator(double from, double to, std::uint64_t trial_seed) const;
    /// Strike onto a wall at `target`, starting `strike_gap` below it.
    OperatorModel dynamic_operator(double target, std::uint64_t trial_seed) const;
    double strike_start(double target) const { return target - strike_gap; }
};

VirtualParticipant make_virtual_participant(std::uint64_t seed, const CohortConfig& cohort = {});

/// Deterministic 64-bit seed mixing (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

} // namespace viasim
