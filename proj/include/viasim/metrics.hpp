#pragma once

#include "viasim/teleop.hpp"

#include <optional>
#include <span>

#include <nlohmann/json_fwd.hpp>

namespace viasim {

struct SettlingSpec {
    double move_threshold = 0.03; // rad, handle excursion that counts as moving
    double settle_band = 0.03;    // rad, tool error band
    double settle_hold = 0.5;     // s, time the error must stay in the band

    void validate() const;
};

/// Where the time weight of the ITAE integral starts.
enum class ItaeOrigin { MoveInstant, TargetJump };

struct PrecisionOutcome {
    bool moved = false;   // false: handle never left the threshold (degenerate)
    bool settled = false; // false: no full hold window inside the trace
    double dead_time = 0.0;  // s, jump to move instant
    double move_time = 0.0;  // s, absolute
    double settle_time = 0.0; // s, absolute start of the hold window
    std::optional<double> travel_time; // s, present iff settled
    double censored_travel_time = 0.0; // travel time, or trace end - move instant
    double itae = 0.0; // rad s^2, over the travel window (or to trace end)

    bool operator==(const PrecisionOutcome&) const = default;
};

struct DynamicOutcome {
    bool impact = false; // false: the tool never reached the wall (error outcome)
    double impact_time = 0.0;   // s
    double max_tool_vel = 0.0;  // rad/s, forward
    double max_handle_vel = 0.0; // rad/s, forward
    double gain = 0.0;

    bool operator==(const DynamicOutcome&) const = default;
};

/// Travel time, dead time and ITAE of one precision trial (offline pass).
PrecisionOutcome precision_metrics(std::span<const SimFrame> trace, double target_jump_time,
                                   double target_pos, const SettlingSpec& spec = {},
                                   ItaeOrigin origin = ItaeOrigin::MoveInstant);

/// Peak forward velocities before the first wall crossing and their ratio.
/// Forward is the direction from the first frame's tool position to the wall.
DynamicOutcome dynamic_metrics(std::span<const SimFrame> trace, double wall_position);

/// Streaming counterpart of precision_metrics, fed one frame at a time.
class PrecisionScorer {
public:
    PrecisionScorer(double target_jump_time, double target_pos, SettlingSpec spec = {},
                    ItaeOrigin origin = ItaeOrigin::MoveInstant);

    void add(const SimFrame& frame);
    bool settled() const { return settled_; }
    PrecisionOutcome outcome() const;

private:
    double jump_time_;
    double target_;
    SettlingSpec spec_;
    ItaeOrigin origin_;

    bool have_reference_ = false;
    double reference_ = 0.0;
    double jump_frame_time_ = 0.0;
    bool moved_ = false;
    double move_time_ = 0.0;
    bool integrating_ = false;
    double integral_ = 0.0;
    double prev_t_ = 0.0;
    double prev_value_ = 0.0;
    bool in_run_ = false;
    double run_start_ = 0.0;
    double run_integral_ = 0.0;
    bool settled_ = false;
    double last_t_ = 0.0;
};

/// Streaming counterpart of dynamic_metrics.
class DynamicScorer {
public:
    explicit DynamicScorer(double wall_position);

    void add(const SimFrame& frame);
    bool impacted() const { return outcome_.impact; }
    DynamicOutcome outcome() const { return outcome_; }

private:
    double wall_;
    bool started_ = false;
    double direction_ = 1.0;
    DynamicOutcome outcome_;
};

void to_json(nlohmann::json& j, const PrecisionOutcome& o);
void to_json(nlohmann::json& j, const DynamicOutcome& o);

} // namespace viasim
