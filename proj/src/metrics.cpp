#include "viasim/metrics.hpp"

#include "viasim/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace viasim {

namespace {

// Grid times are sums of 1 ms steps; compare durations with a small slack.
constexpr double kTimeEps = 1e-9;

} // namespace

void SettlingSpec::validate() const {
    if (!(move_threshold > 0.0) || !(settle_band > 0.0) || !(settle_hold > 0.0))
        throw InvalidArgument("settling spec: thresholds and hold time must be positive");
}

PrecisionOutcome precision_metrics(std::span<const SimFrame> trace, double target_jump_time,
                                   double target_pos, const SettlingSpec& spec, ItaeOrigin origin) {
    spec.validate();
    PrecisionOutcome out;
    const auto n = trace.size();

    std::size_t jump = 0;
    while (jump < n && trace[jump].t < target_jump_time - kTimeEps) ++jump;
    if (jump == n) return out;

    const double reference = trace[jump].theta_m;
    std::size_t move = jump;
    while (move < n && !(std::abs(trace[move].theta_m - reference) > spec.move_threshold)) ++move;
    if (move == n) return out;

    out.moved = true;
    out.move_time = trace[move].t;
    out.dead_time = out.move_time - target_jump_time;

    // Earliest start of an uninterrupted in-band run lasting settle_hold.
    std::size_t settle = n;
    std::size_t run = n;
    for (std::size_t i = move; i < n; ++i) {
        if (std::abs(trace[i].theta_out - target_pos) < spec.settle_band) {
            if (run == n) run = i;
            if (trace[i].t - trace[run].t >= spec.settle_hold - kTimeEps) {
                settle = run;
                break;
            }
        } else {
            run = n;
        }
    }

    const std::size_t first = origin == ItaeOrigin::MoveInstant ? move : jump;
    const double t0 = origin == ItaeOrigin::MoveInstant ? trace[move].t : trace[jump].t;
    const std::size_t last = settle == n ? n - 1 : settle;
    double itae = 0.0;
    for (std::size_t i = first + 1; i <= last; ++i) {
        const double a = (trace[i - 1].t - t0) * std::abs(trace[i - 1].theta_out - target_pos);
        const double b = (trace[i].t - t0) * std::abs(trace[i].theta_out - target_pos);
        itae += 0.5 * (a + b) * (trace[i].t - trace[i - 1].t);
    }
    out.itae = itae;

    if (settle != n) {
        out.settled = true;
        out.settle_time = trace[settle].t;
        out.travel_time = out.settle_time - out.move_time;
        out.censored_travel_time = *out.travel_time;
    } else {
        out.censored_travel_time = trace[n - 1].t - out.move_time;
    }
    return out;
}

DynamicOutcome dynamic_metrics(std::span<const SimFrame> trace, double wall_position) {
    DynamicOutcome out;
    if (trace.empty()) return out;
    const double direction = wall_position >= trace.front().theta_out ? 1.0 : -1.0;
    double tool = 0.0, handle = 0.0;
    for (const auto& f : trace) {
        tool = std::max(tool, direction * f.omega_out);
        handle = std::max(handle, direction * f.omega_m);
        if (direction * (f.theta_out - wall_position) >= 0.0) {
            out.impact = true;
            out.impact_time = f.t;
            break;
        }
    }
    if (!out.impact) return out;
    out.max_tool_vel = tool;
    out.max_handle_vel = handle;
    out.gain = handle > 0.0 ? tool / handle : std::numeric_limits<double>::quiet_NaN();
    return out;
}

PrecisionScorer::PrecisionScorer(double target_jump_time, double target_pos, SettlingSpec spec,
                                 ItaeOrigin origin)
    : jump_time_(target_jump_time), target_(target_pos), spec_(spec), origin_(origin) {
    spec_.validate();
}

void PrecisionScorer::add(const SimFrame& f) {
    if (settled_) return;
    if (!have_reference_) {
        if (f.t < jump_time_ - kTimeEps) return;
        have_reference_ = true;
        reference_ = f.theta_m;
        jump_frame_time_ = f.t;
        if (origin_ == ItaeOrigin::TargetJump) {
            integrating_ = true;
            prev_t_ = f.t;
            prev_value_ = 0.0;
        }
    }
    last_t_ = f.t;

    if (!moved_) {
        if (!(std::abs(f.theta_m - reference_) > spec_.move_threshold)) return;
        moved_ = true;
        move_time_ = f.t;
        if (origin_ == ItaeOrigin::MoveInstant) {
            integrating_ = true;
            prev_t_ = f.t;
            prev_value_ = 0.0;
        }
    }

    const double t0 = origin_ == ItaeOrigin::MoveInstant ? move_time_ : jump_frame_time_;
    const double value = (f.t - t0) * std::abs(f.theta_out - target_);
    if (f.t > prev_t_) {
        integral_ += 0.5 * (prev_value_ + value) * (f.t - prev_t_);
        prev_t_ = f.t;
        prev_value_ = value;
    }

    if (std::abs(f.theta_out - target_) < spec_.settle_band) {
        if (!in_run_) {
            in_run_ = true;
            run_start_ = f.t;
            run_integral_ = integral_;
        }
        if (f.t - run_start_ >= spec_.settle_hold - kTimeEps) settled_ = true;
    } else {
        in_run_ = false;
    }
}

PrecisionOutcome PrecisionScorer::outcome() const {
    PrecisionOutcome out;
    if (!moved_) return out;
    out.moved = true;
    out.move_time = move_time_;
    out.dead_time = move_time_ - jump_time_;
    if (settled_) {
        out.settled = true;
        out.settle_time = run_start_;
        out.travel_time = run_start_ - move_time_;
        out.censored_travel_time = *out.travel_time;
        out.itae = run_integral_;
    } else {
        out.censored_travel_time = last_t_ - move_time_;
        out.itae = integral_;
    }
    return out;
}

DynamicScorer::DynamicScorer(double wall_position) : wall_(wall_position) {}

void DynamicScorer::add(const SimFrame& f) {
    if (outcome_.impact) return;
    if (!started_) {
        started_ = true;
        direction_ = wall_ >= f.theta_out ? 1.0 : -1.0;
    }
    outcome_.max_tool_vel = std::max(outcome_.max_tool_vel, direction_ * f.omega_out);
    outcome_.max_handle_vel = std::max(outcome_.max_handle_vel, direction_ * f.omega_m);
    if (direction_ * (f.theta_out - wall_) >= 0.0) {
        outcome_.impact = true;
        outcome_.impact_time = f.t;
        outcome_.gain = outcome_.max_handle_vel > 0.0
                            ? outcome_.max_tool_vel / outcome_.max_handle_vel
                            : std::numeric_limits<double>::quiet_NaN();
    }
}

void to_json(nlohmann::json& j, const PrecisionOutcome& o) {
    j = nlohmann::json{{"task", "precision"},
                       {"moved", o.moved},
                       {"settled", o.settled},
                       {"deadTime", o.dead_time},
                       {"moveTime", o.move_time},
                       {"travelTime", o.travel_time ? nlohmann::json(*o.travel_time) : nlohmann::json()},
                       {"censoredTravelTime", o.censored_travel_time},
                       {"itae", o.itae}};
    if (o.settled) j["settleTime"] = o.settle_time;
}

void to_json(nlohmann::json& j, const DynamicOutcome& o) {
    j = nlohmann::json{{"task", "dynamic"},
                       {"impact", o.impact},
                       {"impactTime", o.impact ? nlohmann::json(o.impact_time) : nlohmann::json()},
                       {"maxToolVel", o.max_tool_vel},
                       {"maxHandleVel", o.max_handle_vel},
                       {"gain", o.impact && std::isfinite(o.gain) ? nlohmann::json(o.gain)
                                                                    : nlohmann::json()}};
}

} // namespace viasim
