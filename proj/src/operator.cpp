#include "viasim/operator.hpp"

#include "viasim/error.hpp"

#include "random_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace viasim {

namespace {

constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

using detail::unit_uniform;

double jitter_factor(std::mt19937_64& rng, double fraction) {
    return 1.0 + fraction * (2.0 * unit_uniform(rng) - 1.0);
}

} // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

TrajectoryPoint min_jerk_trajectory(double t, double distance, double duration) {
    if (!(duration > 0.0)) throw InvalidArgument("min-jerk: duration must be positive");
    const double tau = std::clamp(t / duration, 0.0, 1.0);
    const double tau2 = tau * tau, tau3 = tau2 * tau;
    const double pos = distance * (10.0 * tau3 - 15.0 * tau3 * tau + 6.0 * tau3 * tau2);
    const double vel = distance / duration * (30.0 * tau2 - 60.0 * tau3 + 30.0 * tau3 * tau);
    return {pos, vel};
}

double StrikeProfile::forward_travel() const {
    return peak_handle_velocity / (kPi * strike_frequency);
}

double StrikeProfile::end_position() const {
    return start - backswing + forward_travel();
}

TrajectoryPoint strike_trajectory(double t, const StrikeProfile& spec) {
    const double w = 2.0 * kPi * spec.strike_frequency;
    const double half = 0.5 / spec.strike_frequency;
    if (t <= 0.0) return {0.0, 0.0};
    if (t < half) {
        return {-0.5 * spec.backswing * (1.0 - std::cos(w * t)),
                -0.5 * spec.backswing * w * std::sin(w * t)};
    }
    const double travel = spec.forward_travel();
    if (t < 2.0 * half) {
        const double u = t - half;
        return {-spec.backswing + 0.5 * travel * (1.0 - std::cos(w * u)),
                0.5 * travel * w * std::sin(w * u)};
    }
    return {travel - spec.backswing, 0.0};
}

TrajectoryPoint playback_sample(double t, const Playback& playback) {
    const auto& ts = playback.t;
    const auto& xs = playback.position;
    if (ts.empty()) throw InvalidArgument("playback: no samples");
    if (ts.size() == 1 || t <= ts.front()) return {xs.front(), 0.0};
    if (t >= ts.back()) return {xs.back(), 0.0};
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const auto i = static_cast<std::size_t>(it - ts.begin());
    const double dt = ts[i] - ts[i - 1];
    const double slope = (xs[i] - xs[i - 1]) / dt;
    return {xs[i - 1] + slope * (t - ts[i - 1]), slope};
}

Playback load_playback_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("playback: cannot open " + path.string());
    Playback pb;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double t = 0.0, x = 0.0;
        if (!(row >> t >> x)) {
            if (first) {
                first = false;
                continue;
            }
            throw InvalidArgument("playback: malformed row '" + line + "'");
        }
        first = false;
        if (!pb.t.empty() && !(t > pb.t.back()))
            throw InvalidArgument("playback: timestamps must be strictly increasing");
        pb.t.push_back(t);
        pb.position.push_back(x);
    }
    if (pb.t.empty()) throw InvalidArgument("playback: file has no samples");
    return pb;
}

OperatorCommand OperatorModel::command(double t) const {
    return std::visit(
        Overloaded{
            [t](const MinJerkReach& m) {
                const auto p = min_jerk_trajectory(t - m.onset, m.distance, m.duration);
                return OperatorCommand{m.start + p.position, p.velocity};
            },
            [t](const StrikeProfile& s) {
                const auto p = strike_trajectory(t - s.onset, s);
                return OperatorCommand{s.start + p.position, p.velocity};
            },
            [t](const Playback& pb) { return playback_sample(t, pb); },
        },
        motion);
}

void OperatorModel::validate() const {
    std::visit(Overloaded{
                   [](const MinJerkReach& m) {
                       if (!(m.duration > 0.0)) throw InvalidArgument("reach duration must be positive");
                   },
                   [](const StrikeProfile& s) {
                       if (!(s.strike_frequency > 0.0))
                           throw InvalidArgument("strike frequency must be positive");
                       if (!(s.peak_handle_velocity > 0.0))
                           throw InvalidArgument("peak handle velocity must be positive");
                       if (!(s.backswing >= 0.0)) throw InvalidArgument("backswing must be >= 0");
                   },
                   [](const Playback& pb) {
                       if (pb.t.empty() || pb.t.size() != pb.position.size())
                           throw InvalidArgument("playback needs matching, non-empty columns");
                   },
               },
               motion);
    if (const auto* dyn = std::get_if<DynamicCoupling>(&coupling)) {
        if (dyn->arm.k_arm < 0.0 || dyn->arm.b_arm < 0.0)
            throw InvalidArgument("arm impedance must be non-negative");
    }
}

bool VirtualParticipant::operator==(const VirtualParticipant& o) const {
    return seed == o.seed && reach_duration == o.reach_duration && reaction_time == o.reaction_time &&
           strike_frequency == o.strike_frequency && peak_handle_velocity == o.peak_handle_velocity &&
           backswing == o.backswing && strike_gap == o.strike_gap && trial_jitter == o.trial_jitter &&
           coupling.index() == o.coupling.index();
}

OperatorModel VirtualParticipant::precision_operator(double from, double to,
                                                     std::uint64_t trial_seed) const {
    std::mt19937_64 rng(mix_seed(seed, trial_seed));
    MinJerkReach reach;
    reach.start = from;
    reach.distance = to - from;
    reach.duration = reach_duration * jitter_factor(rng, trial_jitter);
    reach.onset = reaction_time * jitter_factor(rng, trial_jitter);
    return {reach, coupling};
}

OperatorModel VirtualParticipant::dynamic_operator(double target, std::uint64_t trial_seed) const {
    std::mt19937_64 rng(mix_seed(seed, trial_seed));
    StrikeProfile strike;
    strike.start = strike_start(target);
    strike.strike_frequency = strike_frequency * jitter_factor(rng, trial_jitter);
    strike.peak_handle_velocity = peak_handle_velocity * jitter_factor(rng, trial_jitter);
    strike.backswing = backswing * jitter_factor(rng, trial_jitter);
    strike.onset = reaction_time * jitter_factor(rng, trial_jitter);
    return {strike, coupling};
}

VirtualParticipant make_virtual_participant(std::uint64_t seed, const CohortConfig& cohort) {
    std::mt19937_64 rng(mix_seed(seed, 0x5eed));
    VirtualParticipant p;
    p.seed = seed;
    p.reach_duration = cohort.reach_duration * jitter_factor(rng, cohort.participant_jitter);
    p.reaction_time = cohort.reaction_time * jitter_factor(rng, cohort.participant_jitter);
    p.strike_frequency = cohort.strike_frequency * jitter_factor(rng, cohort.participant_jitter);
    p.peak_handle_velocity = cohort.peak_handle_velocity * jitter_factor(rng, cohort.participant_jitter);
    p.backswing = cohort.backswing * jitter_factor(rng, cohort.participant_jitter);
    p.strike_gap = cohort.strike_gap;
    p.trial_jitter = cohort.trial_jitter;
    if (cohort.dynamic_coupling) p.coupling = DynamicCoupling{cohort.arm};
    return p;
}

} // namespace viasim
