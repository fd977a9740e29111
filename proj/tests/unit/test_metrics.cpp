#include "viasim/error.hpp"
#include "viasim/metrics.hpp"
#include "viasim/trace_io.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

using namespace viasim;

namespace {

// Frames on a grid of `step` seconds from `t0` to `t1` inclusive.
template <class F>
std::vector<SimFrame> build(double t0, double t1, double step, F&& fill) {
    std::vector<SimFrame> out;
    const long n = std::lround((t1 - t0) / step);
    for (long i = 0; i <= n; ++i) {
        SimFrame f;
        f.t = t0 + static_cast<double>(i) * step;
        fill(f);
        out.push_back(f);
    }
    return out;
}

// Handle jumps past the threshold 0.10 s after the target jump at 0.5 s;
// tool enters the band for good at 0.85 s.
std::vector<SimFrame> constructed_reach(double shift = 0.0) {
    return build(shift, shift + 2.0, 1e-3, [&](SimFrame& f) {
        const double t = f.t - shift;
        f.theta_m = t >= 0.6 - 1e-9 ? 0.3 : 0.0;
        f.theta_out = t >= 0.85 - 1e-9 ? 0.3 : (t >= 0.6 - 1e-9 ? 0.2 : 0.0);
    });
}

// Error c from the move instant until T later, zero afterwards.
std::vector<SimFrame> constant_error(double c, double T, double step) {
    return build(0.0, T + 1.0, step, [&](SimFrame& f) {
        f.theta_m = f.t > 0.0 ? 0.3 : 0.0;
        const double since_move = f.t - step;
        f.theta_out = since_move < T - 1e-9 ? -c : 0.0;
    });
}

} // namespace

TEST_SUITE("metrics") {
    TEST_CASE("constructed trace gives a 0.25 s travel time") {
        const auto trace = constructed_reach();
        const auto o = precision_metrics(trace, 0.5, 0.3);
        REQUIRE(o.moved);
        REQUIRE(o.settled);
        CHECK(std::abs(o.dead_time - 0.10) < 1e-9);
        CHECK(std::abs(o.move_time - 0.6) < 1e-9);
        CHECK(std::abs(o.settle_time - 0.85) < 1e-9);
        CHECK(std::abs(*o.travel_time - 0.25) < 1e-9);
        CHECK(o.censored_travel_time == *o.travel_time);
        // 0.1 rad error over 0.25 s from the move, trapezoid on the grid
        CHECK(o.itae == doctest::Approx(0.1 * 0.249 * 0.249 / 2 + 0.5 * 0.249 * 0.1 * 0.001).epsilon(1e-9));
    }

    TEST_CASE("a handle that never moves is degenerate") {
        const auto trace = build(0.0, 2.0, 1e-3, [](SimFrame& f) {
            f.theta_m = 0.3;
            f.theta_out = 0.3;
        });
        const auto o = precision_metrics(trace, 0.5, 0.3);
        CHECK_FALSE(o.moved);
        CHECK_FALSE(o.settled);
        CHECK_FALSE(o.travel_time.has_value());
    }

    TEST_CASE("never settling leaves the travel time absent and censors it") {
        const auto trace = build(0.0, 1.0, 1e-3, [](SimFrame& f) {
            f.theta_m = f.t > 0.1 ? 0.3 : 0.0;
            f.theta_out = 0.1;
        });
        const auto o = precision_metrics(trace, 0.0, 0.3);
        CHECK(o.moved);
        CHECK_FALSE(o.settled);
        CHECK_FALSE(o.travel_time.has_value());
        CHECK(o.censored_travel_time == doctest::Approx(1.0 - 0.101));
        CHECK(o.itae > 0.0);
    }

    TEST_CASE("constant error integrates to c T^2 / 2") {
        // 1 kHz grid: the trapezoid loses half a sample at the drop
        const auto coarse = precision_metrics(constant_error(0.03, 1.0, 1e-3), 0.0, 0.0);
        REQUIRE(coarse.settled);
        CHECK(*coarse.travel_time == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(coarse.itae == doctest::Approx(0.03 * (0.999 * 0.999 / 2 + 0.5 * 0.999 * 0.001)).epsilon(1e-9));
        const auto fine = precision_metrics(constant_error(0.03, 1.0, 1e-4), 0.0, 0.0);
        CHECK(std::abs(fine.itae / 0.015 - 1.0) < 1e-3);
    }

    TEST_CASE("travel time and ITAE are invariant under a time shift") {
        const auto a = precision_metrics(constructed_reach(0.0), 0.5, 0.3);
        const auto b = precision_metrics(constructed_reach(3.0), 3.5, 0.3);
        CHECK(*a.travel_time == doctest::Approx(*b.travel_time).epsilon(1e-9));
        CHECK(a.itae == doctest::Approx(b.itae).epsilon(1e-9));
    }

    TEST_CASE("ITAE is zero iff the error is zero over the window") {
        auto trace = build(0.0, 2.0, 1e-3, [](SimFrame& f) {
            f.theta_m = f.t > 0.1 ? 0.3 : 0.0;
            f.theta_out = 0.3;
        });
        CHECK(precision_metrics(trace, 0.0, 0.3).itae == 0.0);
        trace[300].theta_out = 0.3 + 1e-6;
        // the band holds from the move, so the window is empty
        CHECK(precision_metrics(trace, 0.0, 0.3).itae == 0.0);
        trace[120].theta_out = 0.35;
        CHECK(precision_metrics(trace, 0.0, 0.3).itae > 0.0);
    }

    TEST_CASE("ITAE origin switch measures time from the target jump") {
        const auto trace = constructed_reach();
        const auto from_move = precision_metrics(trace, 0.5, 0.3, {}, ItaeOrigin::MoveInstant);
        const auto from_jump = precision_metrics(trace, 0.5, 0.3, {}, ItaeOrigin::TargetJump);
        CHECK(*from_move.travel_time == *from_jump.travel_time);
        CHECK(from_jump.itae > from_move.itae);
    }

    TEST_CASE("rigid pass-through has unit gain") {
        const auto trace = build(0.0, 1.0, 1e-3, [](SimFrame& f) {
            f.omega_m = f.omega_out = 5.0 * std::sin(3.0 * f.t);
            f.theta_m = f.theta_out = 5.0 / 3.0 * (1.0 - std::cos(3.0 * f.t));
        });
        const auto o = dynamic_metrics(trace, 1.0);
        REQUIRE(o.impact);
        CHECK(std::abs(o.gain - 1.0) < 1e-12);
    }

    TEST_CASE("peak forward velocities ignore the backswing") {
        auto trace = build(0.0, 1.0, 1e-3, [](SimFrame& f) {
            f.theta_out = f.theta_m = f.t < 0.5 ? -0.1 : -0.1 + (f.t - 0.5);
            f.omega_out = f.omega_m = f.t < 0.5 ? -20.0 : 5.0;
        });
        for (auto& f : trace)
            if (f.t >= 0.5) f.omega_out = 7.5;
        const auto o = dynamic_metrics(trace, 0.2);
        REQUIRE(o.impact);
        CHECK(o.max_handle_vel == 5.0);
        CHECK(o.max_tool_vel == 7.5);
        CHECK(o.gain == doctest::Approx(1.5));
        CHECK(o.impact_time == doctest::Approx(0.8));
    }

    TEST_CASE("gain is invariant under scaling both velocities") {
        auto trace = build(0.0, 1.0, 1e-3, [](SimFrame& f) {
            f.omega_m = 4.0 * std::sin(5.0 * f.t);
            f.omega_out = 6.0 * std::sin(5.0 * f.t - 0.3);
            f.theta_out = f.t;
        });
        const double g = dynamic_metrics(trace, 0.9).gain;
        for (auto& f : trace) {
            f.omega_m *= 2.5;
            f.omega_out *= 2.5;
        }
        CHECK(dynamic_metrics(trace, 0.9).gain == doctest::Approx(g).epsilon(1e-14));
    }

    TEST_CASE("a trace that stops before the wall is a no-impact outcome") {
        const auto trace = build(0.0, 0.5, 1e-3, [](SimFrame& f) {
            f.theta_out = f.t * 0.1;
            f.omega_out = f.omega_m = 0.1;
        });
        const auto o = dynamic_metrics(trace, 0.3);
        CHECK_FALSE(o.impact);
        nlohmann::json j = o;
        CHECK(j["gain"].is_null());
        CHECK(j["impactTime"].is_null());
    }

    TEST_CASE("online and offline scoring agree, also after a CSV round trip") {
        ScenarioSpec reach;
        reach.duration = 2.0;
        reach.mode = Mode::H;
        reach.op.motion = MinJerkReach{0.0, 0.3, 0.28, 0.25};
        const auto frames = run_trace(reach);
        PrecisionScorer online(0.0, 0.3);
        for (const auto& f : frames) online.add(f);
        std::stringstream csv;
        write_trace_csv(csv, frames);
        const auto reread = read_trace_csv(csv);
        for (const auto* trace : {&frames, &reread}) {
            const auto offline = precision_metrics(*trace, 0.0, 0.3);
            const auto on = online.outcome();
            REQUIRE(offline.settled);
            REQUIRE(on.settled);
            CHECK(std::abs(*offline.travel_time - *on.travel_time) < 1e-9);
            CHECK(std::abs(offline.dead_time - on.dead_time) < 1e-9);
            CHECK(std::abs(offline.itae - on.itae) < 1e-9);
        }

        ScenarioSpec strike;
        strike.duration = 1.0;
        strike.mode = Mode::L;
        strike.env = EnvironmentConfig::wall(0.3);
        strike.op.motion = StrikeProfile{0.285, 0.1, 4.5, 5.0, 0.1};
        const auto sframes = run_trace(strike);
        DynamicScorer dyn(0.3);
        for (const auto& f : sframes) dyn.add(f);
        const auto offline = dynamic_metrics(sframes, 0.3);
        REQUIRE(offline.impact);
        CHECK(dyn.outcome() == offline);
    }

    TEST_CASE("streaming scorer matches on constructed traces") {
        const auto trace = constructed_reach();
        PrecisionScorer s(0.5, 0.3);
        for (const auto& f : trace) s.add(f);
        const auto a = s.outcome(), b = precision_metrics(trace, 0.5, 0.3);
        CHECK(*a.travel_time == doctest::Approx(*b.travel_time).epsilon(1e-12));
        CHECK(a.itae == doctest::Approx(b.itae).epsilon(1e-12));
    }

    TEST_CASE("outcome JSON field names") {
        nlohmann::json p = precision_metrics(constructed_reach(), 0.5, 0.3);
        CHECK(p["task"] == "precision");
        CHECK(p.contains("travelTime"));
        CHECK(p.contains("deadTime"));
        CHECK(p.contains("itae"));
        CHECK(p["settled"] == true);
    }

    TEST_CASE("settling spec validation") {
        SettlingSpec s;
        s.settle_hold = 0.0;
        CHECK_THROWS_AS(s.validate(), InvalidArgument);
    }
}
