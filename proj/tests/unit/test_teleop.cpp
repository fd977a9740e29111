#include "oracles.hpp"

#include "viasim/error.hpp"
#include "viasim/teleop.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace viasim;

namespace {

ScenarioSpec reach(Mode mode, double duration = 2.0) {
    ScenarioSpec s;
    s.duration = duration;
    s.mode = mode;
    s.op.motion = MinJerkReach{0.0, 0.3, 0.28, 0.1};
    return s;
}

// Drives the loop with an arbitrary handle trajectory (kinematic coupling).
template <class F>
std::vector<SimFrame> drive(Mode mode, const LoopParams& params, long ticks, F&& traj) {
    TeleopLoop loop(params, mode, EnvironmentConfig::free_air(), KinematicCoupling{}, traj(0.0).position);
    std::vector<SimFrame> out;
    for (long i = 1; i <= ticks; ++i) out.push_back(loop.tick(traj(i * params.plant.control_dt)));
    return out;
}

} // namespace

TEST_SUITE("teleop") {
    TEST_CASE("at rest with the operator holding zero every signal stays zero") {
        TeleopLoop loop(LoopParams{}, Mode::A, EnvironmentConfig::free_air(), KinematicCoupling{}, 0.0);
        for (int i = 0; i < 3000; ++i) {
            const SimFrame f = loop.tick({0.0, 0.0});
            REQUIRE(f.theta_m == 0.0);
            REQUIRE(f.theta_out == 0.0);
            REQUIRE(f.omega_out == 0.0);
            REQUIRE(f.theta_motor == 0.0);
            REQUIRE(f.feedback_torque == 0.0);
            REQUIRE(f.env_torque == 0.0);
        }
    }

    TEST_CASE("a slow ramp in mode A keeps the stiffness pinned at the top") {
        const auto frames = drive(Mode::A, LoopParams{}, 3000, [](double t) { return TrajectoryPoint{0.1 * t, 0.1}; });
        for (const auto& f : frames) {
            REQUIRE(f.k_set == 100.0);
            REQUIRE(f.b_set == 0.8);
        }
    }

    TEST_CASE("0.2 Hz sine in mode H matches the linear loop magnitude within 2%") {
        const double w = 2.0 * oracle::kPi * 0.2;
        const auto frames = drive(Mode::H, LoopParams{}, 20000, [&](double t) {
            return TrajectoryPoint{0.1 * std::sin(w * t), 0.1 * w * std::cos(w * t)};
        });
        // last two periods: correlate against the drive frequency
        double re_in = 0, im_in = 0, re_out = 0, im_out = 0;
        for (std::size_t i = 10000; i < frames.size(); ++i) {
            const double t = frames[i].t;
            re_in += frames[i].theta_m * std::sin(w * t);
            im_in += frames[i].theta_m * std::cos(w * t);
            re_out += frames[i].theta_out * std::sin(w * t);
            im_out += frames[i].theta_out * std::cos(w * t);
        }
        const double ratio = std::hypot(re_out, im_out) / std::hypot(re_in, im_in);
        const double expected = oracle::linear_loop_magnitude(0.2, 100.0, 0.8);
        CHECK(std::abs(ratio / expected - 1.0) < 0.02);
    }

    TEST_CASE("duration 1 s gives exactly 1000 frames on the tick grid") {
        const auto frames = run_trace(reach(Mode::H, 1.0));
        REQUIRE(frames.size() == 1000);
        CHECK(frames.front().t == doctest::Approx(0.001));
        CHECK(frames.back().t == doctest::Approx(1.0));
    }

    TEST_CASE("the same scenario twice is bit-identical") {
        CHECK(run_trace(reach(Mode::A)) == run_trace(reach(Mode::A)));
    }

    TEST_CASE("mode L keeps ringing after mode H has settled") {
        const auto h = run_trace(reach(Mode::H));
        const auto l = run_trace(reach(Mode::L));
        // first tick after which H stays inside 0.03 rad of the target
        std::size_t settled = h.size();
        for (std::size_t i = h.size(); i-- > 0;) {
            if (std::abs(h[i].theta_out - 0.3) >= 0.03) break;
            settled = i;
        }
        REQUIRE(settled < h.size());
        double amplitude = 0.0;
        for (std::size_t i = settled; i < l.size(); ++i) amplitude = std::max(amplitude, std::abs(l[i].theta_out - 0.3));
        CHECK(amplitude > 0.03);
    }

    TEST_CASE("without force reflection and contact the H loop obeys superposition") {
        LoopParams p;
        p.gains.c2 = 0.0;
        const double w1 = 2.0 * oracle::kPi * 1.3, w2 = 2.0 * oracle::kPi * 7.0;
        auto a = [&](double t) { return TrajectoryPoint{0.2 * std::sin(w1 * t), 0.2 * w1 * std::cos(w1 * t)}; };
        auto b = [&](double t) { return TrajectoryPoint{0.05 * t * t, 0.1 * t}; };
        auto ab = [&](double t) {
            const auto x = a(t), y = b(t);
            return TrajectoryPoint{x.position + y.position, x.velocity + y.velocity};
        };
        const auto fa = drive(Mode::H, p, 3000, a), fb = drive(Mode::H, p, 3000, b), fab = drive(Mode::H, p, 3000, ab);
        double worst = 0.0;
        for (std::size_t i = 0; i < fab.size(); ++i)
            worst = std::max(worst, std::abs(fab[i].theta_out - fa[i].theta_out - fb[i].theta_out));
        CHECK(worst < 1e-6);
    }

    TEST_CASE("feedback is zero when the tool tracks the handle in free air") {
        TeleopLoop loop(LoopParams{}, Mode::H, EnvironmentConfig::free_air(), KinematicCoupling{}, 0.25);
        for (int i = 0; i < 100; ++i) CHECK(loop.tick({0.25, 0.0}).feedback_torque == 0.0);
    }

    TEST_CASE("the integrator never exceeds its clamp") {
        LoopParams p;
        TeleopLoop loop(p, Mode::L, EnvironmentConfig::wall(0.1), KinematicCoupling{}, 0.0);
        for (int i = 1; i <= 5000; ++i) {
            // hold the handle deep behind the wall
            loop.tick({0.4, 0.0});
            REQUIRE(std::abs(loop.state().handle.pi_integrator) <= p.gains.integrator_clamp);
        }
        CHECK(std::abs(loop.state().handle.pi_integrator) == p.gains.integrator_clamp);
    }

    TEST_CASE("runtime mode switches keep positions continuous") {
        TeleopLoop loop(LoopParams{}, Mode::H, EnvironmentConfig::free_air(), KinematicCoupling{}, 0.0);
        const double w = 2.0 * oracle::kPi * 2.0;
        SimFrame prev = loop.tick({0.0, 0.0});
        double k_jump = 0.0;
        for (int i = 2; i <= 3000; ++i) {
            if (i == 1000) loop.set_mode(Mode::L);
            if (i == 2000) loop.set_mode(Mode::A);
            const double t = i * 1e-3;
            const SimFrame f = loop.tick({0.2 * std::sin(w * t), 0.2 * w * std::cos(w * t)});
            REQUIRE(std::abs(f.theta_out - prev.theta_out) < 0.01);
            REQUIRE(std::abs(f.theta_motor - prev.theta_motor) < 0.01);
            k_jump = std::max(k_jump, std::abs(f.k_actual - prev.k_actual));
            prev = f;
        }
        // the actuator filter spreads a 90 N m/rad set jump over many ticks
        CHECK(k_jump < 5.0);
    }

    TEST_CASE("a stiff arm with no feedback converges to the kinematic handle") {
        LoopParams p;
        p.gains.p_gain = 0.0;
        p.gains.i_gain = 0.0;
        p.gains.c2 = 0.0;
        ScenarioSpec kin = reach(Mode::H, 1.0);
        kin.params = p;
        const auto a = run_trace(kin);
        auto gap = [&](double k_arm) {
            ScenarioSpec dyn = kin;
            dyn.op.coupling = DynamicCoupling{{k_arm, 2.0 * std::sqrt(k_arm * 0.0125)}};
            const auto b = run_trace(dyn);
            double worst = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i].theta_m - b[i].theta_m));
            return worst;
        };
        const double soft = gap(100.0), mid = gap(500.0), stiff = gap(2000.0);
        CHECK(mid < soft);
        CHECK(stiff < mid);
        CHECK(stiff < 0.02);
    }

    TEST_CASE("non-finite operator input aborts with the frame index") {
        TeleopLoop loop(LoopParams{}, Mode::H, EnvironmentConfig::free_air(), KinematicCoupling{}, 0.0);
        loop.tick({0.0, 0.0});
        try {
            loop.tick({std::numeric_limits<double>::quiet_NaN(), 0.0});
            FAIL("expected StateCorruption");
        } catch (const StateCorruption& e) {
            CHECK(e.frame_index() == 1);
        }
    }
}
