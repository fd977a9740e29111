#include "oracles.hpp"

#include "viasim/error.hpp"
#include "viasim/plant.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace viasim;

namespace {

const PlantParams kParams{};

PlantState rest(double position, ImpedanceCommand imp) { return make_rest_plant(kParams, position, imp); }

} // namespace

TEST_SUITE("plant") {
    TEST_CASE("parameter defaults and validation") {
        CHECK(kParams.inertia == 0.0125);
        CHECK(kParams.joint_motor_cutoff == 20.0);
        CHECK(kParams.stiffness_actuator_cutoff == 10.0);
        CHECK(kParams.wall_stiffness == 10000.0);
        CHECK(kParams.wall_damping == 20.0);
        CHECK(kParams.control_dt == 0.001);
        CHECK(kParams.physics_substeps == 10);
        CHECK_NOTHROW(kParams.validate());

        PlantParams bad = kParams;
        bad.inertia = 0.0;
        CHECK_THROWS_AS(bad.validate(), InvalidArgument);
        bad = kParams;
        bad.physics_substeps = 0;
        CHECK_THROWS_AS(bad.validate(), InvalidArgument);
        bad = kParams;
        bad.joint_motor_cutoff = 6000.0;
        CHECK_THROWS_AS(bad.validate(), InvalidArgument);
        bad = kParams;
        bad.wall_damping = -1.0;
        CHECK_THROWS_AS(bad.validate(), InvalidArgument);
        CHECK_THROWS_AS(EnvironmentConfig::wall(std::numeric_limits<double>::infinity()).validate(),
                        InvalidArgument);
    }

    TEST_CASE("rest at zero stays identically at rest") {
        PlantState s = rest(0.0, {100.0, 0.8});
        for (int i = 0; i < 2000; ++i) {
            s = step_plant(s, 0.0, {100.0, 0.8}, EnvironmentConfig::free_air(), kParams);
            REQUIRE(s.theta_out == 0.0);
            REQUIRE(s.omega_out == 0.0);
            REQUIRE(s.theta_motor() == 0.0);
            REQUIRE(s.k_actual() == 100.0);
        }
    }

    TEST_CASE("free oscillation at k = 10 rings at 4.50 Hz") {
        PlantState s = rest(0.0, {10.0, 0.0});
        s.theta_out = 0.1;
        std::vector<double> crossings;
        double prev = s.theta_out;
        for (int i = 1; i <= 3000; ++i) {
            s = step_plant(s, 0.0, {10.0, 0.0}, EnvironmentConfig::free_air(), kParams);
            if (prev > 0.0 && s.theta_out <= 0.0) {
                const double frac = prev / (prev - s.theta_out);
                crossings.push_back((i - 1 + frac) * 1e-3);
            }
            prev = s.theta_out;
        }
        REQUIRE(crossings.size() >= 10);
        const double period = (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
        const double expected = std::sqrt(10.0 / 0.0125) / (2.0 * oracle::kPi);
        CHECK(expected == doctest::Approx(4.5016).epsilon(1e-4));
        CHECK(std::abs(1.0 / period - expected) < 0.05);
    }

    TEST_CASE("motor position follows the analytic 20 Hz Butterworth step") {
        PlantState s = rest(0.0, {1e6, 0.0});
        double worst = 0.0;
        for (int i = 1; i <= 500; ++i) {
            s = step_plant(s, 1.0, {1e6, 0.0}, EnvironmentConfig::free_air(), kParams);
            worst = std::max(worst, std::abs(s.theta_motor() - oracle::butterworth_sampled_step(i * 1e-3, 20.0, 1e-4)));
        }
        CHECK(worst < 1e-3);
        // rigid coupling: the output tracks the motor closely
        CHECK(std::abs(s.theta_out - s.theta_motor()) < 1e-3);
    }

    TEST_CASE("stiffness and damping follow the 10 Hz actuator filter") {
        PlantState s = rest(0.0, {100.0, 0.8});
        double worst_k = 0.0, worst_b = 0.0;
        for (int i = 1; i <= 500; ++i) {
            s = step_plant(s, 0.0, {10.0, 0.01}, EnvironmentConfig::free_air(), kParams);
            const double g = oracle::butterworth_sampled_step(i * 1e-3, 10.0, 1e-4);
            worst_k = std::max(worst_k, std::abs(s.k_actual() - (100.0 - 90.0 * g)));
            worst_b = std::max(worst_b, std::abs(s.b_actual() - (0.8 - 0.79 * g)));
        }
        CHECK(worst_k < 90.0 * 1e-3);
        CHECK(worst_b < 0.79 * 1e-3);
        CHECK(s.k_actual() == doctest::Approx(10.0).epsilon(1e-6));
    }

    TEST_CASE("environment torque examples") {
        const auto wall = EnvironmentConfig::wall(0.5);
        CHECK(environment_torque(0.3, 4.0, EnvironmentConfig::free_air()) == 0.0);
        CHECK(environment_torque(0.51, 0.0, wall) == doctest::Approx(-100.0).epsilon(1e-12));
        CHECK(environment_torque(0.49, 10.0, wall) == 0.0);
        CHECK(environment_torque(0.5, 10.0, wall) == 0.0);
    }

    TEST_CASE("the wall never pulls and releases the instant penetration ends") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> pos(0.4, 0.6), vel(-50.0, 50.0);
        const auto wall = EnvironmentConfig::wall(0.5);
        for (int i = 0; i < 100000; ++i) {
            const double x = pos(rng), v = vel(rng);
            const double tau = environment_torque(x, v, wall);
            REQUIRE(tau <= 0.0);
            if (x <= 0.5) REQUIRE(tau == 0.0);
        }
    }

    TEST_CASE("free plant energy is non-increasing") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> k(10.0, 100.0), b(0.0, 0.8), x(-0.3, 0.3), v(-8.0, 8.0);
        double worst = -1.0;
        for (int trial = 0; trial < 200; ++trial) {
            const ImpedanceCommand imp{k(rng), b(rng)};
            PlantState s = rest(0.1, imp);
            s.theta_out = 0.1 + x(rng);
            s.omega_out = v(rng);
            double e = s.mechanical_energy(kParams.inertia);
            for (int i = 0; i < 500; ++i) {
                s = step_plant(s, 0.1, imp, EnvironmentConfig::free_air(), kParams);
                const double e1 = s.mechanical_energy(kParams.inertia);
                worst = std::max(worst, e1 - e);
                e = e1;
            }
        }
        CHECK(worst <= 1e-6);
    }

    TEST_CASE("wall contact stays stable and shallow") {
        PlantState s = rest(0.0, {100.0, 0.8});
        s.omega_out = 8.0;
        const auto wall = EnvironmentConfig::wall(0.05);
        double deepest = 0.0;
        for (int i = 0; i < 2000; ++i) {
            s = step_plant(s, 0.0, {100.0, 0.8}, wall, kParams);
            REQUIRE(s.finite());
            deepest = std::max(deepest, s.theta_out - 0.05);
        }
        CHECK(deepest > 0.0);
        CHECK(deepest < 0.01);
        CHECK(s.theta_out < 0.05);
    }

    TEST_CASE("identical inputs give bit-identical states") {
        auto run = [] {
            PlantState s = rest(0.0, {10.0, 0.01});
            std::vector<double> out;
            for (int i = 0; i < 1000; ++i) {
                s = step_plant(s, std::sin(i * 0.01), {10.0 + i * 0.05, 0.01}, EnvironmentConfig::wall(0.3), kParams);
                out.push_back(s.theta_out);
                out.push_back(s.omega_out);
            }
            return out;
        };
        CHECK(run() == run());
    }

    TEST_CASE("non-finite and negative inputs are rejected") {
        PlantState s = rest(0.0, {100.0, 0.8});
        const double nan = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(step_plant(s, nan, {100.0, 0.8}, {}, kParams), StateCorruption);
        CHECK_THROWS_AS(step_plant(s, 0.0, {nan, 0.8}, {}, kParams), StateCorruption);
        CHECK_THROWS_AS(step_plant(s, 0.0, {-1.0, 0.8}, {}, kParams), InvalidArgument);
        CHECK_THROWS_AS(step_plant(s, 0.0, {10.0, -0.1}, {}, kParams), InvalidArgument);
        s.omega_out = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(step_plant(s, 0.0, {100.0, 0.8}, {}, kParams), StateCorruption);
    }
}
