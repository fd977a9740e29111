#include "oracles.hpp"

#include "viasim/error.hpp"
#include "viasim/lowpass.hpp"

#include <doctest.h>

#include <cmath>

using viasim::SecondOrderLowPass;

namespace {

// Magnitude in dB from driving the filter with a sine and correlating the
// output against the input frequency over whole periods.
double probe_db(double f, double fc, double rate) {
    SecondOrderLowPass lp(fc, rate);
    lp.reset(0.0);
    const double w = 2.0 * oracle::kPi * f;
    const long settle = static_cast<long>(std::ceil(20.0 / f * rate));
    const long measure = static_cast<long>(std::round(10.0 / f * rate));
    double re = 0.0, im = 0.0;
    for (long i = 0; i < settle + measure; ++i) {
        const double t = static_cast<double>(i) / rate;
        const double y = lp.step(std::sin(w * t));
        if (i >= settle) {
            re += y * std::sin(w * t);
            im += y * std::cos(w * t);
        }
    }
    const double amp = 2.0 * std::hypot(re, im) / static_cast<double>(measure);
    return 20.0 * std::log10(amp);
}

} // namespace

TEST_SUITE("lowpass") {
    TEST_CASE("unity DC gain: a step converges to the input") {
        SecondOrderLowPass lp(20.0, 10000.0);
        lp.reset(0.0);
        for (int i = 0; i < 20000; ++i) lp.step(1.0);
        CHECK(lp.value() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(lp.derivative()) < 1e-9);
    }

    TEST_CASE("reset holds the output at rest") {
        SecondOrderLowPass lp(10.0, 10000.0);
        lp.reset(0.7);
        for (int i = 0; i < 1000; ++i) lp.step(0.7);
        CHECK(lp.value() == 0.7);
        CHECK(lp.derivative() == 0.0);
    }

    TEST_CASE("magnitude at the cutoff is -3 dB within 0.1 dB") {
        for (double fc : {10.0, 20.0}) {
            CAPTURE(fc);
            CHECK(std::abs(probe_db(fc, fc, 10000.0) + 3.0103) < 0.1);
            const double exact = 20.0 * std::log10(std::abs(SecondOrderLowPass(fc, 10000.0).discrete_response(fc)));
            CHECK(std::abs(exact + 3.0103) < 1e-6);
        }
    }

    TEST_CASE("sine probing matches the continuous Butterworth up to four times the cutoff") {
        for (double fc : {10.0, 20.0}) {
            for (double ratio : {0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0}) {
                const double f = fc * ratio;
                CAPTURE(fc);
                CAPTURE(f);
                CHECK(std::abs(probe_db(f, fc, 10000.0) - oracle::butterworth_magnitude_db(f, fc)) < 0.2);
            }
        }
    }

    TEST_CASE("magnitude rolls off monotonically above the cutoff") {
        SecondOrderLowPass lp(20.0, 10000.0);
        double prev = std::abs(lp.discrete_response(20.0));
        for (double f = 21.0; f < 4999.0; f += 7.0) {
            const double m = std::abs(lp.discrete_response(f));
            CHECK(m < prev);
            prev = m;
        }
    }

    TEST_CASE("step response follows the analytic Butterworth response within 1e-3") {
        for (double fc : {10.0, 20.0}) {
            SecondOrderLowPass lp(fc, 10000.0);
            lp.reset(0.0);
            double worst = 0.0;
            for (int i = 1; i <= 5000; ++i) {
                const double y = lp.step(1.0);
                worst = std::max(worst, std::abs(y - oracle::butterworth_sampled_step(i / 10000.0, fc, 1e-4)));
            }
            CAPTURE(fc);
            CHECK(worst < 1e-3);
        }
    }

    TEST_CASE("derivative state matches the slope of the output") {
        SecondOrderLowPass lp(20.0, 10000.0);
        lp.reset(0.0);
        double prev = 0.0;
        double worst = 0.0;
        for (int i = 1; i <= 3000; ++i) {
            const double u = std::sin(2.0 * oracle::kPi * 3.0 * i / 10000.0);
            const double d_before = lp.derivative();
            const double y = lp.step(u);
            // trapezoidal rule: (y1 - y0)/h = (dy0 + dy1)/2
            worst = std::max(worst, std::abs((y - prev) * 10000.0 - 0.5 * (d_before + lp.derivative())));
            prev = y;
        }
        CHECK(worst < 1e-9);
    }

    TEST_CASE("cutoffs outside (0, Nyquist) are rejected") {
        CHECK_THROWS_AS(SecondOrderLowPass(0.0, 1000.0), viasim::InvalidArgument);
        CHECK_THROWS_AS(SecondOrderLowPass(600.0, 1000.0), viasim::InvalidArgument);
        CHECK_THROWS_AS(SecondOrderLowPass(10.0, -1.0), viasim::InvalidArgument);
    }
}
