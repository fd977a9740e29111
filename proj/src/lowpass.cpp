#include "viasim/lowpass.hpp"

#include "viasim/error.hpp"

#include <cmath>
#include <numbers>

namespace viasim {

SecondOrderLowPass::SecondOrderLowPass(double cutoff_hz, double sample_rate_hz)
    : cutoff_hz_(cutoff_hz), sample_rate_hz_(sample_rate_hz) {
    if (!(cutoff_hz > 0.0) || !(sample_rate_hz > 0.0) || !(cutoff_hz < 0.5 * sample_rate_hz)) {
        throw InvalidArgument("low-pass cutoff must be positive and below Nyquist");
    }
    const double h = 1.0 / sample_rate_hz;
    const double wc = (2.0 / h) * std::tan(std::numbers::pi * cutoff_hz * h);
    const double a10 = -wc * wc;
    const double a11 = -std::numbers::sqrt2 * wc;

    // M = (I - hA/2)^-1, A = [[0, 1], [a10, a11]]
    const double m00 = 1.0, m01 = -0.5 * h;
    const double m10 = -0.5 * h * a10, m11 = 1.0 - 0.5 * h * a11;
    const double det = m00 * m11 - m01 * m10;
    const double i00 = m11 / det, i01 = -m01 / det;
    const double i10 = -m10 / det, i11 = m00 / det;

    // P = I + hA/2
    const double p00 = 1.0, p01 = 0.5 * h;
    const double p10 = 0.5 * h * a10, p11 = 1.0 + 0.5 * h * a11;

    phi_ = {i00 * p00 + i01 * p10, i00 * p01 + i01 * p11,
            i10 * p00 + i11 * p10, i10 * p01 + i11 * p11};

    // B = [0, wc^2], input enters as (h/2) B (u0 + u1)
    gamma_ = {i01 * 0.5 * h * wc * wc, i11 * 0.5 * h * wc * wc};

    // Normalize so the steady-state output equals the input exactly.
    const double q00 = 1.0 - phi_[0], q01 = -phi_[1];
    const double q10 = -phi_[2], q11 = 1.0 - phi_[3];
    const double qdet = q00 * q11 - q01 * q10;
    const double dc = 2.0 * (q11 * gamma_[0] - q01 * gamma_[1]) / qdet;
    gamma_[0] /= dc;
    gamma_[1] /= dc;
}

void SecondOrderLowPass::reset(double value) {
    y_ = value;
    dy_ = 0.0;
    last_input_ = value;
}

double SecondOrderLowPass::step(double input) {
    // Same recursion written as a deviation from the previous input, using
    // unity DC gain; a constant input is then an exact fixed point.
    const double e = y_ - last_input_;
    const double du = input - last_input_;
    const double y = last_input_ + phi_[0] * e + phi_[1] * dy_ + gamma_[0] * du;
    const double dy = phi_[2] * e + phi_[3] * dy_ + gamma_[1] * du;
    y_ = y;
    dy_ = dy;
    last_input_ = input;
    return y_;
}

std::complex<double> SecondOrderLowPass::continuous_response(double freq_hz, double cutoff_hz) {
    const std::complex<double> s(0.0, freq_hz / cutoff_hz);
    return 1.0 / (1.0 + std::numbers::sqrt2 * s + s * s);
}

std::complex<double> SecondOrderLowPass::discrete_response(double freq_hz) const {
    using C = std::complex<double>;
    const C z = std::polar(1.0, 2.0 * std::numbers::pi * freq_hz / sample_rate_hz_);
    // (zI - phi) X = gamma (1 + z) U
    const C a00 = z - phi_[0], a01 = -phi_[1];
    const C a10 = -phi_[2], a11 = z - phi_[3];
    const C det = a00 * a11 - a01 * a10;
    return (1.0 + z) * (a11 * gamma_[0] - a01 * gamma_[1]) / det;
}

} // namespace viasim
