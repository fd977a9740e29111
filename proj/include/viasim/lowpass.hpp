#pragma once

#include <array>
#include <complex>

namespace viasim {

/// Second-order Butterworth low-pass realized in state-space form
/// (position and its derivative), discretized with the trapezoidal rule,
/// which is the bilinear transform. The cutoff is prewarped so the -3 dB
/// point lands exactly on the requested frequency.
class SecondOrderLowPass {
public:
    SecondOrderLowPass() = default;
    SecondOrderLowPass(double cutoff_hz, double sample_rate_hz);

    /// Put the filter at rest with its output equal to `value`.
    void reset(double value);

    /// Advance one sample with the new input and return the output.
    double step(double input);

    double value() const noexcept { return y_; }
    double derivative() const noexcept { return dy_; }
    bool has_derivative() const noexcept { return true; }

    double cutoff_hz() const noexcept { return cutoff_hz_; }
    double sample_rate_hz() const noexcept { return sample_rate_hz_; }

    /// Analytic continuous-time response 1 / (1 + sqrt(2) s/wc + (s/wc)^2).
    static std::complex<double> continuous_response(double freq_hz, double cutoff_hz);

    /// Exact frequency response of this discrete realization.
    std::complex<double> discrete_response(double freq_hz) const;

private:
    double cutoff_hz_ = 0.0;
    double sample_rate_hz_ = 0.0;
    // x[k+1] = phi * x[k] + gamma * (u[k] + u[k+1])
    std::array<double, 4> phi_{};
    std::array<double, 2> gamma_{};
    double y_ = 0.0;
    double dy_ = 0.0;
    double last_input_ = 0.0;
};

} // namespace viasim
