#pragma once

#include "viasim/impedance_law.hpp"
#include "viasim/teleop.hpp"

#include <complex>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace viasim {

/// Which output is related to the handle position excitation.
enum class SignalPair {
    ToolPosition,   // thetaOut / thetaM
    HandleTorque,   // feedbackTorque / thetaM
};

std::string_view to_string(SignalPair pair);
SignalPair parse_signal_pair(std::string_view text);

/// `count` log-spaced frequencies from `lo` to `hi` inclusive.
std::vector<double> log_grid(double lo, double hi, int count);

struct SweepConfig {
    std::vector<double> freq_grid = log_grid(0.2, 20.0, 40); // Hz
    double amplitude = 0.4;   // rad, handle sine amplitude
    int settle_cycles = 3;    // discarded before measuring
    int measure_cycles = 5;   // integrated by the single-bin correlation
    double min_settle_time = 8.0; // s, floor on the discarded span
    double ramp_fraction = 0.5;   // share of the settle span used to fade the sine in
    SignalPair signal = SignalPair::ToolPosition;
    LoopParams params;
    int threads = 0; // 0: hardware concurrency

    void validate() const;
};

struct FrequencyResponsePoint {
    double freq = 0.0;         // Hz
    double magnitude_db = 0.0; // dB
    double phase_deg = 0.0;    // degrees, wrapped to (-180, 180]
    bool valid = true;         // false: the simulation diverged at this point
};

/// Sine-by-sine sweep of the simulated loop with a kinematic handle.
std::vector<FrequencyResponsePoint> measure_response(Mode mode, const SweepConfig& cfg);

/// A single point of measure_response.
FrequencyResponsePoint measure_point(Mode mode, double freq, const SweepConfig& cfg);

/// Closed-form response of the linear loop (modes H and L only) at the
/// given frequencies, including the half-tick hold delay of the control rate.
std::vector<FrequencyResponsePoint> analytic_response(Mode mode, const std::vector<double>& freqs,
                                                      const LoopParams& params,
                                                      SignalPair signal = SignalPair::ToolPosition);

/// Complex value of the analytic response at one frequency.
std::complex<double> analytic_transfer(Mode mode, double freq, const LoopParams& params,
                                       SignalPair signal = SignalPair::ToolPosition);

struct PeakEstimate {
    double freq = 0.0;         // Hz
    double magnitude_db = 0.0; // dB
};

/// Largest valid grid magnitude, refined by golden-section search on the
/// simulated response between the neighbouring grid points.
PeakEstimate find_peak(Mode mode, const std::vector<FrequencyResponsePoint>& sweep,
                       const SweepConfig& cfg, double tolerance_hz = 0.01);

/// Largest valid grid magnitude without refinement.
PeakEstimate grid_peak(const std::vector<FrequencyResponsePoint>& sweep);

struct CrossoverConfig {
    double low_edge = 1.0;   // Hz, low band is f < low_edge
    double high_edge = 10.0; // Hz, high band is f > high_edge
    double tol_low = 3.0;    // dB
    double tol_high = 3.0;   // dB
};

struct CrossoverReport {
    bool low_pass = false;
    bool high_pass = false;
    double low_deviation_db = 0.0;  // mean |A - H| over the low band
    double high_deviation_db = 0.0; // mean |A - L| over the high band
    int low_points = 0;
    int high_points = 0;
    std::vector<std::string> diffs; // one line per failing branch

    bool passed() const { return low_pass && high_pass; }
};

/// The adaptive curve hugs H at low frequencies and L at high frequencies.
/// All three sweeps must share the grid.
CrossoverReport crossover_check(const std::vector<FrequencyResponsePoint>& h,
                                const std::vector<FrequencyResponsePoint>& l,
                                const std::vector<FrequencyResponsePoint>& a,
                                const CrossoverConfig& cfg = {});

/// Sweep table for plotting: freq, measured and analytic magnitudes, phases.
/// Missing modes leave empty cells.
struct SweepTable {
    std::vector<double> freqs;
    std::map<Mode, std::vector<FrequencyResponsePoint>> measured;
    std::map<Mode, std::vector<FrequencyResponsePoint>> analytic;
};

void write_sweep_csv(const std::filesystem::path& path, const SweepTable& table);
std::string sweep_csv(const SweepTable& table);

} // namespace viasim
