#include "viasim/sysid.hpp"

#include "viasim/error.hpp"
#include "viasim/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <future>
#include <numbers>
#include <sstream>
#include <thread>

namespace viasim {

namespace {

constexpr double kPi = std::numbers::pi;

double to_db(std::complex<double> z) { return 20.0 * std::log10(std::abs(z)); }

double to_deg(std::complex<double> z) { return std::arg(z) * 180.0 / kPi; }

FrequencyResponsePoint make_point(double freq, std::complex<double> z) {
    FrequencyResponsePoint p;
    p.freq = freq;
    p.magnitude_db = to_db(z);
    p.phase_deg = to_deg(z);
    p.valid = std::isfinite(p.magnitude_db) && std::isfinite(p.phase_deg);
    return p;
}

FrequencyResponsePoint invalid_point(double freq) {
    FrequencyResponsePoint p;
    p.freq = freq;
    p.magnitude_db = std::numeric_limits<double>::quiet_NaN();
    p.phase_deg = std::numeric_limits<double>::quiet_NaN();
    p.valid = false;
    return p;
}

// Raised-cosine fade-in and its time derivative.
struct Envelope {
    double value;
    double rate;
};

Envelope envelope(double t, double ramp) {
    if (ramp <= 0.0 || t >= ramp) return {1.0, 0.0};
    const double x = kPi * t / ramp;
    return {0.5 * (1.0 - std::cos(x)), 0.5 * kPi / ramp * std::sin(x)};
}

unsigned worker_count(int requested, std::size_t jobs) {
    unsigned n = requested > 0 ? static_cast<unsigned>(requested)
                               : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

} // namespace

std::string_view to_string(SignalPair pair) {
    return pair == SignalPair::ToolPosition ? "tool-position" : "handle-torque";
}

SignalPair parse_signal_pair(std::string_view text) {
    if (text == "tool-position") return SignalPair::ToolPosition;
    if (text == "handle-torque") return SignalPair::HandleTorque;
    throw InvalidArgument("unknown signal pair '" + std::string(text) +
                          "' (expected tool-position or handle-torque)");
}

std::vector<double> log_grid(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2)
        throw InvalidArgument("log grid needs 0 < lo < hi and at least two points");
    std::vector<double> grid(static_cast<std::size_t>(count));
    const double step = std::log(hi / lo) / (count - 1);
    for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
    grid.back() = hi;
    return grid;
}

void SweepConfig::validate() const {
    params.validate();
    if (freq_grid.empty()) throw InvalidArgument("sweep: empty frequency grid");
    const double nyquist = 0.5 / params.plant.control_dt;
    for (double f : freq_grid)
        if (!(f > 0.0) || !(f < nyquist))
            throw InvalidArgument("sweep: frequencies must lie in (0, Nyquist)");
    if (!(amplitude > 0.0)) throw InvalidArgument("sweep: amplitude must be positive");
    if (settle_cycles < 1 || measure_cycles < 1)
        throw InvalidArgument("sweep: cycle counts must be >= 1");
    if (!(min_settle_time >= 0.0)) throw InvalidArgument("sweep: min settle time must be >= 0");
    if (!(ramp_fraction >= 0.0 && ramp_fraction <= 1.0))
        throw InvalidArgument("sweep: ramp fraction must lie in [0, 1]");
}

FrequencyResponsePoint measure_point(Mode mode, double freq, const SweepConfig& cfg) {
    const double dt = cfg.params.plant.control_dt;
    const double w = 2.0 * kPi * freq;
    const double settle = std::max(cfg.settle_cycles / freq, cfg.min_settle_time);
    const long settle_ticks = std::lround(settle / dt);
    const long measure_ticks = std::lround(cfg.measure_cycles / freq / dt);
    const double ramp = cfg.ramp_fraction * settle;

    try {
        TeleopLoop loop(cfg.params, mode, EnvironmentConfig::free_air(), KinematicCoupling{}, 0.0);
        std::complex<double> in_sum{}, out_sum{};
        for (long i = 0; i < settle_ticks + measure_ticks; ++i) {
            const double t = static_cast<double>(i + 1) * dt;
            const Envelope e = envelope(t, ramp);
            const double s = std::sin(w * t), c = std::cos(w * t);
            OperatorCommand cmd;
            cmd.position = cfg.amplitude * e.value * s;
            cmd.velocity = cfg.amplitude * (e.value * w * c + e.rate * s);
            const SimFrame f = loop.tick(cmd);
            if (i < settle_ticks) continue;
            const std::complex<double> basis(c, -s);
            const double out =
                cfg.signal == SignalPair::ToolPosition ? f.theta_out : f.feedback_torque;
            in_sum += f.theta_m * basis;
            out_sum += out * basis;
        }
        return make_point(freq, out_sum / in_sum);
    } catch (const StateCorruption&) {
        return invalid_point(freq);
    }
}

std::vector<FrequencyResponsePoint> measure_response(Mode mode, const SweepConfig& cfg) {
    cfg.validate();
    const auto& grid = cfg.freq_grid;
    std::vector<FrequencyResponsePoint> out(grid.size());
    const unsigned workers = worker_count(cfg.threads, grid.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) out[i] = measure_point(mode, grid[i], cfg);
        return out;
    }
    // Strided assignment; each slot is written by exactly one worker.
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < grid.size(); i += workers)
                out[i] = measure_point(mode, grid[i], cfg);
        }));
    }
    for (auto& j : jobs) j.get();
    return out;
}

std::complex<double> analytic_transfer(Mode mode, double freq, const LoopParams& params,
                                       SignalPair signal) {
    if (mode == Mode::A) throw InvalidArgument("analytic response: mode A is nonlinear");
    const ImpedanceCommand imp = impedance_for_mode(mode, 0.0, params.law);
    const double w = 2.0 * kPi * freq;
    const std::complex<double> s(0.0, w);
    const double m = params.plant.inertia;
    const std::complex<double> motor =
        SecondOrderLowPass::continuous_response(freq, params.plant.joint_motor_cutoff);
    const std::complex<double> coupling = (imp.b * s + imp.k) / (m * s * s + imp.b * s + imp.k);
    const std::complex<double> hold = std::exp(-s * (0.5 * params.plant.control_dt));
    const std::complex<double> tool = params.gains.c1 * motor * coupling * hold;
    if (signal == SignalPair::ToolPosition) return tool;
    const std::complex<double> pi = params.gains.p_gain + params.gains.i_gain / s;
    return pi * (tool - 1.0);
}

std::vector<FrequencyResponsePoint> analytic_response(Mode mode, const std::vector<double>& freqs,
                                                      const LoopParams& params, SignalPair signal) {
    std::vector<FrequencyResponsePoint> out;
    out.reserve(freqs.size());
    for (double f : freqs) out.push_back(make_point(f, analytic_transfer(mode, f, params, signal)));
    return out;
}

PeakEstimate grid_peak(const std::vector<FrequencyResponsePoint>& sweep) {
    PeakEstimate best{0.0, -std::numeric_limits<double>::infinity()};
    for (const auto& p : sweep)
        if (p.valid && p.magnitude_db > best.magnitude_db) best = {p.freq, p.magnitude_db};
    if (!std::isfinite(best.magnitude_db)) throw Error("peak search: no valid sweep points");
    return best;
}

PeakEstimate find_peak(Mode mode, const std::vector<FrequencyResponsePoint>& sweep,
                       const SweepConfig& cfg, double tolerance_hz) {
    PeakEstimate best = grid_peak(sweep);
    std::size_t idx = 0;
    while (sweep[idx].freq != best.freq) ++idx;
    double lo = idx > 0 ? sweep[idx - 1].freq : best.freq;
    double hi = idx + 1 < sweep.size() ? sweep[idx + 1].freq : best.freq;
    if (!(hi > lo)) return best;

    auto mag = [&](double f) {
        const auto p = measure_point(mode, f, cfg);
        return p.valid ? p.magnitude_db : -std::numeric_limits<double>::infinity();
    };
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
    double f1 = mag(x1), f2 = mag(x2);
    while (hi - lo > tolerance_hz) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = mag(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = mag(x2);
        }
    }
    const PeakEstimate refined = f1 >= f2 ? PeakEstimate{x1, f1} : PeakEstimate{x2, f2};
    return refined.magnitude_db >= best.magnitude_db ? refined : best;
}

CrossoverReport crossover_check(const std::vector<FrequencyResponsePoint>& h,
                                const std::vector<FrequencyResponsePoint>& l,
                                const std::vector<FrequencyResponsePoint>& a,
                                const CrossoverConfig& cfg) {
    if (h.size() != l.size() || h.size() != a.size())
        throw InvalidArgument("crossover check: sweeps must share one grid");
    for (std::size_t i = 0; i < h.size(); ++i)
        if (h[i].freq != l[i].freq || h[i].freq != a[i].freq)
            throw InvalidArgument("crossover check: sweeps must share one grid");

    CrossoverReport r;
    double low_sum = 0.0, high_sum = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!h[i].valid || !l[i].valid || !a[i].valid) continue;
        if (h[i].freq < cfg.low_edge) {
            low_sum += std::abs(a[i].magnitude_db - h[i].magnitude_db);
            ++r.low_points;
        } else if (h[i].freq > cfg.high_edge) {
            high_sum += std::abs(a[i].magnitude_db - l[i].magnitude_db);
            ++r.high_points;
        }
    }
    r.low_deviation_db = r.low_points ? low_sum / r.low_points : 0.0;
    r.high_deviation_db = r.high_points ? high_sum / r.high_points : 0.0;
    r.low_pass = r.low_points > 0 && r.low_deviation_db < cfg.tol_low;
    r.high_pass = r.high_points > 0 && r.high_deviation_db < cfg.tol_high;

    auto describe = [](const char* branch, const char* ref, int points, double dev, double tol) {
        std::ostringstream os;
        os << branch << " band: mean |A - " << ref << "| = " << dev << " dB over " << points
           << " points, tolerance " << tol << " dB";
        return os.str();
    };
    if (!r.low_pass)
        r.diffs.push_back(describe("low", "H", r.low_points, r.low_deviation_db, cfg.tol_low));
    if (!r.high_pass)
        r.diffs.push_back(describe("high", "L", r.high_points, r.high_deviation_db, cfg.tol_high));
    return r;
}

std::string sweep_csv(const SweepTable& table) {
    static const Mode kModes[] = {Mode::H, Mode::L, Mode::A};
    std::ostringstream os;
    os << "freq";
    for (Mode m : kModes) os << ",magDb_" << to_string(m);
    for (Mode m : {Mode::H, Mode::L}) os << ",magDb_" << to_string(m) << "_analytic";
    for (Mode m : kModes) os << ",phaseDeg_" << to_string(m);
    for (Mode m : {Mode::H, Mode::L}) os << ",phaseDeg_" << to_string(m) << "_analytic";
    os << '\n';

    auto cell = [&](const std::map<Mode, std::vector<FrequencyResponsePoint>>& src, Mode m,
                    std::size_t i, bool phase) {
        const auto it = src.find(m);
        if (it == src.end() || i >= it->second.size() || !it->second[i].valid) return std::string();
        return format_number(phase ? it->second[i].phase_deg : it->second[i].magnitude_db);
    };
    for (std::size_t i = 0; i < table.freqs.size(); ++i) {
        os << format_number(table.freqs[i]);
        for (Mode m : kModes) os << ',' << cell(table.measured, m, i, false);
        for (Mode m : {Mode::H, Mode::L}) os << ',' << cell(table.analytic, m, i, false);
        for (Mode m : kModes) os << ',' << cell(table.measured, m, i, true);
        for (Mode m : {Mode::H, Mode::L}) os << ',' << cell(table.analytic, m, i, true);
        os << '\n';
    }
    return os.str();
}

void write_sweep_csv(const std::filesystem::path& path, const SweepTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open sweep file " + path.string());
    out << sweep_csv(table);
    if (!out) throw Error("failed writing sweep file " + path.string());
}

} // namespace viasim
