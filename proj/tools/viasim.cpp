// viasim: single trials, sysid sweeps, synthetic experiments, statistics
// reports and the interactive session service.

#include "viasim/analysis.hpp"
#include "viasim/config.hpp"
#include "viasim/error.hpp"
#include "viasim/experiment.hpp"
#include "viasim/session_server.hpp"
#include "viasim/sysid.hpp"
#include "viasim/trace_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace viasim;

namespace {

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2, kCheckFailed = 3 };

// Values given on the command line, applied on top of the config file and
// the environment in the order they were given.
struct Overrides {
    std::optional<std::string> config_file;
    std::vector<std::pair<std::string, std::string>> values;
    bool print_config = false;
};

void add_common(CLI::App& cmd, Overrides& ov) {
    cmd.add_option("-c,--config", ov.config_file, "INI configuration file")->check(CLI::ExistingFile);
    cmd.add_option_function<std::vector<std::string>>(
        "--set",
        [&ov](const std::vector<std::string>& items) {
            for (const auto& item : items) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected section.key=value");
                ov.values.emplace_back(item.substr(0, eq), item.substr(eq + 1));
            }
        },
        "Override one key, e.g. --set plant.inertia=0.02");
    cmd.add_flag("--print-config", ov.print_config, "Print the resolved configuration and exit");
}

// A flag that is shorthand for one configuration key.
void add_key(CLI::App& cmd, Overrides& ov, const std::string& flag, const std::string& key,
             const std::string& help) {
    cmd.add_option_function<std::string>(
        flag, [&ov, key](const std::string& v) { ov.values.emplace_back(key, v); }, help + " [" + key + "]");
}

RunConfig resolve(const Overrides& ov) {
    RunConfig cfg;
    if (ov.config_file) cfg = load_config(*ov.config_file);
    if (const char* root = std::getenv("VIASIM_OUTPUT_ROOT"); root && *root) cfg.output_dir = root;
    for (const auto& [k, v] : ov.values) set_config_value(cfg, k, v);
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

std::string fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---------------------------------------------------------------- trial

int cmd_trial(const RunConfig& cfg, const std::optional<std::string>& out_dir) {
    const TrialConfig& tc = cfg.trial;
    std::vector<SimFrame> trace;
    const TrialRecord rec = run_configured_trial(cfg, &trace);

    const fs::path dir = out_dir ? fs::path(*out_dir)
                                 : fs::path(cfg.output_dir) / ("trial-" + std::string(to_string(tc.task)) + "-" +
                                                               std::string(to_string(tc.mode)));
    fs::create_directories(dir);
    write_trace_csv(dir / "trace.csv", trace);

    nlohmann::json j;
    j["version"] = library_version();
    j["task"] = to_string(tc.task);
    j["mode"] = to_string(tc.mode);
    j["operator"] = to_string(tc.op);
    j["start"] = rec.plan.target_from;
    j["target"] = tc.target;
    j["seed"] = tc.seed;
    j["failed"] = rec.failed;
    if (rec.failed) j["error"] = rec.error;
    std::visit([&j](const auto& o) { j["outcome"] = o; }, rec.outcome);
    j["trace"] = "trace.csv";
    write_text(dir / "outcome.json", j.dump(2) + "\n");

    if (const auto* p = std::get_if<PrecisionOutcome>(&rec.outcome)) {
        if (p->travel_time)
            std::cout << "travel time " << fixed(*p->travel_time) << " s";
        else
            std::cout << "travel time not settled (" << fixed(p->censored_travel_time) << " s censored)";
        std::cout << ", ITAE " << format_number(p->itae) << " rad s^2\n";
    } else {
        const auto& d = std::get<DynamicOutcome>(rec.outcome);
        std::cout << "max velocity " << fixed(d.max_tool_vel, 2) << " rad/s, gain " << fixed(d.gain) << "\n";
    }
    std::cerr << "wrote " << (dir / "outcome.json").string() << "\n";
    if (rec.failed) {
        std::cerr << "trial failed: " << rec.error << "\n";
        return kRuntime;
    }
    return kOk;
}

// ---------------------------------------------------------------- sysid

int cmd_sysid(const RunConfig& cfg, const std::optional<std::string>& out_file, bool check) {
    const SweepConfig sweep = cfg.resolved_sweep();
    SweepTable table;
    table.freqs = sweep.freq_grid;
    for (Mode m : cfg.sysid_modes) {
        table.measured[m] = measure_response(m, sweep);
        if (m != Mode::A) table.analytic[m] = analytic_response(m, sweep.freq_grid, sweep.params, sweep.signal);
    }
    const fs::path path = out_file ? fs::path(*out_file) : fs::path(cfg.output_dir) / "sysid.csv";
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_sweep_csv(path, table);
    std::cerr << "wrote " << path.string() << "\n";

    bool ok = true;
    std::map<Mode, PeakEstimate> peaks;
    for (const auto& [m, pts] : table.measured) {
        peaks[m] = find_peak(m, pts, sweep);
        std::cout << "mode " << to_string(m) << ": peak " << fixed(peaks[m].freq, 2) << " Hz, "
                  << fixed(peaks[m].magnitude_db, 2) << " dB\n";
    }
    if (peaks.count(Mode::L) && std::abs(peaks[Mode::L].freq - 4.5) > 0.25) ok = false;
    if (peaks.count(Mode::A) && std::abs(peaks[Mode::A].freq - 6.5) > 1.0) ok = false;

    const auto& mm = table.measured;
    if (mm.count(Mode::H) && mm.count(Mode::L) && mm.count(Mode::A)) {
        const CrossoverReport r = crossover_check(mm.at(Mode::H), mm.at(Mode::L), mm.at(Mode::A), cfg.crossover);
        std::cout << "crossover: low band |A-H| " << fixed(r.low_deviation_db, 2) << " dB ("
                  << (r.low_pass ? "pass" : "fail") << "), high band |A-L| " << fixed(r.high_deviation_db, 2)
                  << " dB (" << (r.high_pass ? "pass" : "fail") << ")\n";
        for (const auto& d : r.diffs) std::cout << "  " << d << "\n";
        ok = ok && r.passed();
    }
    if (check && !ok) {
        std::cerr << "sysid check failed\n";
        return kCheckFailed;
    }
    return kOk;
}

// ---------------------------------------------------------------- experiment

// Resolved configuration without settings that do not change results.
std::string parameter_text(RunConfig cfg) {
    cfg.output_dir.clear();
    cfg.experiment.threads = 0;
    cfg.sysid.threads = 0;
    return print_config(cfg);
}

int cmd_experiment(const RunConfig& cfg, const std::optional<std::string>& out_dir) {
    const ExperimentPlan plan = cfg.resolved_plan();
    const fs::path dir = out_dir ? fs::path(*out_dir) : fs::path(cfg.output_dir) / ("run-seed" + std::to_string(cfg.seed));
    const std::string params = parameter_text(cfg);
    const auto records = run_experiment_to_dir(plan, dir, params);
    write_text(dir / "config.ini", params);

    std::ifstream manifest(dir / "manifest.json", std::ios::binary);
    std::ostringstream text;
    text << manifest.rdbuf();
    long failed = 0;
    for (const auto& r : records) failed += r.failed ? 1 : 0;
    std::cout << records.size() << " trials, " << failed << " failed\n";
    std::cout << "manifest sha256 " << sha256_hex(text.str()) << "\n";
    std::cerr << "wrote " << dir.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------- stats

int cmd_stats(const RunConfig& cfg, const std::string& run_dir, const std::optional<std::string>& out_dir) {
    const fs::path run(run_dir);
    const auto records = read_records_csv(run / "records.csv");
    const AnalysisReport report = analysis_report(records, cfg.stats);
    const fs::path dir = out_dir ? fs::path(*out_dir) : run;
    write_text(dir / "report.csv", report_csv(report));
    write_text(dir / "report.json", report_json(report).dump(2) + "\n");

    std::printf("%-12s %-8s %-5s %3s %10s %22s %10s  %s\n", "measure", "agg", "pair", "n", "effect", "CI",
                "p", "verdict");
    for (const auto& c : report.cells) {
        const std::string agg(to_string(c.aggregation));
        const std::string pair = c.comparison.name();
        if (!c.present) {
            std::printf("%-12s %-8s %-5s %3d %10s %22s %10s  absent\n", std::string(to_string(c.measure)).c_str(),
                        agg.c_str(), pair.c_str(), c.n, "", "", "");
            continue;
        }
        const std::string ci = "[" + format_number(c.effect.ci_low) + ", " + format_number(c.effect.ci_high) + "]";
        const std::string p = c.test.degenerate ? "" : format_number(c.test.p_value);
        std::printf("%-12s %-8s %-5s %3d %10s %22s %10s  %s\n", std::string(to_string(c.measure)).c_str(),
                    agg.c_str(), pair.c_str(), c.n, format_number(c.effect.estimate).c_str(), ci.c_str(),
                    p.c_str(), c.significant ? "significant" : "not significant");
    }
    std::cerr << "wrote " << (dir / "report.csv").string() << " and report.json\n";
    return kOk;
}

// ---------------------------------------------------------------- serve

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

int cmd_serve(const RunConfig& cfg, const std::optional<std::string>& record) {
    ServerConfig sc = cfg.resolved_service();
    if (record) sc.session.record_path = *record;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    run_session(sc, g_stop);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variable impedance teleoperation simulator"};
    app.set_version_flag("--version", std::string(library_version()));
    app.require_subcommand(1);

    Overrides ov;
    std::optional<std::string> out;

    auto* trial = app.add_subcommand("trial", "Run one trial and print its headline metric");
    add_common(*trial, ov);
    trial->add_option_function<std::string>(
             "--task", [&ov](const std::string& v) { ov.values.emplace_back("trial.task", v); },
             "precision or dynamic [trial.task]")
        ->required();
    add_key(*trial, ov, "--mode", "trial.mode", "H, L or A");
    add_key(*trial, ov, "--operator", "trial.operator", "auto, minjerk, strike or playback");
    add_key(*trial, ov, "--start", "trial.start", "Handle start position, rad");
    add_key(*trial, ov, "--target", "trial.target", "Target or wall position, rad");
    add_key(*trial, ov, "--playback", "trial.playback_file", "Two-column CSV (t, position) for playback");
    add_key(*trial, ov, "--seed", "trial.seed", "Seed echoed in the outputs");
    add_key(*trial, ov, "--reach-duration", "operator.reach_duration", "Minimum-jerk reach duration, s");
    add_key(*trial, ov, "--strike-freq", "operator.strike_frequency", "Strike frequency, Hz");
    add_key(*trial, ov, "--peak-vel", "operator.peak_handle_velocity", "Peak forward handle velocity, rad/s");
    trial->add_option("-o,--out", out, "Output directory");

    auto* sysid = app.add_subcommand("sysid", "Frequency sweep of the loop in each mode");
    add_common(*sysid, ov);
    add_key(*sysid, ov, "--modes", "sysid.modes", "Comma-separated modes");
    add_key(*sysid, ov, "--signal", "sysid.signal", "tool-position or handle-torque");
    add_key(*sysid, ov, "--amplitude", "sysid.amplitude", "Handle sine amplitude, rad");
    add_key(*sysid, ov, "--points", "sysid.points", "Grid points");
    add_key(*sysid, ov, "--threads", "sysid.threads", "Worker threads (0: all cores)");
    bool check = false;
    sysid->add_flag("--check", check, "Exit with status 3 unless the resonance and crossover checks pass");
    sysid->add_option("-o,--out", out, "Output CSV file");

    auto* experiment = app.add_subcommand("experiment", "Run the synthetic experiment into a run directory");
    add_common(*experiment, ov);
    add_key(*experiment, ov, "--participants", "experiment.participants", "Number of virtual participants");
    add_key(*experiment, ov, "--seed", "run.seed", "Master seed");
    add_key(*experiment, ov, "--threads", "experiment.threads", "Worker threads (0: all cores)");
    experiment->add_flag_function(
        "--traces", [&ov](std::int64_t) { ov.values.emplace_back("experiment.write_traces", "true"); },
        "Write a trace CSV per trial");
    experiment->add_option("-o,--out", out, "Run directory");

    auto* stats = app.add_subcommand("stats", "Paired comparisons over a run directory");
    add_common(*stats, ov);
    std::string run_dir;
    stats->add_option("--run", run_dir, "Run directory with records.csv")->required()->check(CLI::ExistingDirectory);
    add_key(*stats, ov, "--estimator", "stats.estimator", "median or hodges-lehmann");
    add_key(*stats, ov, "--resamples", "stats.resamples", "Bootstrap resamples");
    add_key(*stats, ov, "--alpha", "stats.alpha", "Significance level");
    stats->add_option("-o,--out", out, "Report directory (default: the run directory)");

    auto* serve = app.add_subcommand("serve", "Serve the interactive session over WebSocket at /session");
    add_common(*serve, ov);
    add_key(*serve, ov, "--address", "service.address", "Listen address");
    add_key(*serve, ov, "--port", "service.port", "Listen port (0: any free port)");
    add_key(*serve, ov, "--stream-rate", "service.stream_rate", "StateUpdate rate, Hz");
    add_key(*serve, ov, "--mode", "service.initial_mode", "Mode at start");
    add_key(*serve, ov, "--duration", "service.duration", "Stop after this much simulated time, s (0: never)");
    std::optional<std::string> record;
    serve->add_option("--record", record, "Write a 1 kHz trace of the session to this CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    RunConfig cfg;
    try {
        cfg = resolve(ov);
    } catch (const Error& e) {
        std::cerr << "viasim: " << e.what() << "\n";
        return kUsage;
    }
    if (ov.print_config) {
        std::cout << print_config(cfg);
        return kOk;
    }

    try {
        if (trial->parsed()) return cmd_trial(cfg, out);
        if (sysid->parsed()) return cmd_sysid(cfg, out, check);
        if (experiment->parsed()) return cmd_experiment(cfg, out);
        if (stats->parsed()) return cmd_stats(cfg, run_dir, out);
        if (serve->parsed()) return cmd_serve(cfg, record);
    } catch (const ConfigError& e) {
        std::cerr << "viasim: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "viasim: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}
