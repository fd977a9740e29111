#pragma once

#include "viasim/analysis.hpp"
#include "viasim/experiment.hpp"
#include "viasim/session_server.hpp"
#include "viasim/sysid.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace viasim {

/// Auto picks minjerk for precision trials and strike for dynamic ones.
enum class OperatorKind { Auto, MinJerk, Strike, Playback };

std::string_view to_string(OperatorKind kind);
OperatorKind parse_operator_kind(std::string_view text);

/// Settings of a single `trial` run.
struct TrialConfig {
    Task task = Task::Precision;
    Mode mode = Mode::H;
    OperatorKind op = OperatorKind::Auto;
    double start = 0.0;   // rad, handle start (precision)
    double target = 0.3;  // rad, target (precision) or wall (dynamic)
    std::string playback_file;
    std::uint64_t seed = 0;
};

/// Everything a command can be configured with. Defaults are the library
/// defaults, so an empty file resolves to the published constants.
struct RunConfig {
    std::uint64_t seed = 7;
    std::string output_dir = "out";
    LoopParams params;
    CohortConfig cohort;
    SettlingSpec settling;
    ItaeOrigin itae_origin = ItaeOrigin::MoveInstant;
    TrialConfig trial;
    ExperimentPlan experiment;
    SweepConfig sysid;
    double sysid_freq_min = 0.2; // Hz, log-spaced grid
    double sysid_freq_max = 20.0;
    int sysid_points = 40;
    std::vector<Mode> sysid_modes{Mode::H, Mode::L, Mode::A};
    CrossoverConfig crossover;
    AnalysisConfig stats;
    ServerConfig service;

    /// Plan, sweep and session settings with the shared sections applied.
    ExperimentPlan resolved_plan() const;
    SweepConfig resolved_sweep() const;
    ServerConfig resolved_service() const;
    void validate() const;
};

/// One trial as configured in `cfg.trial`, driven by the nominal cohort
/// operator without trial jitter. The trace is handed back when non-null.
TrialRecord run_configured_trial(const RunConfig& cfg, std::vector<SimFrame>* trace = nullptr);

/// Names of every accepted key, as "section.key", in output order.
std::vector<std::string> config_keys();

/// Set one key from its text form. Throws ConfigError on unknown keys or
/// unparsable values.
void set_config_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& dotted_key);

/// INI text: `[section]` headers, `key = value` lines, `;` or `#` comments.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Fully resolved INI text including every default.
std::string print_config(const RunConfig& cfg);

} // namespace viasim
