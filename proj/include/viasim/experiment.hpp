#pragma once

#include "viasim/metrics.hpp"
#include "viasim/operator.hpp"
#include "viasim/teleop.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace viasim {

enum class Task { Precision, Dynamic };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);

/// Task and tool setting of a block. The short names follow the protocol:
/// PR = precision/H, PC = precision/L, PA = precision/A,
/// DR = dynamic/L, DC = dynamic/H, DA = dynamic/A.
struct Condition {
    Task task = Task::Precision;
    Mode mode = Mode::H;

    std::string_view name() const;
    bool operator==(const Condition&) const = default;
};

Condition parse_condition(std::string_view name);

/// The six conditions in canonical order PR, PC, PA, DR, DC, DA.
const std::array<Condition, 6>& all_conditions();

enum class Phase { I, II, III, IV };

std::string_view to_string(Phase phase);
Phase parse_phase(std::string_view text);

/// Ordered targets of one block. `fixed_step[i]` marks the transition into
/// `positions[i]` (from `positions[i-1]`, or from `start` for i = 0) as one
/// of the +-0.3 rad steps used by the precision analysis.
struct TargetSequence {
    double start = 0.0;
    std::vector<double> positions;
    std::vector<bool> fixed_step;

    double from(std::size_t i) const { return i == 0 ? start : positions[i - 1]; }
};

inline constexpr double kTargetLow = -0.42;      // rad, the single far position
inline constexpr double kTargetSpreadLow = -0.1789; // rad
inline constexpr double kTargetHigh = 0.5;       // rad
inline constexpr double kFixedStep = 0.3;        // rad

/// Even slots hold -0.42 once and an equal spread over [-0.1789, 0.5] in
/// seeded order; each odd slot is its predecessor +-0.3 rad, direction drawn
/// from the seed among those staying in range. Other transitions never
/// equal 0.3 rad, so exactly block_length/2 steps are fixed.
TargetSequence generate_target_sequence(std::uint64_t seed, int block_length = 20);

/// Williams-design Latin square over the six conditions; `group` in 1..6.
std::array<Condition, 6> latin_square_order(int group);

struct ExperimentPlan {
    int participants = 24;
    std::uint64_t master_seed = 7;
    int blocks_per_phase = 6;     // phases II and III, one block per condition
    int trials_per_block = 20;
    int switch_blocks = 10;       // phase IV
    int switch_trials = 2;        // per phase IV block
    bool include_training = true; // phase II
    double precision_window = 2.0; // s per precision trial
    double dynamic_timeout = 2.0;  // s, no impact by then is a failed trial
    double dynamic_tail = 0.05;    // s simulated after impact
    CohortConfig cohort;
    LoopParams params;
    SettlingSpec settling;
    ItaeOrigin itae_origin = ItaeOrigin::MoveInstant;
    bool write_traces = false;
    int threads = 0; // 0: hardware concurrency

    void validate() const;
};

/// One scheduled trial before execution.
struct PlannedTrial {
    int participant = 0; // 1-based
    int group = 0;       // Latin-square row, 1..6
    Phase phase = Phase::III;
    int block = 0;       // 1-based within the phase
    int trial = 0;       // 1-based within the block
    Condition condition;
    bool switch_phase = false; // phase IV, labelled A*
    double target_from = 0.0;
    double target_to = 0.0;
    bool fixed_step = false;
    std::uint64_t trial_seed = 0;

    /// Condition name, with a trailing '*' in the switch phase.
    std::string label() const;
};

std::vector<PlannedTrial> build_schedule(const ExperimentPlan& plan);

/// The virtual participant behind a 1-based participant index.
VirtualParticipant participant_for(const ExperimentPlan& plan, int participant);

using TrialOutcome = std::variant<PrecisionOutcome, DynamicOutcome>;

struct TrialRecord {
    PlannedTrial plan;
    TrialOutcome outcome;
    bool failed = false;
    std::string error;
    std::string trace_path; // relative to the run directory, empty if not written
};

/// Operator, environment and duration of one planned trial.
ScenarioSpec trial_scenario(const PlannedTrial& trial, const VirtualParticipant& who,
                            const ExperimentPlan& plan);

/// Simulate and score one trial. Precision trials run the full window;
/// dynamic trials stop `dynamic_tail` after impact. The trace is handed
/// back when `trace` is non-null.
TrialRecord run_trial(const PlannedTrial& trial, const VirtualParticipant& who,
                      const ExperimentPlan& plan, std::vector<SimFrame>* trace = nullptr);

/// run_trial on an explicit scenario (for example a recorded operator).
TrialRecord run_trial_scenario(const PlannedTrial& trial, const ScenarioSpec& scenario,
                               const ExperimentPlan& plan, std::vector<SimFrame>* trace = nullptr);

/// Score a stored trace exactly as run_trial does.
TrialOutcome score_trace(const PlannedTrial& trial, std::span<const SimFrame> trace,
                         const ExperimentPlan& plan);

/// Run every scheduled trial. With a run directory, traces go to
/// `<run_dir>/traces/` when plan.write_traces is set.
std::vector<TrialRecord> run_experiment(const ExperimentPlan& plan,
                                        const std::optional<std::filesystem::path>& run_dir = {});

const std::string& records_csv_header();
void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records);
void write_records_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& records);
std::vector<TrialRecord> read_records_csv(std::istream& in);
std::vector<TrialRecord> read_records_csv(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Runs the experiment into `run_dir`: records.csv, traces/ (optional) and
/// manifest.json with the master seed, a hash of the resolved parameters
/// (`config_text`) and a hash of the records file. Returns the records.
std::vector<TrialRecord> run_experiment_to_dir(const ExperimentPlan& plan,
                                               const std::filesystem::path& run_dir,
                                               const std::string& config_text);

std::string_view library_version();

} // namespace viasim
