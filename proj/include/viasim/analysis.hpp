#pragma once

#include "viasim/experiment.hpp"
#include "viasim/stats.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace viasim {

enum class Measure { TravelTime, Itae, MaxVelocity, Gain };
enum class Aggregation { Median, Extreme };

std::string_view to_string(Measure m);
std::string_view to_string(Aggregation a);

/// Task a measure belongs to.
Task measure_task(Measure m);

/// Percentile used by the extreme aggregation: 10th for the precision
/// measures (lower is better), 90th for the dynamic ones.
double extreme_fraction(Measure m);

/// A tool setting as seen by the analysis; AStar is mode A in the switch phase.
enum class Setting { H, L, A, AStar };

std::string_view to_string(Setting s);

struct Comparison {
    Setting first;  // effect is first - second
    Setting second;
    std::string name() const; // e.g. "L-H", "A*-L"
};

/// L-H, A-H, A-L, A*-H, A*-L.
const std::vector<Comparison>& report_comparisons();

struct AnalysisConfig {
    double alpha = 0.05;
    BootstrapConfig bootstrap;
    Phase reference_phase = Phase::III;
    bool fixed_steps_only = true; // precision measures use the +-0.3 rad steps only
};

struct ReportCell {
    Measure measure = Measure::TravelTime;
    Aggregation aggregation = Aggregation::Median;
    Comparison comparison{Setting::L, Setting::H};
    bool present = false; // false: one side has no data
    int n = 0;            // participants with both values
    EffectSize effect;
    WilcoxonResult test;
    bool significant = false;
};

struct AnalysisReport {
    std::vector<ReportCell> cells; // measure-major, then aggregation, then comparison
    AnalysisConfig config;

    const ReportCell& at(Measure m, Aggregation a, std::string_view comparison) const;
};

/// Per-participant value of one measure for one setting, aggregated over
/// that participant's usable trials. Empty when there are none.
std::optional<double> participant_value(const std::vector<TrialRecord>& records, int participant,
                                        Measure m, Aggregation a, Setting s,
                                        const AnalysisConfig& cfg = {});

/// The 4 measures x 2 aggregations x 5 comparisons grid.
AnalysisReport analysis_report(const std::vector<TrialRecord>& records, const AnalysisConfig& cfg = {});

const std::string& report_csv_header();
std::string report_csv(const AnalysisReport& report);
nlohmann::json report_json(const AnalysisReport& report);

} // namespace viasim
