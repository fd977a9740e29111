#include "viasim/analysis.hpp"

#include "viasim/error.hpp"
#include "viasim/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace viasim {

namespace {

constexpr Measure kMeasures[] = {Measure::TravelTime, Measure::Itae, Measure::MaxVelocity, Measure::Gain};
constexpr Aggregation kAggregations[] = {Aggregation::Median, Aggregation::Extreme};

Mode setting_mode(Setting s) {
    switch (s) {
    case Setting::H: return Mode::H;
    case Setting::L: return Mode::L;
    default: return Mode::A;
    }
}

bool usable(const TrialRecord& r, Measure m, Setting s, const AnalysisConfig& cfg) {
    const PlannedTrial& p = r.plan;
    if (r.failed || p.condition.task != measure_task(m) || p.condition.mode != setting_mode(s))
        return false;
    if (s == Setting::AStar) {
        if (!p.switch_phase) return false;
    } else if (p.switch_phase || p.phase != cfg.reference_phase) {
        return false;
    }
    if (const auto* o = std::get_if<PrecisionOutcome>(&r.outcome)) {
        if (!o->moved) return false;
        if (cfg.fixed_steps_only && !p.fixed_step) return false;
        return true;
    }
    const auto& d = std::get<DynamicOutcome>(r.outcome);
    return d.impact && std::isfinite(d.gain);
}

double value_of(const TrialRecord& r, Measure m) {
    switch (m) {
    case Measure::TravelTime: return std::get<PrecisionOutcome>(r.outcome).censored_travel_time;
    case Measure::Itae: return std::get<PrecisionOutcome>(r.outcome).itae;
    case Measure::MaxVelocity: return std::get<DynamicOutcome>(r.outcome).max_tool_vel;
    case Measure::Gain: return std::get<DynamicOutcome>(r.outcome).gain;
    }
    return 0.0;
}

std::string optional_number(bool present, double v) { return present ? format_number(v) : ""; }

} // namespace

std::string_view to_string(Measure m) {
    switch (m) {
    case Measure::TravelTime: return "travelTime";
    case Measure::Itae: return "itae";
    case Measure::MaxVelocity: return "maxVelocity";
    case Measure::Gain: return "gain";
    }
    return "?";
}

std::string_view to_string(Aggregation a) { return a == Aggregation::Median ? "median" : "extreme"; }

Task measure_task(Measure m) {
    return m == Measure::TravelTime || m == Measure::Itae ? Task::Precision : Task::Dynamic;
}

double extreme_fraction(Measure m) { return measure_task(m) == Task::Precision ? 0.1 : 0.9; }

std::string_view to_string(Setting s) {
    switch (s) {
    case Setting::H: return "H";
    case Setting::L: return "L";
    case Setting::A: return "A";
    case Setting::AStar: return "A*";
    }
    return "?";
}

std::string Comparison::name() const {
    return std::string(to_string(first)) + "-" + std::string(to_string(second));
}

const std::vector<Comparison>& report_comparisons() {
    static const std::vector<Comparison> kPairs = {{Setting::L, Setting::H},
                                                   {Setting::A, Setting::H},
                                                   {Setting::A, Setting::L},
                                                   {Setting::AStar, Setting::H},
                                                   {Setting::AStar, Setting::L}};
    return kPairs;
}

const ReportCell& AnalysisReport::at(Measure m, Aggregation a, std::string_view comparison) const {
    for (const auto& c : cells)
        if (c.measure == m && c.aggregation == a && c.comparison.name() == comparison) return c;
    throw InvalidArgument("report has no cell " + std::string(comparison));
}

std::optional<double> participant_value(const std::vector<TrialRecord>& records, int participant,
                                        Measure m, Aggregation a, Setting s, const AnalysisConfig& cfg) {
    std::vector<double> values;
    for (const auto& r : records)
        if (r.plan.participant == participant && usable(r, m, s, cfg)) values.push_back(value_of(r, m));
    if (values.empty()) return std::nullopt;
    return a == Aggregation::Median ? median(values) : percentile_midpoint(values, extreme_fraction(m));
}

AnalysisReport analysis_report(const std::vector<TrialRecord>& records, const AnalysisConfig& cfg) {
    AnalysisReport report;
    report.config = cfg;
    std::vector<int> participants;
    for (const auto& r : records) participants.push_back(r.plan.participant);
    std::sort(participants.begin(), participants.end());
    participants.erase(std::unique(participants.begin(), participants.end()), participants.end());

    std::uint64_t index = 0;
    for (Measure m : kMeasures) {
        for (Aggregation a : kAggregations) {
            for (const Comparison& cmp : report_comparisons()) {
                ReportCell cell;
                cell.measure = m;
                cell.aggregation = a;
                cell.comparison = cmp;
                std::vector<double> diffs;
                for (int p : participants) {
                    const auto first = participant_value(records, p, m, a, cmp.first, cfg);
                    const auto second = participant_value(records, p, m, a, cmp.second, cfg);
                    if (first && second) diffs.push_back(*first - *second);
                }
                cell.n = static_cast<int>(diffs.size());
                cell.present = !diffs.empty();
                if (cell.present) {
                    BootstrapConfig boot = cfg.bootstrap;
                    boot.seed = mix_seed(cfg.bootstrap.seed, index);
                    cell.effect = median_difference_ci(diffs, boot);
                    try {
                        cell.test = wilcoxon_signed_rank(diffs);
                    } catch (const InvalidArgument&) {
                        cell.test = WilcoxonResult{};
                        cell.test.degenerate = true;
                        cell.test.n_effective = 1;
                    }
                    cell.significant = !cell.test.degenerate && cell.test.p_value < cfg.alpha;
                }
                report.cells.push_back(cell);
                ++index;
            }
        }
    }
    return report;
}

const std::string& report_csv_header() {
    static const std::string header =
        "measure,aggregation,pair,present,n,effect,ciLow,ciHigh,estimator,p,method,w,nEffective,verdict";
    return header;
}

std::string report_csv(const AnalysisReport& report) {
    std::ostringstream os;
    os << report_csv_header() << '\n';
    for (const auto& c : report.cells) {
        const bool eff = c.present && c.effect.valid;
        const bool test = c.present && !c.test.degenerate;
        os << to_string(c.measure) << ',' << to_string(c.aggregation) << ',' << c.comparison.name() << ','
           << (c.present ? 1 : 0) << ',' << c.n << ',' << optional_number(eff, c.effect.estimate) << ','
           << optional_number(eff, c.effect.ci_low) << ',' << optional_number(eff, c.effect.ci_high) << ','
           << (eff ? to_string(c.effect.estimator) : "") << ',' << optional_number(test, c.test.p_value)
           << ',' << (test ? to_string(c.test.method) : "") << ',' << optional_number(test, c.test.w) << ','
           << (c.present ? std::to_string(c.test.n_effective) : "") << ','
           << (!c.present ? "absent" : c.significant ? "significant" : "not significant") << '\n';
    }
    return os.str();
}

nlohmann::json report_json(const AnalysisReport& report) {
    using nlohmann::json;
    json cells = json::array();
    for (const auto& c : report.cells) {
        json j;
        j["measure"] = to_string(c.measure);
        j["aggregation"] = to_string(c.aggregation);
        j["pair"] = c.comparison.name();
        j["present"] = c.present;
        j["n"] = c.n;
        const bool eff = c.present && c.effect.valid;
        j["effect"] = eff ? json(c.effect.estimate) : json();
        j["ciLow"] = eff ? json(c.effect.ci_low) : json();
        j["ciHigh"] = eff ? json(c.effect.ci_high) : json();
        const bool test = c.present && !c.test.degenerate;
        j["p"] = test ? json(c.test.p_value) : json();
        j["method"] = test ? json(to_string(c.test.method)) : json();
        j["w"] = test ? json(c.test.w) : json();
        j["nEffective"] = c.test.n_effective;
        j["verdict"] = !c.present ? "absent" : c.significant ? "significant" : "not significant";
        cells.push_back(j);
    }
    const auto& cfg = report.config;
    return json{{"alpha", cfg.alpha},
                {"referencePhase", to_string(cfg.reference_phase)},
                {"precisionTrials", cfg.fixed_steps_only ? "fixed-distance steps" : "all"},
                {"extremePercentile", {{"precision", 0.1}, {"dynamic", 0.9}}},
                {"effect",
                 {{"estimator", to_string(cfg.bootstrap.estimator)},
                  {"interval", "percentile bootstrap"},
                  {"level", cfg.bootstrap.level},
                  {"resamples", cfg.bootstrap.resamples},
                  {"seed", cfg.bootstrap.seed}}},
                {"test",
                 {{"name", "Wilcoxon signed-rank"},
                  {"zeroDifferences", "excluded"},
                  {"ties", "average ranks"},
                  {"exactUpTo", kWilcoxonExactLimit}}},
                {"cells", cells}};
}

} // namespace viasim
