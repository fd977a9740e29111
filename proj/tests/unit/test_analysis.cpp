#include "viasim/analysis.hpp"
#include "viasim/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

using namespace viasim;

namespace {

TrialRecord precision(int participant, Mode mode, double travel, bool fixed = true, Phase phase = Phase::III) {
    TrialRecord r;
    r.plan.participant = participant;
    r.plan.phase = phase;
    r.plan.condition = {Task::Precision, mode};
    r.plan.fixed_step = fixed;
    PrecisionOutcome o;
    o.moved = o.settled = true;
    o.travel_time = travel;
    o.censored_travel_time = travel;
    o.itae = travel * 0.01;
    r.outcome = o;
    return r;
}

TrialRecord dynamic(int participant, Mode mode, double gain, bool switching = false) {
    TrialRecord r;
    r.plan.participant = participant;
    r.plan.phase = switching ? Phase::IV : Phase::III;
    r.plan.switch_phase = switching;
    r.plan.condition = {Task::Dynamic, mode};
    DynamicOutcome o;
    o.impact = true;
    o.max_handle_vel = 5.0;
    o.max_tool_vel = 5.0 * gain;
    o.gain = gain;
    r.outcome = o;
    return r;
}

// Ten participants; L equals H trial for trial.
std::vector<TrialRecord> null_records() {
    std::vector<TrialRecord> out;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.2, 0.6), g(0.9, 1.6);
    for (int p = 1; p <= 10; ++p) {
        for (int t = 0; t < 10; ++t) {
            const double travel = u(rng), gain = g(rng);
            for (Mode m : {Mode::H, Mode::L}) {
                out.push_back(precision(p, m, travel));
                out.push_back(dynamic(p, m, gain));
            }
        }
    }
    return out;
}

} // namespace

TEST_SUITE("analysis") {
    TEST_CASE("report grid is 4 measures x 2 aggregations x 5 pairs") {
        const auto report = analysis_report(null_records());
        REQUIRE(report.cells.size() == 40);
        std::set<std::string> keys;
        for (const auto& c : report.cells)
            keys.insert(std::string(to_string(c.measure)) + "/" + std::string(to_string(c.aggregation)) + "/" +
                        c.comparison.name());
        CHECK(keys.size() == 40);
        std::vector<std::string> names;
        for (const auto& c : report_comparisons()) names.push_back(c.name());
        CHECK(names == std::vector<std::string>{"L-H", "A-H", "A-L", "A*-H", "A*-L"});
    }

    TEST_CASE("identical data for two settings is a null result") {
        const auto report = analysis_report(null_records());
        for (Measure m : {Measure::TravelTime, Measure::Itae, Measure::MaxVelocity, Measure::Gain}) {
            for (Aggregation a : {Aggregation::Median, Aggregation::Extreme}) {
                const auto& c = report.at(m, a, "L-H");
                CHECK(c.present);
                CHECK(c.n == 10);
                CHECK(c.test.p_value >= 0.999);
                CHECK(c.effect.estimate == 0.0);
                CHECK_FALSE(c.significant);
            }
        }
    }

    TEST_CASE("missing settings leave the cell absent") {
        const auto report = analysis_report(null_records());
        const auto& c = report.at(Measure::Gain, Aggregation::Median, "A-H");
        CHECK_FALSE(c.present);
        CHECK(c.n == 0);
        const std::string csv = report_csv(report);
        CHECK(csv.find("gain,median,A-H,0,0,,,,,,,,,absent") != std::string::npos);
        CHECK_THROWS_AS(report.at(Measure::Gain, Aggregation::Median, "H-A"), InvalidArgument);
    }

    TEST_CASE("per-participant aggregation uses the median and the 10th/90th percentile") {
        std::vector<TrialRecord> records;
        for (int i = 1; i <= 10; ++i) {
            records.push_back(precision(1, Mode::H, i * 0.1));
            records.push_back(dynamic(1, Mode::L, 1.0 + i * 0.1));
        }
        CHECK(*participant_value(records, 1, Measure::TravelTime, Aggregation::Median, Setting::H) ==
              doctest::Approx(0.55));
        // best and second best travel times
        CHECK(*participant_value(records, 1, Measure::TravelTime, Aggregation::Extreme, Setting::H) ==
              doctest::Approx(0.15));
        // best and second best gains
        CHECK(*participant_value(records, 1, Measure::Gain, Aggregation::Extreme, Setting::L) ==
              doctest::Approx(1.95));
        CHECK_FALSE(participant_value(records, 2, Measure::Gain, Aggregation::Median, Setting::L).has_value());
    }

    TEST_CASE("only fixed-distance precision steps and the reference phase count") {
        std::vector<TrialRecord> records{precision(1, Mode::H, 0.3), precision(1, Mode::H, 5.0, false),
                                         precision(1, Mode::H, 9.0, true, Phase::II)};
        CHECK(*participant_value(records, 1, Measure::TravelTime, Aggregation::Median, Setting::H) == 0.3);
        AnalysisConfig all;
        all.fixed_steps_only = false;
        CHECK(*participant_value(records, 1, Measure::TravelTime, Aggregation::Median, Setting::H, all) ==
              doctest::Approx(2.65));
    }

    TEST_CASE("switch-phase trials feed A* and never A") {
        std::vector<TrialRecord> records{dynamic(1, Mode::A, 1.2), dynamic(1, Mode::A, 1.8, true)};
        CHECK(*participant_value(records, 1, Measure::Gain, Aggregation::Median, Setting::A) == 1.2);
        CHECK(*participant_value(records, 1, Measure::Gain, Aggregation::Median, Setting::AStar) == 1.8);
    }

    TEST_CASE("failed trials and no-impact strikes are skipped") {
        auto failed = dynamic(1, Mode::L, 9.0);
        failed.failed = true;
        auto miss = dynamic(1, Mode::L, 9.0);
        std::get<DynamicOutcome>(miss.outcome).impact = false;
        std::vector<TrialRecord> records{failed, miss, dynamic(1, Mode::L, 1.4)};
        CHECK(*participant_value(records, 1, Measure::Gain, Aggregation::Median, Setting::L) == 1.4);
    }

    TEST_CASE("a consistent shift is detected with the right sign") {
        std::vector<TrialRecord> records;
        std::mt19937_64 rng(3);
        std::normal_distribution<double> noise(0.0, 0.05);
        for (int p = 1; p <= 24; ++p)
            for (int t = 0; t < 10; ++t) {
                records.push_back(dynamic(p, Mode::H, 1.0 + noise(rng)));
                records.push_back(dynamic(p, Mode::L, 1.5 + noise(rng)));
            }
        const auto& c = analysis_report(records).at(Measure::Gain, Aggregation::Median, "L-H");
        CHECK(c.significant);
        CHECK(c.effect.estimate == doctest::Approx(0.5).epsilon(0.1));
        CHECK(c.effect.ci_low > 0.0);
    }

    TEST_CASE("report does not depend on record order") {
        auto records = null_records();
        for (auto& r : records)
            if (r.plan.condition.mode == Mode::L)
                if (auto* d = std::get_if<DynamicOutcome>(&r.outcome)) d->gain += 0.1 * r.plan.participant;
        const auto a = report_csv(analysis_report(records));
        std::shuffle(records.begin(), records.end(), std::mt19937_64(8));
        CHECK(report_csv(analysis_report(records)) == a);
    }

    TEST_CASE("report CSV and JSON carry the same cells") {
        const auto report = analysis_report(null_records());
        std::istringstream csv(report_csv(report));
        std::string line;
        std::getline(csv, line);
        CHECK(line == report_csv_header());
        int rows = 0;
        while (std::getline(csv, line)) ++rows;
        CHECK(rows == 40);
        const auto j = report_json(report);
        CHECK(j["cells"].size() == 40);
        CHECK(j["alpha"] == 0.05);
        CHECK(j["test"]["zeroDifferences"] == "excluded");
        CHECK(j["cells"][0]["pair"] == "L-H");
    }
}
