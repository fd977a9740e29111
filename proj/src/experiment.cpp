#include "viasim/experiment.hpp"

#include "viasim/error.hpp"
#include "viasim/trace_io.hpp"

#include "random_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#ifndef VIASIM_VERSION
#define VIASIM_VERSION "0.0.0"
#endif

namespace viasim {

namespace {

constexpr double kStepTolerance = 1e-9;

int phase_code(Phase p) { return static_cast<int>(p) + 1; }

std::uint64_t phase_sequence_seed(std::uint64_t master, Phase phase) {
    return mix_seed(master, static_cast<std::uint64_t>(phase_code(phase)));
}

std::uint64_t trial_seed_for(std::uint64_t participant_seed, Phase phase, int block, int trial) {
    const auto key = static_cast<std::uint64_t>(phase_code(phase)) * 1000000ULL +
                     static_cast<std::uint64_t>(block) * 1000ULL + static_cast<std::uint64_t>(trial);
    return mix_seed(participant_seed, key);
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
    return s;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    if (s.empty()) return 0.0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw InvalidArgument("records CSV: bad number '" + s + "'");
    return v;
}

long parse_long(const std::string& s) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw InvalidArgument("");
        return v;
    } catch (const std::exception&) {
        throw InvalidArgument("records CSV: bad integer '" + s + "'");
    }
}

std::string num(double v) { return format_number(v); }

} // namespace

std::string_view to_string(Task task) { return task == Task::Precision ? "precision" : "dynamic"; }

Task parse_task(std::string_view text) {
    if (text == "precision") return Task::Precision;
    if (text == "dynamic") return Task::Dynamic;
    throw InvalidArgument("unknown task '" + std::string(text) + "' (expected precision or dynamic)");
}

const std::array<Condition, 6>& all_conditions() {
    static const std::array<Condition, 6> kAll = {{{Task::Precision, Mode::H},
                                                    {Task::Precision, Mode::L},
                                                    {Task::Precision, Mode::A},
                                                    {Task::Dynamic, Mode::L},
                                                    {Task::Dynamic, Mode::H},
                                                    {Task::Dynamic, Mode::A}}};
    return kAll;
}

std::string_view Condition::name() const {
    static constexpr std::array<std::string_view, 6> kNames = {"PR", "PC", "PA", "DR", "DC", "DA"};
    const auto& all = all_conditions();
    for (std::size_t i = 0; i < all.size(); ++i)
        if (all[i] == *this) return kNames[i];
    return "??";
}

Condition parse_condition(std::string_view name) {
    for (const auto& c : all_conditions())
        if (c.name() == name) return c;
    throw InvalidArgument("unknown condition '" + std::string(name) + "'");
}

std::string_view to_string(Phase phase) {
    static constexpr std::array<std::string_view, 4> kNames = {"I", "II", "III", "IV"};
    return kNames[static_cast<std::size_t>(phase)];
}

Phase parse_phase(std::string_view text) {
    for (Phase p : {Phase::I, Phase::II, Phase::III, Phase::IV})
        if (to_string(p) == text) return p;
    throw InvalidArgument("unknown phase '" + std::string(text) + "'");
}

TargetSequence generate_target_sequence(std::uint64_t seed, int block_length) {
    if (block_length < 6 || block_length % 2 != 0)
        throw InvalidArgument("target sequence: block length must be even and at least 6");
    const int half = block_length / 2;

    std::vector<double> anchors{kTargetLow};
    for (int i = 0; i < half - 1; ++i)
        anchors.push_back(kTargetSpreadLow + (kTargetHigh - kTargetSpreadLow) * i / (half - 2));

    auto in_range = [](double x) {
        return x >= kTargetLow - kStepTolerance && x <= kTargetHigh + kStepTolerance;
    };
    auto is_fixed = [](double a, double b) { return std::abs(std::abs(b - a) - kFixedStep) < kStepTolerance; };

    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        std::vector<double> even = anchors;
        detail::shuffle(even, rng);
        TargetSequence seq;
        seq.positions.reserve(static_cast<std::size_t>(block_length));
        bool ok = true;
        for (int k = 0; k < half && ok; ++k) {
            const double a = even[static_cast<std::size_t>(k)];
            const double prev = k == 0 ? seq.start : seq.positions.back();
            if (is_fixed(prev, a)) ok = false;
            std::vector<double> options;
            for (double dir : {1.0, -1.0}) {
                const double b = a + dir * kFixedStep;
                if (in_range(b) && std::abs(b - kTargetLow) > kStepTolerance) options.push_back(b);
            }
            if (options.empty()) ok = false;
            if (!ok) break;
            seq.positions.push_back(a);
            seq.fixed_step.push_back(false);
            seq.positions.push_back(options[detail::uniform_index(rng, options.size())]);
            seq.fixed_step.push_back(true);
        }
        if (ok) return seq;
    }
    throw InvalidArgument("target sequence: constraints infeasible for this block length");
}

std::array<Condition, 6> latin_square_order(int group) {
    if (group < 1 || group > 6) throw InvalidArgument("Latin square group must be in 1..6");
    // Williams first row for six treatments; later rows add the group offset.
    static constexpr std::array<int, 6> kFirstRow = {0, 1, 5, 2, 4, 3};
    std::array<Condition, 6> row;
    for (std::size_t i = 0; i < 6; ++i)
        row[i] = all_conditions()[static_cast<std::size_t>((kFirstRow[i] + group - 1) % 6)];
    return row;
}

void ExperimentPlan::validate() const {
    params.validate();
    settling.validate();
    if (participants < 1) throw InvalidArgument("experiment: need at least one participant");
    if (blocks_per_phase < 1) throw InvalidArgument("experiment: blocks per phase must be >= 1");
    if (trials_per_block < 6 || trials_per_block % 2)
        throw InvalidArgument("experiment: trials per block must be even and >= 6");
    if (switch_blocks < 0 || switch_trials < 1 || (switch_blocks * switch_trials) % 2 ||
        (switch_blocks > 0 && switch_blocks * switch_trials < 6))
        throw InvalidArgument("experiment: switch phase needs an even trial total of at least 6");
    if (!(precision_window > 0.0) || !(dynamic_timeout > 0.0) || !(dynamic_tail >= 0.0))
        throw InvalidArgument("experiment: trial durations must be positive");
}

std::string PlannedTrial::label() const {
    std::string s(condition.name());
    if (switch_phase) s += '*';
    return s;
}

VirtualParticipant participant_for(const ExperimentPlan& plan, int participant) {
    return make_virtual_participant(mix_seed(plan.master_seed, 1000 + static_cast<std::uint64_t>(participant)),
                                    plan.cohort);
}

std::vector<PlannedTrial> build_schedule(const ExperimentPlan& plan) {
    plan.validate();
    std::vector<PlannedTrial> out;
    for (int p = 1; p <= plan.participants; ++p) {
        const int group = (p - 1) % 6 + 1;
        const std::uint64_t pseed = participant_for(plan, p).seed;
        const auto order = latin_square_order(group);

        auto add_block = [&](Phase phase, int block, Condition cond, const TargetSequence& seq,
                             std::size_t first, int count, bool switching) {
            for (int t = 1; t <= count; ++t) {
                const std::size_t slot = first + static_cast<std::size_t>(t - 1);
                PlannedTrial tr;
                tr.participant = p;
                tr.group = group;
                tr.phase = phase;
                tr.block = block;
                tr.trial = t;
                tr.condition = cond;
                tr.switch_phase = switching;
                tr.target_from = seq.from(slot);
                tr.target_to = seq.positions[slot];
                tr.fixed_step = seq.fixed_step[slot];
                tr.trial_seed = trial_seed_for(pseed, phase, block, t);
                out.push_back(tr);
            }
        };

        for (Phase phase : {Phase::II, Phase::III}) {
            if (phase == Phase::II && !plan.include_training) continue;
            const TargetSequence seq =
                generate_target_sequence(phase_sequence_seed(plan.master_seed, phase), plan.trials_per_block);
            for (int b = 1; b <= plan.blocks_per_phase; ++b)
                add_block(phase, b, order[static_cast<std::size_t>((b - 1) % 6)], seq, 0,
                          plan.trials_per_block, false);
        }

        if (plan.switch_blocks > 0) {
            const TargetSequence seq = generate_target_sequence(
                phase_sequence_seed(plan.master_seed, Phase::IV), plan.switch_blocks * plan.switch_trials);
            std::vector<Task> tasks;
            for (int b = 0; b < plan.switch_blocks; ++b)
                tasks.push_back(b < (plan.switch_blocks + 1) / 2 ? Task::Precision : Task::Dynamic);
            std::mt19937_64 rng(mix_seed(plan.master_seed, 100 + static_cast<std::uint64_t>(group)));
            detail::shuffle(tasks, rng);
            for (int b = 1; b <= plan.switch_blocks; ++b)
                add_block(Phase::IV, b, Condition{tasks[static_cast<std::size_t>(b - 1)], Mode::A}, seq,
                          static_cast<std::size_t>((b - 1) * plan.switch_trials), plan.switch_trials, true);
        }
    }
    return out;
}

ScenarioSpec trial_scenario(const PlannedTrial& trial, const VirtualParticipant& who,
                            const ExperimentPlan& plan) {
    ScenarioSpec sc;
    sc.mode = trial.condition.mode;
    sc.params = plan.params;
    sc.seed = trial.trial_seed;
    if (trial.condition.task == Task::Precision) {
        sc.duration = plan.precision_window;
        sc.env = EnvironmentConfig::free_air();
        sc.op = who.precision_operator(trial.target_from, trial.target_to, trial.trial_seed);
    } else {
        sc.duration = plan.dynamic_timeout;
        sc.env = EnvironmentConfig::wall(trial.target_to);
        sc.op = who.dynamic_operator(trial.target_to, trial.trial_seed);
    }
    return sc;
}

TrialOutcome score_trace(const PlannedTrial& trial, std::span<const SimFrame> trace,
                         const ExperimentPlan& plan) {
    if (trial.condition.task == Task::Precision)
        return precision_metrics(trace, 0.0, trial.target_to, plan.settling, plan.itae_origin);
    return dynamic_metrics(trace, trial.target_to);
}

TrialRecord run_trial(const PlannedTrial& trial, const VirtualParticipant& who,
                      const ExperimentPlan& plan, std::vector<SimFrame>* trace) {
    std::optional<ScenarioSpec> sc;
    std::string setup_error;
    try {
        sc = trial_scenario(trial, who, plan);
    } catch (const Error& e) {
        setup_error = e.what();
    }
    if (!sc) {
        TrialRecord rec;
        rec.plan = trial;
        if (trial.condition.task == Task::Precision)
            rec.outcome = PrecisionOutcome{};
        else
            rec.outcome = DynamicOutcome{};
        rec.failed = true;
        rec.error = setup_error;
        if (trace) trace->clear();
        return rec;
    }
    return run_trial_scenario(trial, *sc, plan, trace);
}

TrialRecord run_trial_scenario(const PlannedTrial& trial, const ScenarioSpec& sc,
                               const ExperimentPlan& plan, std::vector<SimFrame>* trace) {
    TrialRecord rec;
    rec.plan = trial;
    if (trial.condition.task == Task::Precision)
        rec.outcome = PrecisionOutcome{};
    else
        rec.outcome = DynamicOutcome{};

    std::vector<SimFrame> frames;
    try {
        sc.op.validate();
        const double dt = sc.params.plant.control_dt;
        const long n = std::lround(sc.duration / dt);
        const long tail = std::lround(plan.dynamic_tail / dt);
        TeleopLoop loop(sc.params, sc.mode, sc.env, sc.op.coupling, sc.op.command(0.0).position);
        frames.reserve(static_cast<std::size_t>(n));
        long stop = n;
        for (long i = 0; i < stop; ++i) {
            frames.push_back(loop.tick(sc.op.command(static_cast<double>(i + 1) * dt)));
            if (trial.condition.task == Task::Dynamic && stop == n &&
                frames.back().theta_out >= trial.target_to)
                stop = std::min(n, i + 1 + tail);
        }
        rec.outcome = score_trace(trial, frames, plan);
        if (const auto* d = std::get_if<DynamicOutcome>(&rec.outcome); d && !d->impact) {
            rec.failed = true;
            rec.error = "no impact before timeout";
        }
    } catch (const Error& e) {
        rec.failed = true;
        rec.error = e.what();
    }
    if (trace) *trace = std::move(frames);
    return rec;
}

std::vector<TrialRecord> run_experiment(const ExperimentPlan& plan,
                                        const std::optional<std::filesystem::path>& run_dir) {
    const std::vector<PlannedTrial> schedule = build_schedule(plan);
    std::vector<TrialRecord> records(schedule.size());
    const bool traces = plan.write_traces && run_dir.has_value();
    if (traces) std::filesystem::create_directories(*run_dir / "traces");

    // Contiguous schedule ranges per participant.
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t i = 0; i < schedule.size();) {
        std::size_t j = i;
        while (j < schedule.size() && schedule[j].participant == schedule[i].participant) ++j;
        ranges.emplace_back(i, j);
        i = j;
    }

    auto run_range = [&](std::size_t lo, std::size_t hi) {
        const VirtualParticipant who = participant_for(plan, schedule[lo].participant);
        std::vector<SimFrame> frames;
        for (std::size_t i = lo; i < hi; ++i) {
            const PlannedTrial& tr = schedule[i];
            records[i] = run_trial(tr, who, plan, traces ? &frames : nullptr);
            if (!traces) continue;
            char name[96];
            std::snprintf(name, sizeof name, "traces/p%02d_%s_b%02d_t%02d_%s.csv", tr.participant,
                          std::string(to_string(tr.phase)).c_str(), tr.block, tr.trial,
                          std::string(tr.condition.name()).c_str());
            try {
                write_trace_csv(*run_dir / name, frames);
                records[i].trace_path = name;
            } catch (const Error& e) {
                records[i].error = records[i].error.empty() ? e.what() : records[i].error;
            }
        }
    };

    unsigned workers = plan.threads > 0 ? static_cast<unsigned>(plan.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(ranges.size(), 1)));
    if (workers <= 1) {
        for (auto [lo, hi] : ranges) run_range(lo, hi);
        return records;
    }
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t r = w; r < ranges.size(); r += workers) run_range(ranges[r].first, ranges[r].second);
        }));
    }
    for (auto& j : jobs) j.get();
    return records;
}

const std::string& records_csv_header() {
    static const std::string header =
        "participant,group,phase,block,trial,condition,label,task,mode,targetFrom,targetTo,fixedStep,"
        "trialSeed,failed,moved,settled,deadTime,moveTime,settleTime,travelTime,censoredTravelTime,itae,"
        "impact,impactTime,maxToolVel,maxHandleVel,gain,tracePath,error";
    return header;
}

void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
    out << records_csv_header() << '\n';
    for (const auto& r : records) {
        const PlannedTrial& p = r.plan;
        out << p.participant << ',' << p.group << ',' << to_string(p.phase) << ',' << p.block << ','
            << p.trial << ',' << p.condition.name() << ',' << p.label() << ','
            << to_string(p.condition.task) << ',' << to_string(p.condition.mode) << ','
            << num(p.target_from) << ',' << num(p.target_to) << ',' << (p.fixed_step ? 1 : 0) << ','
            << p.trial_seed << ',' << (r.failed ? 1 : 0) << ',';
        if (const auto* o = std::get_if<PrecisionOutcome>(&r.outcome)) {
            out << (o->moved ? 1 : 0) << ',' << (o->settled ? 1 : 0) << ',';
            if (o->moved)
                out << num(o->dead_time) << ',' << num(o->move_time) << ',';
            else
                out << ",,";
            out << (o->settled ? num(o->settle_time) : "") << ','
                << (o->travel_time ? num(*o->travel_time) : "") << ','
                << (o->moved ? num(o->censored_travel_time) : "") << ','
                << (o->moved ? num(o->itae) : "") << ",,,,,,";
        } else {
            const auto& d = std::get<DynamicOutcome>(r.outcome);
            out << ",,,,,,,," << (d.impact ? 1 : 0) << ',';
            if (d.impact)
                out << num(d.impact_time) << ',' << num(d.max_tool_vel) << ',' << num(d.max_handle_vel)
                    << ',' << (std::isfinite(d.gain) ? num(d.gain) : "") << ',';
            else
                out << ",,,,";
        }
        out << r.trace_path << ',' << sanitize(r.error) << '\n';
    }
}

void write_records_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open records file " + path.string());
    write_records_csv(out, records);
    if (!out) throw Error("failed writing records file " + path.string());
}

std::vector<TrialRecord> read_records_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != records_csv_header())
        throw InvalidArgument("records CSV: missing or unexpected header");
    std::vector<TrialRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv(line);
        if (c.size() != 29) throw InvalidArgument("records CSV: wrong column count in '" + line + "'");
        TrialRecord r;
        PlannedTrial& p = r.plan;
        p.participant = static_cast<int>(parse_long(c[0]));
        p.group = static_cast<int>(parse_long(c[1]));
        p.phase = parse_phase(c[2]);
        p.block = static_cast<int>(parse_long(c[3]));
        p.trial = static_cast<int>(parse_long(c[4]));
        p.condition = parse_condition(c[5]);
        p.switch_phase = !c[6].empty() && c[6].back() == '*';
        p.target_from = parse_double(c[9]);
        p.target_to = parse_double(c[10]);
        p.fixed_step = c[11] == "1";
        p.trial_seed = std::stoull(c[12]);
        r.failed = c[13] == "1";
        if (p.condition.task == Task::Precision) {
            PrecisionOutcome o;
            o.moved = c[14] == "1";
            o.settled = c[15] == "1";
            o.dead_time = parse_double(c[16]);
            o.move_time = parse_double(c[17]);
            o.settle_time = parse_double(c[18]);
            if (!c[19].empty()) o.travel_time = parse_double(c[19]);
            o.censored_travel_time = parse_double(c[20]);
            o.itae = parse_double(c[21]);
            r.outcome = o;
        } else {
            DynamicOutcome d;
            d.impact = c[22] == "1";
            d.impact_time = parse_double(c[23]);
            d.max_tool_vel = parse_double(c[24]);
            d.max_handle_vel = parse_double(c[25]);
            d.gain = c[26].empty() ? 0.0 : parse_double(c[26]);
            r.outcome = d;
        }
        r.trace_path = c[27];
        r.error = c[28];
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<TrialRecord> read_records_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open records file " + path.string());
    return read_records_csv(in);
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xF];
    }
    return out;
}

std::string_view library_version() { return VIASIM_VERSION; }

std::vector<TrialRecord> run_experiment_to_dir(const ExperimentPlan& plan,
                                               const std::filesystem::path& run_dir,
                                               const std::string& config_text) {
    std::filesystem::create_directories(run_dir);
    std::vector<TrialRecord> records = run_experiment(plan, run_dir);

    std::ostringstream csv;
    write_records_csv(csv, records);
    const std::string records_text = csv.str();
    {
        std::ofstream out(run_dir / "records.csv", std::ios::binary);
        if (!out) throw Error("cannot open records file in " + run_dir.string());
        out << records_text;
    }

    std::size_t failed = 0;
    for (const auto& r : records) failed += r.failed ? 1 : 0;
    nlohmann::ordered_json manifest;
    manifest["version"] = std::string(library_version());
    manifest["masterSeed"] = plan.master_seed;
    manifest["participants"] = plan.participants;
    manifest["parameterHash"] = sha256_hex(config_text);
    manifest["recordsFile"] = "records.csv";
    manifest["recordsHash"] = sha256_hex(records_text);
    manifest["records"] = records.size();
    manifest["failedTrials"] = failed;
    manifest["traces"] = plan.write_traces;
    std::ofstream out(run_dir / "manifest.json", std::ios::binary);
    if (!out) throw Error("cannot open manifest in " + run_dir.string());
    out << manifest.dump(2) << '\n';
    return records;
}

} // namespace viasim
