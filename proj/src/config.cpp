#include "viasim/config.hpp"

#include "viasim/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace viasim {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Shortest text that reads back to the same double.
std::string encode(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}
std::string encode(int v) { return std::to_string(v); }
std::string encode(unsigned short v) { return std::to_string(v); }
std::string encode(std::uint64_t v) { return std::to_string(v); }
std::string encode(bool v) { return v ? "true" : "false"; }
std::string encode(const std::string& v) { return v; }
std::string encode(Mode v) { return std::string(to_string(v)); }
std::string encode(Task v) { return std::string(to_string(v)); }
std::string encode(Phase v) { return std::string(to_string(v)); }
std::string encode(OperatorKind v) { return std::string(to_string(v)); }
std::string encode(SignalPair v) { return std::string(to_string(v)); }
std::string encode(EffectEstimator v) { return std::string(to_string(v)); }
std::string encode(ItaeOrigin v) { return v == ItaeOrigin::MoveInstant ? "move" : "jump"; }
std::string encode(const std::vector<Mode>& v) {
    std::string out;
    for (Mode m : v) {
        if (!out.empty()) out += ',';
        out += to_string(m);
    }
    return out;
}

template <class T>
void decode_integer(std::string_view s, T& out) {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw ConfigError("not an integer");
    out = v;
}

void decode(std::string_view s, double& out) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw ConfigError("not a number");
    out = v;
}
void decode(std::string_view s, int& out) { decode_integer(s, out); }
void decode(std::string_view s, unsigned short& out) { decode_integer(s, out); }
void decode(std::string_view s, std::uint64_t& out) { decode_integer(s, out); }
void decode(std::string_view s, bool& out) {
    if (s == "true" || s == "1" || s == "yes" || s == "on")
        out = true;
    else if (s == "false" || s == "0" || s == "no" || s == "off")
        out = false;
    else
        throw ConfigError("not a boolean");
}
void decode(std::string_view s, std::string& out) { out = std::string(s); }
void decode(std::string_view s, Mode& out) { out = parse_mode(s); }
void decode(std::string_view s, Task& out) { out = parse_task(s); }
void decode(std::string_view s, Phase& out) { out = parse_phase(s); }
void decode(std::string_view s, OperatorKind& out) { out = parse_operator_kind(s); }
void decode(std::string_view s, SignalPair& out) { out = parse_signal_pair(s); }
void decode(std::string_view s, EffectEstimator& out) { out = parse_effect_estimator(s); }
void decode(std::string_view s, ItaeOrigin& out) {
    if (s == "move")
        out = ItaeOrigin::MoveInstant;
    else if (s == "jump")
        out = ItaeOrigin::TargetJump;
    else
        throw ConfigError("expected move or jump");
}
void decode(std::string_view s, std::vector<Mode>& out) {
    std::vector<Mode> modes;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = std::min(s.find(',', pos), s.size());
        const std::string item = trim(s.substr(pos, comma - pos));
        if (!item.empty()) modes.push_back(parse_mode(item));
        pos = comma + 1;
    }
    if (modes.empty()) throw ConfigError("empty mode list");
    out = std::move(modes);
}

struct Field {
    std::string key; // section.name
    std::function<std::string(RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

template <class Access>
Field field(std::string key, Access access) {
    return Field{std::move(key), [access](RunConfig& c) { return encode(access(c)); },
                 [access](RunConfig& c, std::string_view v) { decode(v, access(c)); }};
}

#define VIASIM_FIELD(key, member) field(key, [](RunConfig& c) -> auto& { return c.member; })

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        VIASIM_FIELD("run.seed", seed),
        VIASIM_FIELD("run.output_dir", output_dir),

        VIASIM_FIELD("plant.inertia", params.plant.inertia),
        VIASIM_FIELD("plant.joint_motor_cutoff", params.plant.joint_motor_cutoff),
        VIASIM_FIELD("plant.stiffness_actuator_cutoff", params.plant.stiffness_actuator_cutoff),
        VIASIM_FIELD("plant.wall_stiffness", params.plant.wall_stiffness),
        VIASIM_FIELD("plant.wall_damping", params.plant.wall_damping),
        VIASIM_FIELD("plant.control_dt", params.plant.control_dt),
        VIASIM_FIELD("plant.physics_substeps", params.plant.physics_substeps),
        VIASIM_FIELD("plant.handle_inertia", params.handle_inertia),

        VIASIM_FIELD("law.k_max", params.law.k_max),
        VIASIM_FIELD("law.k_min", params.law.k_min),
        VIASIM_FIELD("law.d_max", params.law.d_max),
        VIASIM_FIELD("law.d_min", params.law.d_min),
        VIASIM_FIELD("law.a_var", params.law.a_var),
        VIASIM_FIELD("law.v_min", params.law.v_min),
        VIASIM_FIELD("law.v_max", params.law.v_max),
        VIASIM_FIELD("law.inertia", params.law.inertia),
        VIASIM_FIELD("law.b_cap", params.law.b_cap),
        VIASIM_FIELD("law.b_low_mode", params.law.b_low_mode),

        VIASIM_FIELD("gains.p_gain", params.gains.p_gain),
        VIASIM_FIELD("gains.i_gain", params.gains.i_gain),
        VIASIM_FIELD("gains.c1", params.gains.c1),
        VIASIM_FIELD("gains.c2", params.gains.c2),
        VIASIM_FIELD("gains.integrator_clamp", params.gains.integrator_clamp),

        VIASIM_FIELD("operator.reach_duration", cohort.reach_duration),
        VIASIM_FIELD("operator.reaction_time", cohort.reaction_time),
        VIASIM_FIELD("operator.strike_frequency", cohort.strike_frequency),
        VIASIM_FIELD("operator.peak_handle_velocity", cohort.peak_handle_velocity),
        VIASIM_FIELD("operator.backswing", cohort.backswing),
        VIASIM_FIELD("operator.strike_gap", cohort.strike_gap),
        VIASIM_FIELD("operator.participant_jitter", cohort.participant_jitter),
        VIASIM_FIELD("operator.trial_jitter", cohort.trial_jitter),
        VIASIM_FIELD("operator.dynamic_coupling", cohort.dynamic_coupling),
        VIASIM_FIELD("operator.arm_stiffness", cohort.arm.k_arm),
        VIASIM_FIELD("operator.arm_damping", cohort.arm.b_arm),

        VIASIM_FIELD("metrics.move_threshold", settling.move_threshold),
        VIASIM_FIELD("metrics.settle_band", settling.settle_band),
        VIASIM_FIELD("metrics.settle_hold", settling.settle_hold),
        VIASIM_FIELD("metrics.itae_origin", itae_origin),

        VIASIM_FIELD("trial.task", trial.task),
        VIASIM_FIELD("trial.mode", trial.mode),
        VIASIM_FIELD("trial.operator", trial.op),
        VIASIM_FIELD("trial.start", trial.start),
        VIASIM_FIELD("trial.target", trial.target),
        VIASIM_FIELD("trial.playback_file", trial.playback_file),
        VIASIM_FIELD("trial.seed", trial.seed),

        VIASIM_FIELD("experiment.participants", experiment.participants),
        VIASIM_FIELD("experiment.blocks_per_phase", experiment.blocks_per_phase),
        VIASIM_FIELD("experiment.trials_per_block", experiment.trials_per_block),
        VIASIM_FIELD("experiment.switch_blocks", experiment.switch_blocks),
        VIASIM_FIELD("experiment.switch_trials", experiment.switch_trials),
        VIASIM_FIELD("experiment.include_training", experiment.include_training),
        VIASIM_FIELD("experiment.precision_window", experiment.precision_window),
        VIASIM_FIELD("experiment.dynamic_timeout", experiment.dynamic_timeout),
        VIASIM_FIELD("experiment.dynamic_tail", experiment.dynamic_tail),
        VIASIM_FIELD("experiment.write_traces", experiment.write_traces),
        VIASIM_FIELD("experiment.threads", experiment.threads),

        VIASIM_FIELD("sysid.modes", sysid_modes),
        VIASIM_FIELD("sysid.freq_min", sysid_freq_min),
        VIASIM_FIELD("sysid.freq_max", sysid_freq_max),
        VIASIM_FIELD("sysid.points", sysid_points),
        VIASIM_FIELD("sysid.amplitude", sysid.amplitude),
        VIASIM_FIELD("sysid.settle_cycles", sysid.settle_cycles),
        VIASIM_FIELD("sysid.measure_cycles", sysid.measure_cycles),
        VIASIM_FIELD("sysid.min_settle_time", sysid.min_settle_time),
        VIASIM_FIELD("sysid.ramp_fraction", sysid.ramp_fraction),
        VIASIM_FIELD("sysid.signal", sysid.signal),
        VIASIM_FIELD("sysid.threads", sysid.threads),
        VIASIM_FIELD("sysid.low_edge", crossover.low_edge),
        VIASIM_FIELD("sysid.high_edge", crossover.high_edge),
        VIASIM_FIELD("sysid.tol_low", crossover.tol_low),
        VIASIM_FIELD("sysid.tol_high", crossover.tol_high),

        VIASIM_FIELD("stats.alpha", stats.alpha),
        VIASIM_FIELD("stats.level", stats.bootstrap.level),
        VIASIM_FIELD("stats.resamples", stats.bootstrap.resamples),
        VIASIM_FIELD("stats.bootstrap_seed", stats.bootstrap.seed),
        VIASIM_FIELD("stats.estimator", stats.bootstrap.estimator),
        VIASIM_FIELD("stats.reference_phase", stats.reference_phase),
        VIASIM_FIELD("stats.fixed_steps_only", stats.fixed_steps_only),

        VIASIM_FIELD("service.address", service.address),
        VIASIM_FIELD("service.port", service.port),
        VIASIM_FIELD("service.duration", service.duration),
        VIASIM_FIELD("service.paced", service.paced),
        VIASIM_FIELD("service.initial_mode", service.session.initial_mode),
        VIASIM_FIELD("service.initial_position", service.session.initial_position),
        VIASIM_FIELD("service.stream_rate", service.session.stream_rate),
        VIASIM_FIELD("service.max_handle_velocity", service.session.max_handle_velocity),
        VIASIM_FIELD("service.stale_after", service.session.stale_after),
        VIASIM_FIELD("service.precision_window", service.session.precision_window),
        VIASIM_FIELD("service.dynamic_timeout", service.session.dynamic_timeout),
    };
    return table;
}

#undef VIASIM_FIELD

const Field& find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.key == key) return f;
    throw ConfigError("unknown configuration key '" + key + "'");
}

} // namespace

std::string_view to_string(OperatorKind kind) {
    switch (kind) {
    case OperatorKind::Auto: return "auto";
    case OperatorKind::MinJerk: return "minjerk";
    case OperatorKind::Strike: return "strike";
    case OperatorKind::Playback: return "playback";
    }
    return "?";
}

OperatorKind parse_operator_kind(std::string_view text) {
    if (text == "auto") return OperatorKind::Auto;
    if (text == "minjerk") return OperatorKind::MinJerk;
    if (text == "strike") return OperatorKind::Strike;
    if (text == "playback") return OperatorKind::Playback;
    throw InvalidArgument("unknown operator '" + std::string(text) + "' (expected auto, minjerk, strike or playback)");
}

ExperimentPlan RunConfig::resolved_plan() const {
    ExperimentPlan plan = experiment;
    plan.master_seed = seed;
    plan.cohort = cohort;
    plan.params = params;
    plan.settling = settling;
    plan.itae_origin = itae_origin;
    return plan;
}

SweepConfig RunConfig::resolved_sweep() const {
    SweepConfig sweep = sysid;
    sweep.params = params;
    sweep.freq_grid = log_grid(sysid_freq_min, sysid_freq_max, sysid_points);
    return sweep;
}

ServerConfig RunConfig::resolved_service() const {
    ServerConfig s = service;
    s.session.params = params;
    s.session.settling = settling;
    s.session.itae_origin = itae_origin;
    return s;
}

void RunConfig::validate() const {
    params.validate();
    settling.validate();
    resolved_plan().validate();
    if (!(sysid_freq_min > 0.0 && sysid_freq_max > sysid_freq_min && sysid_points >= 2))
        throw ConfigError("sysid: need 0 < freq_min < freq_max and points >= 2");
    resolved_sweep().validate();
    resolved_service().session.validate();
    if (!(stats.alpha > 0.0 && stats.alpha < 1.0)) throw ConfigError("stats: alpha must lie in (0, 1)");
    if (!(stats.bootstrap.level > 0.0 && stats.bootstrap.level < 1.0))
        throw ConfigError("stats: level must lie in (0, 1)");
    if (stats.bootstrap.resamples < 1) throw ConfigError("stats: resamples must be positive");
}

TrialRecord run_configured_trial(const RunConfig& cfg, std::vector<SimFrame>* trace) {
    const TrialConfig& tc = cfg.trial;
    const ExperimentPlan plan = cfg.resolved_plan();

    PlannedTrial planned;
    planned.participant = 1;
    planned.group = 1;
    planned.block = 1;
    planned.trial = 1;
    planned.condition = {tc.task, tc.mode};
    planned.target_from = tc.task == Task::Precision ? tc.start : tc.target - cfg.cohort.strike_gap;
    planned.target_to = tc.target;
    planned.fixed_step = std::abs(std::abs(tc.target - tc.start) - kFixedStep) < 1e-9;
    planned.trial_seed = tc.seed;

    // Nominal operator: the cohort values without between-trial jitter.
    VirtualParticipant who = make_virtual_participant(tc.seed, cfg.cohort);
    who.reach_duration = cfg.cohort.reach_duration;
    who.reaction_time = cfg.cohort.reaction_time;
    who.strike_frequency = cfg.cohort.strike_frequency;
    who.peak_handle_velocity = cfg.cohort.peak_handle_velocity;
    who.backswing = cfg.cohort.backswing;
    who.strike_gap = cfg.cohort.strike_gap;
    who.trial_jitter = 0.0;

    ScenarioSpec sc = trial_scenario(planned, who, plan);
    switch (tc.op) {
    case OperatorKind::Auto: break;
    case OperatorKind::MinJerk:
        if (tc.task != Task::Precision) throw ConfigError("trial: the minjerk operator drives precision trials");
        break;
    case OperatorKind::Strike:
        if (tc.task != Task::Dynamic) throw ConfigError("trial: the strike operator drives dynamic trials");
        break;
    case OperatorKind::Playback:
        if (tc.playback_file.empty()) throw ConfigError("trial: playback needs trial.playback_file");
        sc.op.motion = load_playback_csv(tc.playback_file);
        break;
    }

    return run_trial_scenario(planned, sc, plan, trace);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

void set_config_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
    const Field& f = find_field(dotted_key);
    try {
        f.set(cfg, trim(value));
    } catch (const Error& e) {
        throw ConfigError(dotted_key + ": invalid value '" + value + "': " + e.what());
    }
}

std::string get_config_value(const RunConfig& cfg, const std::string& dotted_key) {
    return find_field(dotted_key).get(const_cast<RunConfig&>(cfg));
}

RunConfig parse_config(const std::string& text, RunConfig base) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
        const auto keys = config_keys();
        if (std::none_of(keys.begin(), keys.end(), [&](const std::string& k) { return k.rfind(section + ".", 0) == 0; }))
            throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            if (!value.empty()) throw ConfigError("config: nested key under " + section + "." + key);
            set_config_value(base, section + "." + key, value.data());
        }
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_config(text.str(), std::move(base));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string print_config(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const std::string sec = f.key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out << '\n';
            out << '[' << sec << "]\n";
            section = sec;
        }
        out << f.key.substr(dot + 1) << " = " << f.get(const_cast<RunConfig&>(cfg)) << '\n';
    }
    return out.str();
}

} // namespace viasim
