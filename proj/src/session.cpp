#include "viasim/session.hpp"

#include "viasim/error.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <nlohmann/json.hpp>

namespace viasim {

namespace {

using nlohmann::json;

constexpr double kTimeEps = 1e-9;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

double number_field(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) throw InvalidArgument(std::string("missing numeric field '") + key + "'");
    const double v = it->get<double>();
    if (!std::isfinite(v)) throw InvalidArgument(std::string("non-finite field '") + key + "'");
    return v;
}

std::string string_field(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw InvalidArgument(std::string("missing string field '") + key + "'");
    return it->get<std::string>();
}

json outcome_json(const TrialOutcome& o) {
    json j;
    std::visit([&](const auto& v) { to_json(j, v); }, o);
    return j;
}

double json_or_zero(const json& j, const char* key) {
    const auto it = j.find(key);
    return it != j.end() && it->is_number() ? it->get<double>() : 0.0;
}

} // namespace

InboundMessage parse_inbound(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw InvalidArgument("message must be a JSON object");
    if (const auto v = j.find("v"); v != j.end() && (!v->is_number_integer() || v->get<int>() != kSessionProtocolVersion))
        throw InvalidArgument("unsupported protocol version");
    const std::string type = string_field(j, "type");
    const double t = number_field(j, "t");
    if (type == "HandleInput") return HandleInput{t, number_field(j, "position")};
    if (type == "SetMode") return SetMode{t, parse_mode(string_field(j, "mode"))};
    if (type == "StartTrial") return StartTrial{t, parse_task(string_field(j, "task")), number_field(j, "target")};
    if (type == "Ready") return Ready{t};
    throw InvalidArgument("unknown message type '" + type + "'");
}

std::string to_json_text(const InboundMessage& msg) {
    json j = std::visit(
        Overloaded{
            [](const HandleInput& m) { return json{{"type", "HandleInput"}, {"t", m.t}, {"position", m.position}}; },
            [](const SetMode& m) { return json{{"type", "SetMode"}, {"t", m.t}, {"mode", to_string(m.mode)}}; },
            [](const StartTrial& m) {
                return json{{"type", "StartTrial"}, {"t", m.t}, {"task", to_string(m.task)}, {"target", m.target}};
            },
            [](const Ready& m) { return json{{"type", "Ready"}, {"t", m.t}}; },
        },
        msg);
    j["v"] = kSessionProtocolVersion;
    return j.dump();
}

std::string to_json_text(const OutboundMessage& msg) {
    json j = std::visit(
        Overloaded{
            [](const StateUpdate& m) {
                return json{{"type", "StateUpdate"},
                            {"t", m.t},
                            {"handle", m.handle},
                            {"tool", m.tool},
                            {"target", m.target ? json(*m.target) : json()},
                            {"kActual", m.k_actual},
                            {"feedbackTorque", m.feedback_torque},
                            {"mode", to_string(m.mode)},
                            {"holding", m.holding}};
            },
            [](const TrialResult& m) {
                return json{{"type", "TrialResult"},
                            {"t", m.t},
                            {"task", to_string(m.task)},
                            {"target", m.target},
                            {"startTime", m.start_time},
                            {"outcome", outcome_json(m.outcome)}};
            },
            [](const ErrorMessage& m) { return json{{"type", "Error"}, {"t", m.t}, {"message", m.message}}; },
        },
        msg);
    j["v"] = kSessionProtocolVersion;
    return j.dump();
}

OutboundMessage parse_outbound(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("malformed JSON: ") + e.what());
    }
    const std::string type = string_field(j, "type");
    const double t = number_field(j, "t");
    if (type == "StateUpdate") {
        StateUpdate m;
        m.t = t;
        m.handle = number_field(j, "handle");
        m.tool = number_field(j, "tool");
        if (j.contains("target") && j["target"].is_number()) m.target = j["target"].get<double>();
        m.k_actual = number_field(j, "kActual");
        m.feedback_torque = number_field(j, "feedbackTorque");
        m.mode = parse_mode(string_field(j, "mode"));
        m.holding = j.value("holding", false);
        return m;
    }
    if (type == "TrialResult") {
        TrialResult m;
        m.t = t;
        m.task = parse_task(string_field(j, "task"));
        m.target = number_field(j, "target");
        m.start_time = number_field(j, "startTime");
        const json& o = j.at("outcome");
        if (m.task == Task::Precision) {
            PrecisionOutcome p;
            p.moved = o.value("moved", false);
            p.settled = o.value("settled", false);
            p.dead_time = json_or_zero(o, "deadTime");
            p.move_time = json_or_zero(o, "moveTime");
            p.settle_time = json_or_zero(o, "settleTime");
            if (o.contains("travelTime") && o["travelTime"].is_number()) p.travel_time = o["travelTime"].get<double>();
            p.censored_travel_time = json_or_zero(o, "censoredTravelTime");
            p.itae = json_or_zero(o, "itae");
            m.outcome = p;
        } else {
            DynamicOutcome d;
            d.impact = o.value("impact", false);
            d.impact_time = json_or_zero(o, "impactTime");
            d.max_tool_vel = json_or_zero(o, "maxToolVel");
            d.max_handle_vel = json_or_zero(o, "maxHandleVel");
            d.gain = json_or_zero(o, "gain");
            m.outcome = d;
        }
        return m;
    }
    if (type == "Error") return ErrorMessage{t, string_field(j, "message")};
    throw InvalidArgument("unknown message type '" + type + "'");
}

void SessionConfig::validate() const {
    params.validate();
    settling.validate();
    if (!(stream_rate > 0.0)) throw InvalidArgument("session: stream rate must be positive");
    if (!(max_handle_velocity > 0.0)) throw InvalidArgument("session: handle velocity clamp must be positive");
    if (!(stale_after > 0.0)) throw InvalidArgument("session: staleness threshold must be positive");
    if (!(precision_window > 0.0) || !(dynamic_timeout > 0.0))
        throw InvalidArgument("session: trial durations must be positive");
    if (!std::isfinite(initial_position)) throw InvalidArgument("session: initial position must be finite");
}

SessionCore::SessionCore(SessionConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      loop_(cfg_.params, cfg_.initial_mode, EnvironmentConfig::free_air(), KinematicCoupling{}, cfg_.initial_position),
      handle_pos_(cfg_.initial_position),
      input_pos_(cfg_.initial_position),
      next_stream_(cfg_.params.plant.control_dt) {
    state_.mode = cfg_.initial_mode;
    const TeleopState& rest = loop_.state();
    last_frame_.theta_m = rest.handle.theta;
    last_frame_.motor_setpoint = rest.plant.theta_motor();
    last_frame_.theta_motor = rest.plant.theta_motor();
    last_frame_.theta_out = rest.plant.theta_out;
    last_frame_.k_actual = rest.plant.k_actual();
    last_frame_.b_actual = rest.plant.b_actual();
    if (cfg_.record_path) {
        recorder_ = std::make_unique<TraceRecorder>(*cfg_.record_path);
        state_.recording_degraded = recorder_->degraded();
    }
}

void SessionCore::handle(const InboundMessage& msg, std::vector<OutboundMessage>& out) {
    const double now = time();
    auto error = [&](std::string text) { out.push_back(ErrorMessage{now, std::move(text)}); };
    std::visit(Overloaded{
                   [&](const HandleInput& m) {
                       if (!std::isfinite(m.position)) return error("HandleInput: position must be finite");
                       input_pos_ = m.position;
                       state_.last_input_time = now;
                   },
                   [&](const SetMode& m) {
                       loop_.set_mode(m.mode);
                       state_.mode = m.mode;
                   },
                   [&](const StartTrial& m) {
                       if (state_.trial_phase == TrialPhase::Running)
                           return error("StartTrial: a trial is already running");
                       if (m.task == Task::Dynamic && !(m.target > last_frame_.theta_out))
                           return error("StartTrial: dynamic target must lie above the tool");
                       loop_.set_environment(m.task == Task::Dynamic ? EnvironmentConfig::wall(m.target)
                                                                     : EnvironmentConfig::free_air());
                       state_.task = m.task;
                       state_.target = m.target;
                       state_.trial_phase = TrialPhase::Armed;
                   },
                   [&](const Ready&) {
                       if (state_.trial_phase != TrialPhase::Armed) return error("Ready: no trial armed");
                       state_.trial_phase = TrialPhase::Running;
                       trial_start_ = now;
                       if (*state_.task == Task::Precision)
                           precision_.emplace(now, *state_.target, cfg_.settling, cfg_.itae_origin);
                       else
                           dynamic_.emplace(*state_.target);
                   },
               },
               msg);
}

void SessionCore::handle_text(const std::string& text, std::vector<OutboundMessage>& out) {
    InboundMessage msg;
    try {
        msg = parse_inbound(text);
    } catch (const Error& e) {
        out.push_back(ErrorMessage{time(), e.what()});
        return;
    }
    handle(msg, out);
}

const SimFrame& SessionCore::tick(std::vector<OutboundMessage>& out) {
    const double dt = loop_.params().plant.control_dt;
    const double now = time();
    state_.holding = !state_.last_input_time || now - *state_.last_input_time > cfg_.stale_after + kTimeEps;

    OperatorCommand cmd{handle_pos_, 0.0};
    if (!state_.holding) {
        const double limit = cfg_.max_handle_velocity * dt;
        const double step = std::clamp(input_pos_ - handle_pos_, -limit, limit);
        // Reachable samples are taken verbatim so replayed input matches batch runs.
        cmd.position = std::abs(input_pos_ - handle_pos_) <= limit ? input_pos_ : handle_pos_ + step;
        cmd.velocity = step / dt;
    }
    last_frame_ = loop_.tick(cmd);
    handle_pos_ = cmd.position;

    if (recorder_) {
        recorder_->append(last_frame_);
        state_.recording_degraded = recorder_->degraded();
    }

    if (state_.trial_phase == TrialPhase::Running) {
        const double elapsed = last_frame_.t - trial_start_;
        if (precision_) {
            precision_->add(last_frame_);
            if (precision_->settled() || elapsed >= cfg_.precision_window - kTimeEps) finish_trial(out);
        } else if (dynamic_) {
            dynamic_->add(last_frame_);
            if (dynamic_->impacted() || elapsed >= cfg_.dynamic_timeout - kTimeEps) finish_trial(out);
        }
    }

    if (last_frame_.t >= next_stream_ - kTimeEps) {
        StateUpdate u;
        u.t = last_frame_.t;
        u.handle = last_frame_.theta_m;
        u.tool = last_frame_.theta_out;
        u.target = state_.target;
        u.k_actual = last_frame_.k_actual;
        u.feedback_torque = last_frame_.feedback_torque;
        u.mode = state_.mode;
        u.holding = state_.holding;
        out.push_back(u);
        next_stream_ += 1.0 / cfg_.stream_rate;
        if (next_stream_ < last_frame_.t) next_stream_ = last_frame_.t + 1.0 / cfg_.stream_rate;
    }
    return last_frame_;
}

void SessionCore::finish_trial(std::vector<OutboundMessage>& out) {
    TrialResult r;
    r.t = last_frame_.t;
    r.task = *state_.task;
    r.target = *state_.target;
    r.start_time = trial_start_;
    if (precision_)
        r.outcome = precision_->outcome();
    else
        r.outcome = dynamic_->outcome();
    out.push_back(r);
    precision_.reset();
    dynamic_.reset();
    state_.trial_phase = TrialPhase::Idle;
}

void SessionCore::abort_trial() {
    if (state_.trial_phase == TrialPhase::Idle) return;
    std::cerr << "session: last client left at t=" << time() << " s, trial aborted\n";
    precision_.reset();
    dynamic_.reset();
    state_.trial_phase = TrialPhase::Idle;
}

void SessionCore::client_connected() { ++state_.clients; }

void SessionCore::client_disconnected() {
    state_.clients = std::max(0, state_.clients - 1);
    if (state_.clients == 0) abort_trial();
}

void SessionCore::flush_recording() {
    if (!recorder_) return;
    recorder_->flush();
    state_.recording_degraded = recorder_->degraded();
}

} // namespace viasim
