#pragma once

#include "viasim/experiment.hpp"
#include "viasim/metrics.hpp"
#include "viasim/teleop.hpp"
#include "viasim/trace_io.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace viasim {

/// Version carried in every message as "v".
inline constexpr int kSessionProtocolVersion = 1;

// Inbound messages. `t` is the client timestamp in seconds.
struct HandleInput {
    double t = 0.0;
    double position = 0.0; // rad
};
struct SetMode {
    double t = 0.0;
    Mode mode = Mode::H;
};
struct StartTrial {
    double t = 0.0;
    Task task = Task::Precision;
    double target = 0.0; // rad
};
struct Ready {
    double t = 0.0;
};
using InboundMessage = std::variant<HandleInput, SetMode, StartTrial, Ready>;

// Outbound messages. `t` is simulation time in seconds.
struct StateUpdate {
    double t = 0.0;
    double handle = 0.0; // rad
    double tool = 0.0;   // rad
    std::optional<double> target;
    double k_actual = 0.0;
    double feedback_torque = 0.0;
    Mode mode = Mode::H;
    bool holding = false; // input stale, handle frozen
};
struct TrialResult {
    double t = 0.0;
    Task task = Task::Precision;
    double target = 0.0;
    double start_time = 0.0; // simulation time the trial started (Ready)
    TrialOutcome outcome;
};
struct ErrorMessage {
    double t = 0.0;
    std::string message;
};
using OutboundMessage = std::variant<StateUpdate, TrialResult, ErrorMessage>;

/// Parse one inbound JSON text. Throws InvalidArgument on anything malformed.
InboundMessage parse_inbound(const std::string& text);

std::string to_json_text(const InboundMessage& msg);
std::string to_json_text(const OutboundMessage& msg);

/// Parse an outbound JSON text (for clients and tests).
OutboundMessage parse_outbound(const std::string& text);

struct SessionConfig {
    LoopParams params;
    Mode initial_mode = Mode::H;
    double initial_position = 0.0;  // rad
    double stream_rate = 60.0;      // Hz, StateUpdate rate
    double max_handle_velocity = 20.0; // rad/s, input rate limit
    double stale_after = 0.2;       // s without input before the handle is held
    double precision_window = 2.0;  // s
    double dynamic_timeout = 2.0;   // s
    SettlingSpec settling;
    ItaeOrigin itae_origin = ItaeOrigin::MoveInstant;
    std::optional<std::filesystem::path> record_path; // 1 kHz trace of the whole session

    void validate() const;
};

enum class TrialPhase { Idle, Armed, Running };

struct SessionState {
    Mode mode = Mode::H;
    std::optional<Task> task;
    std::optional<double> target;
    TrialPhase trial_phase = TrialPhase::Idle;
    int clients = 0;
    std::optional<double> last_input_time; // simulation time of the last HandleInput
    bool holding = true;
    bool recording_degraded = false;
};

/// Transport-free session logic: owns the loop, resamples handle input onto
/// the tick grid, runs trials and scores them with the streaming scorers.
/// Messages take effect at the current simulation time.
class SessionCore {
public:
    explicit SessionCore(SessionConfig cfg);

    void handle(const InboundMessage& msg, std::vector<OutboundMessage>& out);
    /// Parse and handle; malformed text yields an ErrorMessage.
    void handle_text(const std::string& text, std::vector<OutboundMessage>& out);

    /// Advance one control tick.
    const SimFrame& tick(std::vector<OutboundMessage>& out);

    void client_connected();
    /// Drops a client; the active trial is aborted when none remain.
    void client_disconnected();

    double time() const { return static_cast<double>(loop_.ticks()) * loop_.params().plant.control_dt; }
    const SessionState& state() const { return state_; }
    const SimFrame& last_frame() const { return last_frame_; }
    long frames_recorded() const { return recorder_ ? recorder_->frames_written() : 0; }
    void flush_recording();

private:
    void finish_trial(std::vector<OutboundMessage>& out);
    void abort_trial();

    SessionConfig cfg_;
    TeleopLoop loop_;
    SessionState state_;
    SimFrame last_frame_;
    double handle_pos_;
    double input_pos_;
    double trial_start_ = 0.0;
    std::optional<PrecisionScorer> precision_;
    std::optional<DynamicScorer> dynamic_;
    double next_stream_; // first update on the first tick
    std::unique_ptr<TraceRecorder> recorder_;
};

} // namespace viasim
