#pragma once

#include "viasim/session.hpp"

#include <atomic>
#include <memory>
#include <string>

namespace viasim {

struct ServerConfig {
    std::string address = "127.0.0.1";
    unsigned short port = 8080; // 0 picks a free port
    SessionConfig session;
    double duration = 0.0; // s of simulation before the service stops; 0 runs until stop()
    bool paced = true;     // tick at wall-clock 1 kHz; false runs as fast as possible
};

/// WebSocket front end of a SessionCore. A dedicated thread owns the
/// simulation and ticks it; a network thread serves `/session`. The two
/// exchange messages through latest-wins mailboxes, so a slow client only
/// loses StateUpdates and never stalls the tick loop.
class SessionServer {
public:
    explicit SessionServer(ServerConfig cfg);
    ~SessionServer();
    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    /// Bind, start both threads and return the bound port.
    unsigned short start();
    /// Stop both threads; safe to call more than once.
    void stop();
    /// Block until the simulation thread ends (duration reached or stop()).
    void wait();

    bool running() const;
    long ticks() const;
    /// Inbound messages dropped because the control mailbox was full.
    long dropped_messages() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Run a server until `stop_flag` becomes true or the duration elapses.
void run_session(const ServerConfig& cfg, const std::atomic<bool>& stop_flag);

} // namespace viasim
