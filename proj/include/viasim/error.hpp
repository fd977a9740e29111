#pragma once

#include <stdexcept>
#include <string>

namespace viasim {

/// Base class for all errors raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter set or command violates its documented invariants.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The simulation state became (or was handed in) non-finite.
class StateCorruption : public Error {
public:
    StateCorruption(const std::string& what, long frame_index = -1)
        : Error(frame_index >= 0 ? what + " (frame " + std::to_string(frame_index) + ")" : what),
          frame_index_(frame_index) {}

    long frame_index() const noexcept { return frame_index_; }

private:
    long frame_index_;
};

/// Malformed or inconsistent configuration input.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace viasim
