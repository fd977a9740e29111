#pragma once

#include "viasim/teleop.hpp"

#include <cstdio>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace viasim {

/// Header row of every trace CSV, batch or interactive.
const std::string& trace_csv_header();

/// Shortest round-trip formatting used by all CSV outputs; reading a
/// number back gives the same double.
std::string format_number(double value);

/// One CSV row (no trailing newline) in header column order.
std::string trace_csv_row(const SimFrame& frame);

void write_trace_csv(std::ostream& out, std::span<const SimFrame> frames);
void write_trace_csv(const std::filesystem::path& path, std::span<const SimFrame> frames);

std::vector<SimFrame> read_trace_csv(std::istream& in);
std::vector<SimFrame> read_trace_csv(const std::filesystem::path& path);

/// Incremental writer for long-running recordings. A failed write marks the
/// writer degraded instead of throwing, so the caller keeps running.
class TraceRecorder {
public:
    explicit TraceRecorder(const std::filesystem::path& path);
    ~TraceRecorder();
    TraceRecorder(const TraceRecorder&) = delete;
    TraceRecorder& operator=(const TraceRecorder&) = delete;

    void append(const SimFrame& frame);
    void flush();

    bool degraded() const { return degraded_; }
    long frames_written() const { return frames_; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::FILE* file_ = nullptr;
    bool degraded_ = false;
    long frames_ = 0;
};

} // namespace viasim
