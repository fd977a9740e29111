#include "viasim/trace_io.hpp"

#include "viasim/error.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

namespace viasim {

namespace {

constexpr std::size_t kColumns = 13;

std::array<double, kColumns> columns(const SimFrame& f) {
    return {f.t,         f.theta_m,  f.omega_m,  f.motor_setpoint, f.theta_motor,
            f.theta_out, f.omega_out, f.k_set,   f.b_set,          f.k_actual,
            f.b_actual,  f.env_torque, f.feedback_torque};
}

} // namespace

const std::string& trace_csv_header() {
    static const std::string header =
        "t,thetaM,omegaM,motorSetpoint,thetaMotor,thetaOut,omegaOut,kSet,bSet,kActual,bActual,"
        "envTorque,feedbackTorque";
    return header;
}

std::string format_number(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string trace_csv_row(const SimFrame& frame) {
    std::string row;
    row.reserve(kColumns * 16);
    const auto cols = columns(frame);
    for (std::size_t i = 0; i < kColumns; ++i) {
        if (i) row += ',';
        row += format_number(cols[i]);
    }
    return row;
}

void write_trace_csv(std::ostream& out, std::span<const SimFrame> frames) {
    out << trace_csv_header() << '\n';
    for (const auto& f : frames) out << trace_csv_row(f) << '\n';
}

void write_trace_csv(const std::filesystem::path& path, std::span<const SimFrame> frames) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open trace file " + path.string());
    write_trace_csv(out, frames);
    if (!out) throw Error("failed writing trace file " + path.string());
}

std::vector<SimFrame> read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != trace_csv_header())
        throw InvalidArgument("trace CSV: missing or unexpected header");
    std::vector<SimFrame> frames;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::array<double, kColumns> v{};
        const char* p = line.c_str();
        for (std::size_t i = 0; i < kColumns; ++i) {
            char* end = nullptr;
            v[i] = std::strtod(p, &end);
            if (end == p) throw InvalidArgument("trace CSV: malformed row '" + line + "'");
            p = end;
            if (i + 1 < kColumns) {
                if (*p != ',') throw InvalidArgument("trace CSV: malformed row '" + line + "'");
                ++p;
            }
        }
        SimFrame f;
        f.t = v[0];
        f.theta_m = v[1];
        f.omega_m = v[2];
        f.motor_setpoint = v[3];
        f.theta_motor = v[4];
        f.theta_out = v[5];
        f.omega_out = v[6];
        f.k_set = v[7];
        f.b_set = v[8];
        f.k_actual = v[9];
        f.b_actual = v[10];
        f.env_torque = v[11];
        f.feedback_torque = v[12];
        frames.push_back(f);
    }
    return frames;
}

std::vector<SimFrame> read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open trace file " + path.string());
    return read_trace_csv(in);
}

TraceRecorder::TraceRecorder(const std::filesystem::path& path) : path_(path) {
    file_ = std::fopen(path.string().c_str(), "wb");
    if (!file_ || std::fprintf(file_, "%s\n", trace_csv_header().c_str()) < 0) degraded_ = true;
}

TraceRecorder::~TraceRecorder() {
    if (file_) std::fclose(file_);
}

void TraceRecorder::append(const SimFrame& frame) {
    if (degraded_) return;
    const std::string row = trace_csv_row(frame);
    if (std::fprintf(file_, "%s\n", row.c_str()) < 0) {
        degraded_ = true;
        return;
    }
    ++frames_;
}

void TraceRecorder::flush() {
    if (file_ && std::fflush(file_) != 0) degraded_ = true;
}

} // namespace viasim
