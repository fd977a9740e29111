#include "viasim/analysis.hpp"
#include "viasim/config.hpp"
#include "viasim/error.hpp"
#include "viasim/experiment.hpp"
#include "viasim/impedance_law.hpp"
#include "viasim/session.hpp"
#include "viasim/stats.hpp"
#include "viasim/sysid.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

namespace py = pybind11;
using namespace viasim;

namespace {

py::dict to_dict(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

py::dict outcome_dict(const TrialOutcome& outcome) {
    return std::visit([](const auto& o) { return to_dict(nlohmann::json(o)); }, outcome);
}

RunConfig config_from(const std::string& text, const py::dict& overrides) {
    RunConfig cfg = parse_config(text);
    for (const auto& [k, v] : overrides) {
        const std::string value = py::isinstance<py::bool_>(v) ? (v.cast<bool>() ? "true" : "false")
                                                                : py::str(v).cast<std::string>();
        set_config_value(cfg, k.cast<std::string>(), value);
    }
    cfg.validate();
    return cfg;
}

// Trace columns as numpy arrays.
py::dict trace_dict(const std::vector<SimFrame>& frames) {
    const auto column = [&](auto member) {
        py::array_t<double> a(static_cast<py::ssize_t>(frames.size()));
        auto* p = a.mutable_data();
        for (std::size_t i = 0; i < frames.size(); ++i) p[i] = frames[i].*member;
        return a;
    };
    py::dict d;
    d["t"] = column(&SimFrame::t);
    d["handle"] = column(&SimFrame::theta_m);
    d["handle_velocity"] = column(&SimFrame::omega_m);
    d["motor"] = column(&SimFrame::theta_motor);
    d["tool"] = column(&SimFrame::theta_out);
    d["tool_velocity"] = column(&SimFrame::omega_out);
    d["k_actual"] = column(&SimFrame::k_actual);
    d["b_actual"] = column(&SimFrame::b_actual);
    d["env_torque"] = column(&SimFrame::env_torque);
    return d;
}

py::dict wilcoxon_dict(const WilcoxonResult& r) {
    py::dict d;
    d["w"] = r.w;
    d["p"] = r.p_value;
    d["method"] = std::string(to_string(r.method));
    d["n_effective"] = r.n_effective;
    d["degenerate"] = r.degenerate;
    return d;
}

// Transport-free session for scripted clients: JSON text in, JSON text out.
class PySession {
public:
    explicit PySession(const std::string& config_text) : core_(config_from(config_text, {}).resolved_service().session) {
        core_.client_connected();
    }

    std::vector<std::string> send(const std::string& text) {
        std::vector<OutboundMessage> out;
        core_.handle_text(text, out);
        return render(out);
    }

    std::vector<std::string> advance(long ticks) {
        std::vector<OutboundMessage> out;
        for (long i = 0; i < ticks; ++i) core_.tick(out);
        return render(out);
    }

    double time() const { return core_.time(); }

private:
    static std::vector<std::string> render(const std::vector<OutboundMessage>& out) {
        std::vector<std::string> texts;
        texts.reserve(out.size());
        for (const auto& m : out) texts.push_back(to_json_text(m));
        return texts;
    }

    SessionCore core_;
};

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Variable impedance teleoperation simulator";
    m.attr("__version__") = std::string(library_version());

    // Translators run newest first, so the base class is registered first.
    py::register_exception<Error>(m, "SimulationError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

    m.def("stiffness_law", [](double v) { return stiffness_law(v); }, py::arg("handle_velocity"));
    m.def("damping_law", [](double v) { return damping_law(v); }, py::arg("handle_velocity"));
    m.def(
        "impedance",
        [](const std::string& mode, double v) {
            const ImpedanceCommand c = impedance_for_mode(parse_mode(mode), v);
            return py::make_tuple(c.k, c.b);
        },
        py::arg("mode"), py::arg("handle_velocity"), "Commanded (stiffness, damping) of a mode.");

    m.def("default_config", []() { return print_config(RunConfig{}); },
          "Fully resolved default configuration as INI text.");
    m.def(
        "resolve_config", [](const std::string& text, const py::dict& overrides) {
            return print_config(config_from(text, overrides));
        },
        py::arg("text") = "", py::arg("overrides") = py::dict());

    m.def(
        "run_trial",
        [](const std::string& text, const py::dict& overrides) {
            const RunConfig cfg = config_from(text, overrides);
            std::vector<SimFrame> trace;
            const TrialRecord rec = run_configured_trial(cfg, &trace);
            py::dict d;
            d["failed"] = rec.failed;
            d["error"] = rec.error;
            d["outcome"] = outcome_dict(rec.outcome);
            d["trace"] = trace_dict(trace);
            return d;
        },
        py::arg("config") = "", py::arg("overrides") = py::dict(),
        "Run one trial; keys of `overrides` are section.key names, e.g. {'trial.mode': 'L'}.");

    m.def(
        "sweep",
        [](const std::string& mode, const std::string& text, const py::dict& overrides) {
            const RunConfig cfg = config_from(text, overrides);
            const SweepConfig sweep = cfg.resolved_sweep();
            const auto points = measure_response(parse_mode(mode), sweep);
            py::array_t<double> f(static_cast<py::ssize_t>(points.size()));
            py::array_t<double> mag(static_cast<py::ssize_t>(points.size()));
            py::array_t<double> phase(static_cast<py::ssize_t>(points.size()));
            for (std::size_t i = 0; i < points.size(); ++i) {
                f.mutable_data()[i] = points[i].freq;
                mag.mutable_data()[i] = points[i].magnitude_db;
                phase.mutable_data()[i] = points[i].phase_deg;
            }
            const PeakEstimate peak = find_peak(parse_mode(mode), points, sweep);
            py::dict d;
            d["freq"] = f;
            d["magnitude_db"] = mag;
            d["phase_deg"] = phase;
            d["peak_freq"] = peak.freq;
            d["peak_db"] = peak.magnitude_db;
            return d;
        },
        py::arg("mode"), py::arg("config") = "", py::arg("overrides") = py::dict(),
        "Frequency response of one mode.");

    m.def(
        "run_experiment",
        [](const std::filesystem::path& run_dir, const std::string& text, const py::dict& overrides) {
            const RunConfig cfg = config_from(text, overrides);
            std::vector<TrialRecord> records;
            {
                py::gil_scoped_release release;
                records = run_experiment_to_dir(cfg.resolved_plan(), run_dir, print_config(cfg));
            }
            return records.size();
        },
        py::arg("run_dir"), py::arg("config") = "", py::arg("overrides") = py::dict(),
        "Run the synthetic experiment into a run directory; returns the trial count.");

    m.def(
        "analyze",
        [](const std::filesystem::path& run_dir, const std::string& text, const py::dict& overrides) {
            const RunConfig cfg = config_from(text, overrides);
            const auto records = read_records_csv(run_dir / "records.csv");
            return to_dict(report_json(analysis_report(records, cfg.stats)));
        },
        py::arg("run_dir"), py::arg("config") = "", py::arg("overrides") = py::dict(),
        "Paired comparison report of a run directory.");

    m.def("wilcoxon", [](const std::vector<double>& diffs) { return wilcoxon_dict(wilcoxon_signed_rank(diffs)); },
          py::arg("differences"));
    m.def("percentile_midpoint", [](std::vector<double> v, double p) { return percentile_midpoint(v, p); },
          py::arg("values"), py::arg("fraction"));
    m.def(
        "median_difference_ci",
        [](const std::vector<double>& diffs, double level, int resamples, std::uint64_t seed) {
            BootstrapConfig cfg;
            cfg.level = level;
            cfg.resamples = resamples;
            cfg.seed = seed;
            const EffectSize e = median_difference_ci(diffs, cfg);
            return py::make_tuple(e.estimate, e.ci_low, e.ci_high);
        },
        py::arg("differences"), py::arg("level") = 0.95, py::arg("resamples") = 10000, py::arg("seed") = 1);

    py::class_<PySession>(m, "Session", "Session logic without a network; messages are JSON text.")
        .def(py::init<const std::string&>(), py::arg("config") = "")
        .def("send", &PySession::send, py::arg("message"), "Handle one inbound message; returns replies.")
        .def("advance", &PySession::advance, py::arg("ticks") = 1, "Run control ticks; returns outbound messages.")
        .def_property_readonly("time", &PySession::time);
}
