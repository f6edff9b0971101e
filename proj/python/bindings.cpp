// Python bindings for the echolab core.
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "echolab/commands.hpp"
#include "echolab/echo.hpp"
#include "echolab/errors.hpp"
#include "echolab/forward.hpp"
#include "echolab/io.hpp"
#include "echolab/pulses.hpp"
#include "echolab/skew_normal.hpp"

namespace py = pybind11;
using namespace echolab;

namespace {

// Structured results cross the boundary as plain Python objects via their JSON form.
py::object to_python(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_python(const py::object& o) {
    return parse_json(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::array_t<double> sample_array(const SkewNormalParams& p, std::size_t n, std::uint64_t seed) {
    const auto draws = sn_sample(SkewNormal(p), n, seed);
    py::array_t<double> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(n), 3});
    auto r = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < 3; ++k) r(i, k) = draws[i][k];
    return out;
}

py::array_t<double> density_array(const SkewNormalParams& p, py::array_t<double, py::array::c_style | py::array::forcecast> w) {
    if (w.ndim() != 2 || w.shape(1) != 3) throw ValidationError("points must have shape (n, 3)");
    const SkewNormal m(p);
    const auto in = w.unchecked<2>();
    py::array_t<double> out(std::vector<py::ssize_t>{w.shape(0)});
    auto r = out.mutable_unchecked<1>();
    for (py::ssize_t i = 0; i < w.shape(0); ++i) r(i) = m.density(FrequencyTriple{in(i, 0), in(i, 1), in(i, 2)});
    return out;
}

py::array_t<double> marginal_array(const SkewNormalParams& p, std::pair<int, int> keep, const std::vector<double>& a,
                                   const std::vector<double>& b) {
    const auto g = sn_marginal_2d(SkewNormal(p), keep).evaluate(a, b);
    py::array_t<double> out(
        std::vector<py::ssize_t>{static_cast<py::ssize_t>(g.rows()), static_cast<py::ssize_t>(g.cols())});
    auto r = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t k = 0; k < g.cols(); ++k) r(i, k) = g.at(i, k);
    return out;
}

py::object echo(const SkewNormalParams& p, const std::vector<double>& tau_ms, const std::string& method,
                std::size_t nodes, bool check_convergence) {
    EchoOptions o;
    o.method = interpolation_from_string(method);
    o.nodes = nodes;
    o.check_convergence = check_convergence;
    return to_python(json(echo_amplitude(p, tau_ms, o)));
}

py::object plateau(const std::vector<double>& tau_ms, const std::vector<double>& epsilon, double slope_threshold,
                   double min_length_ms) {
    return to_python(json(detect_plateau(tau_ms, epsilon, PlateauOptions{slope_threshold, min_length_ms})));
}

py::dict dephasing(const SkewNormalParams& p, const std::vector<double>& t_ms) {
    const auto fd = free_dephasing(p, t_ms);
    py::dict d;
    d["t_ms"] = fd.t_ms;
    d["decay"] = fd.decay;
    d["one_over_e_ms"] = fd.one_over_e_ms ? py::object(py::float_(*fd.one_over_e_ms)) : py::object(py::none());
    return d;
}

py::object holes(const SkewNormalParams& p, double pump_khz) {
    return to_python(json(hole_width_curve(SkewNormal(p), pump_khz, PulsePair{})));
}

std::vector<std::string> run(const std::string& command, const std::string& out_dir, const py::object& config,
                             std::optional<std::uint64_t> seed, const std::string& format) {
    RunConfig c = config.is_none() ? RunConfig{} : run_config_from_json(from_python(config));
    if (seed) c.seed = *seed;
    const auto fmt = output_format_from_string(format);
    CommandResult r;
    if (command == "synth") r = cmd_synth(c, out_dir, fmt);
    else if (command == "fit") r = cmd_fit(c, out_dir, fmt);
    else if (command == "echo") r = cmd_echo(c, out_dir, fmt);
    else if (command == "traj") r = cmd_traj(c, out_dir, fmt);
    else if (command == "baseline") r = cmd_baseline(c, out_dir, fmt);
    else if (command == "report") r = cmd_report(c, out_dir, fmt);
    else throw ValidationError("unknown command: " + command);
    return r.files;
}

}  // namespace

PYBIND11_MODULE(_echolab, m) {
    m.doc() = "Skew-normal trajectory inference and echo prediction";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const IoError& e) {
            PyErr_SetString(PyExc_OSError, e.what());
        } catch (const ValidationError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const Error& e) {
            PyErr_SetString(PyExc_RuntimeError, e.what());
        }
    });

    py::class_<SkewNormalParams>(m, "SkewNormalParams")
        .def(py::init<>())
        .def_readwrite("mu_khz", &SkewNormalParams::mu_khz)
        .def_readwrite("sigma_khz", &SkewNormalParams::sigma_khz)
        .def_readwrite("rho", &SkewNormalParams::rho)
        .def_readwrite("alpha", &SkewNormalParams::alpha)
        .def_readwrite("node_times_ms", &SkewNormalParams::node_times_ms)
        .def("to_dict", [](const SkewNormalParams& p) { return to_python(json(p)); })
        .def_static("from_dict", [](const py::object& o) { return from_python(o).get<SkewNormalParams>(); })
        .def(py::self == py::self)
        .def("__repr__", [](const SkewNormalParams& p) { return "SkewNormalParams(" + json(p).dump() + ")"; });

    m.def("averaged_params", &averaged_params, "Averaged fit parameters used as defaults");
    m.def("is_valid", &is_valid, py::arg("params"));
    m.def("density", &density_array, py::arg("params"), py::arg("points"), "Trivariate density at (n, 3) points");
    m.def("sample", &sample_array, py::arg("params"), py::arg("n"), py::arg("seed"), "Draws of (w0, w2, w5)");
    m.def("marginal_2d", &marginal_array, py::arg("params"), py::arg("keep"), py::arg("axis_a"), py::arg("axis_b"));
    m.def("tau_grid", &tau_grid, py::arg("t_max_ms") = 6.0, py::arg("step_ms") = 0.05);
    m.def("echo_amplitude", &echo, py::arg("params"), py::arg("tau_ms"), py::arg("method") = "monotone_cubic",
          py::arg("nodes") = 48, py::arg("check_convergence") = true);
    m.def("detect_plateau", &plateau, py::arg("tau_ms"), py::arg("epsilon"), py::arg("slope_threshold") = 0.05,
          py::arg("min_length_ms") = 0.5);
    m.def("free_dephasing", &dephasing, py::arg("params"), py::arg("t_ms"));
    m.def(
        "instrumental_width",
        [](double omega_m_khz, int cycles) {
            const PulseSpec s{omega_m_khz, PulseSpec{}.amplitude_rad, cycles};
            return instrumental_width(s, s);
        },
        py::arg("omega_m_khz") = 6.0, py::arg("cycles") = 8, "Hole-width floor of two identical pulses (Hz)");
    m.def("hole_width_curve", &holes, py::arg("params"), py::arg("pump_khz") = 6.45);
    m.def("run_command", &run, py::arg("command"), py::arg("out_dir"), py::arg("config") = py::none(),
          py::arg("seed") = py::none(), py::arg("format") = "csv",
          "Run a CLI command in-process; returns the written file names");
}
