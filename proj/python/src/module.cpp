// Python bindings for configuration, the CLI commands, the lemma suite and field dumps.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "slabflow/commands.hpp"
#include "slabflow/diagnostics.hpp"
#include "slabflow/error.hpp"
#include "slabflow/io.hpp"

namespace py = pybind11;
using namespace slabflow;

namespace {

using CommandFn = int (*)(const RunConfig&, std::ostream&, std::ostream&);

py::tuple invoke(CommandFn fn, const RunConfig& cfg) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = fn(cfg, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

py::dict dump_to_dict(const FieldDump& d) {
  py::array_t<double> values({static_cast<py::ssize_t>(d.components), static_cast<py::ssize_t>(d.n1),
                              static_cast<py::ssize_t>(d.n2), static_cast<py::ssize_t>(d.nz)});
  std::copy(d.values.begin(), d.values.end(), values.mutable_data());
  py::dict out;
  out["L1"] = d.L1;
  out["L2"] = d.L2;
  out["b0"] = d.b0;
  out["t"] = d.t;
  out["values"] = values;
  return out;
}

}  // namespace

PYBIND11_MODULE(_slabflow, m) {
  m.doc() = "Spectral free-surface Navier-Stokes solver on a flattened slab";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<SolverError>(m, "SolverError", base.ptr());
  py::register_exception<MonitorError>(m, "MonitorError", base.ptr());

  py::class_<RunConfig>(m, "RunConfig")
      .def_property_readonly("grid", [](const RunConfig& c) { return py::make_tuple(c.grid.N1, c.grid.N2, c.grid.Nz); })
      .def_property_readonly("box", [](const RunConfig& c) { return py::make_tuple(c.grid.L1, c.grid.L2, c.grid.b0); })
      .def_property_readonly("T", [](const RunConfig& c) { return c.time.T; })
      .def_property_readonly("dt", [](const RunConfig& c) { return c.time.dt; })
      .def_property_readonly("seed", [](const RunConfig& c) { return c.output.seed; })
      .def_property(
          "output_dir", [](const RunConfig& c) { return c.output.dir; },
          [](RunConfig& c, const std::string& dir) { c.output.dir = dir; });

  m.def("parse_config", [](const std::string& text) { return parse_config(text); }, py::arg("text"),
        "Parse `key = value` configuration text; raises ConfigError listing every problem.");
  m.def("load_config", &load_config, py::arg("path"));

  m.def("run", [](const RunConfig& c) { return invoke(&cmd_run, c); }, py::arg("config"),
        "Picard run. Returns (exit_code, stdout, stderr).");
  m.def("verify", [](const RunConfig& c) { return invoke(&cmd_verify, c); }, py::arg("config"));
  m.def("bench", [](const RunConfig& c) { return invoke(&cmd_bench, c); }, py::arg("config"));
  m.def("extend", [](const RunConfig& c) { return invoke(&cmd_extend, c); }, py::arg("config"));

  m.def(
      "lemma_suite",
      [](int n, int nz, int samples, std::uint64_t seed, double corrupt_geometry) {
        LemmaSuiteOptions opts;
        opts.grid.N1 = n;
        opts.grid.N2 = n;
        opts.grid.Nz = nz;
        opts.samples = samples;
        opts.seed = seed;
        opts.corrupt_geometry = corrupt_geometry;
        LemmaChecks checks;
        {
          py::gil_scoped_release release;
          checks = run_lemma_suite(ExtensionParams{}, opts);
        }
        py::dict out;
        for (const auto& [name, c] : checks) {
          py::dict d;
          d["value"] = c.value;
          d["threshold"] = c.threshold;
          d["kind"] = c.kind;
          d["pass"] = c.pass;
          out[py::str(name)] = d;
        }
        return out;
      },
      py::arg("n") = 32, py::arg("nz") = 17, py::arg("samples") = 20, py::arg("seed") = 1,
      py::arg("corrupt_geometry") = 0.0,
      "Identity and extension checks on an n x n x nz grid; maps check name to value, threshold, kind, pass.");

  m.def("read_dump", [](const std::filesystem::path& p) { return dump_to_dict(read_dump(p)); }, py::arg("path"),
        "Read an SLF1 dump; values has shape (components, n1, n2, nz).");

  m.attr("EXIT_OK") = static_cast<int>(kExitOk);
  m.attr("EXIT_FAILURE") = static_cast<int>(kExitFailure);
  m.attr("EXIT_MONITOR") = static_cast<int>(kExitMonitor);
  m.attr("EXIT_SOLVER") = static_cast<int>(kExitSolver);
}
