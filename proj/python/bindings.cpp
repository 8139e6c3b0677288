#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ssflab/brownian.hpp"
#include "ssflab/harness.hpp"
#include "ssflab/ssf.hpp"

namespace py = pybind11;
using namespace ssflab;

namespace {

py::object cell(const Cell& c) {
  return std::visit([](const auto& v) -> py::object { return py::cast(v); }, c);
}

py::dict record_dict(const ResultRecord& r) {
  py::list checks;
  for (const auto& c : r.checks) {
    py::dict d;
    d["name"] = c.name;
    d["hard"] = c.hard;
    d["passed"] = c.passed;
    d["value"] = c.value;
    d["threshold"] = c.threshold;
    d["detail"] = c.detail;
    checks.append(d);
  }
  py::dict tables;
  for (const auto& t : r.tables) {
    py::list rows;
    for (const auto& row : t.rows) {
      py::list pr;
      for (const auto& c : row) pr.append(cell(c));
      rows.append(pr);
    }
    py::dict d;
    d["columns"] = t.columns;
    d["rows"] = rows;
    tables[py::str(t.name)] = d;
  }
  py::dict out;
  out["experiment"] = r.experiment;
  out["seed"] = r.seed;
  out["passed"] = r.passed();
  out["checks"] = checks;
  out["tables"] = tables;
  out["values"] = r.values;
  out["warnings"] = r.warnings;
  return out;
}

SymmetricBandMatrix band(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix must be square");
  if (!m.isApprox(m.transpose(), 0.0)) throw std::invalid_argument("matrix must be symmetric");
  return SymmetricBandMatrix::from_dense(m);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ssflab core bindings";
  m.attr("__version__") = tool_version();

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<OnSpectrumError>(m, "OnSpectrumError", PyExc_ValueError);

  m.def("philox", [](std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    return Philox4x32::generate(ctr, key);
  });

  m.def("free_hamiltonian", [](int dimension, std::vector<int> extents, double spacing) {
    return free_hamiltonian(build_grid(dimension, spacing, extents)).matrix.to_dense();
  }, py::arg("dimension"), py::arg("extents"), py::arg("spacing") = 1.0);

  m.def("hamiltonian", [](int dimension, std::vector<int> extents, std::vector<double> potential, double spacing) {
    const Grid g = build_grid(dimension, spacing, extents);
    if (potential.size() != g.site_count()) throw std::invalid_argument("potential needs one value per site");
    PotentialField v;
    v.values = std::move(potential);
    return assemble_hamiltonian(g, v).matrix.to_dense();
  }, py::arg("dimension"), py::arg("extents"), py::arg("potential"), py::arg("spacing") = 1.0,
  "Dirichlet finite-difference -Laplacian plus a diagonal potential (row-major sites).");

  m.def("count_below", [](const Eigen::MatrixXd& h, double lam) { return count_below(band(h), lam); },
        "Number of eigenvalues strictly below lam.");

  m.def("ssf", [](const Eigen::MatrixXd& h, const Eigen::MatrixXd& h0, std::vector<double> lambdas) {
    return ssf_counting(band(h), band(h0), lambdas).xi;
  }, "xi(lambda) = N(lambda; h0) - N(lambda; h) at certified off-spectrum energies.");

  m.def("birman_krein_residual", [](const Eigen::MatrixXd& h, const Eigen::MatrixXd& h0, double a, double b) {
    const auto r = birman_krein_residual(band(h), band(h0), SpectralFunction::bump(a, b));
    return py::make_tuple(r.trace_difference, r.step_integral, r.residual, r.tolerance);
  });

  m.def("gaussian_bound_halfspace", [](int nu, double distance, double t) {
    const RegionSpec region(nu, HalfSpace{0, distance, true});
    return gaussian_bound(Point(nu, 0.0), region, t);
  });

  m.def("experiment_names", &experiment_names);
  m.def("default_config", [](const std::string& name) {
    const auto k = experiment_from_string(name);
    if (!k) throw std::invalid_argument("unknown experiment " + name);
    return config_to_yaml(default_config(*k));
  }, "Canonical YAML of the default configuration.");
  m.def("validate", [](const std::string& yaml) {
    try {
      parse_config(yaml);
    } catch (const ConfigError& e) {
      return e.errors();
    }
    return std::vector<std::string>{};
  }, "Every violated constraint of a YAML config (empty when valid).");
  m.def("run", [](const std::string& yaml, unsigned workers) {
    const ExperimentConfig c = parse_config(yaml);
    ResultRecord r;
    {
      py::gil_scoped_release release;
      r = run_experiment(c, Executor(workers));
    }
    return record_dict(r);
  }, py::arg("config"), py::arg("workers") = 1, "Run an experiment from YAML text; returns the result record.");
  m.def("table_csv", [](const std::string& yaml, const std::string& table, unsigned workers) {
    const ExperimentConfig c = parse_config(yaml);
    const ResultRecord r = run_experiment(c, Executor(workers));
    const Table* t = r.find_table(table);
    if (!t) throw std::invalid_argument("no table " + table);
    return table_to_csv(*t);
  }, py::arg("config"), py::arg("table") = "raw", py::arg("workers") = 1);
}
