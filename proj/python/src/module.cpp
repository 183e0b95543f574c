#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bscch/config.hpp"
#include "bscch/diagnostics.hpp"
#include "bscch/experiment.hpp"
#include "bscch/stationary.hpp"

namespace py = pybind11;
using namespace bscch;

namespace {

py::dict energy_dict(const EnergyBreakdown& e) {
  py::dict d;
  d["bulk_dirichlet"] = e.bulk_dirichlet;
  d["bulk_potential"] = e.bulk_potential;
  d["surface_dirichlet"] = e.surface_dirichlet;
  d["surface_potential"] = e.surface_potential;
  d["k_penalty"] = e.k_penalty;
  d["total"] = e.total;
  return d;
}

BulkSurfaceField field_of(const Problem& p, const Eigen::VectorXd& bulk, const Eigen::VectorXd& surface) {
  if (bulk.size() != p.num_bulk() || surface.size() != p.num_surface())
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(p.num_bulk()) + " bulk and " +
                                                  std::to_string(p.num_surface()) + " surface values");
  return {bulk, surface};
}

// Problem built from a config, kept alive together with it
class Model {
 public:
  explicit Model(const std::string& text) : cfg_(parse_config(text)), problem_(build_problem(cfg_)) {}

  py::dict mesh() const {
    const auto& m = problem_->mesh();
    Eigen::MatrixX2d nodes(m.num_bulk(), 2);
    for (int i = 0; i < m.num_bulk(); ++i) nodes.row(i) = m.nodes()[i].transpose();
    Eigen::MatrixX3i tris(m.num_triangles(), 3);
    for (int t = 0; t < m.num_triangles(); ++t)
      for (int k = 0; k < 3; ++k) tris(t, k) = m.triangles()[t][k];
    py::dict d;
    d["nodes"] = nodes;
    d["triangles"] = tris;
    d["surface_nodes"] = m.surface_nodes();
    d["hash"] = m.hash();
    return d;
  }

  std::pair<Eigen::VectorXd, Eigen::VectorXd> initial(std::uint64_t seed) const {
    const auto f = initial_field(*problem_, cfg_, seed);
    return {f.bulk, f.surface};
  }

  py::dict energy(const Eigen::VectorXd& bulk, const Eigen::VectorXd& surface) const {
    return energy_dict(bscch::energy(*problem_, field_of(*problem_, bulk, surface)));
  }

  py::dict simulate(const Eigen::VectorXd& bulk, const Eigen::VectorXd& surface, double tau, double t_end) const {
    TimeStepper ts(*problem_, cfg_.scheme, cfg_.velocity.build(*problem_));
    RunOptions ro;
    ro.record_every = cfg_.run.record_every;
    TrajectoryRecord rec;
    {
      py::gil_scoped_release release;
      rec = run(ts, field_of(*problem_, bulk, surface), tau, t_end, ro);
    }
    const auto series = TimeSeries::from_record(rec);
    py::dict columns;
    for (std::size_t c = 0; c < series.columns.size(); ++c) {
      Eigen::VectorXd col(series.rows.size());
      for (std::size_t r = 0; r < series.rows.size(); ++r) col[static_cast<Eigen::Index>(r)] = series.rows[r][c];
      columns[py::str(series.columns[c])] = col;
    }
    py::dict d;
    d["series"] = columns;
    d["bulk"] = rec.final_state.phi.bulk;
    d["surface"] = rec.final_state.phi.surface;
    d["time"] = rec.final_state.time;
    d["steps"] = rec.final_state.step;
    d["energy_residual_positive_part"] = energy_residual_positive_part(rec);
    return d;
  }

  py::dict stationary(const Eigen::VectorXd& bulk, const Eigen::VectorXd& surface) const {
    StationaryOptions so;
    so.tol = cfg_.stationary.tol;
    so.max_iter = cfg_.stationary.max_iter;
    const auto sol = newton_solve(*problem_, field_of(*problem_, bulk, surface), so);
    py::dict d;
    d["bulk"] = sol.phi.bulk;
    d["surface"] = sol.phi.surface;
    d["residual"] = sol.residual;
    d["iterations"] = sol.iterations;
    d["mu"] = sol.multipliers.mu;
    d["theta"] = sol.multipliers.theta;
    d["delta_star"] = sol.delta_star;
    return d;
  }

  int num_bulk() const { return problem_->num_bulk(); }
  int num_surface() const { return problem_->num_surface(); }
  std::string config() const { return to_json_text(cfg_); }

 private:
  RunConfig cfg_;
  std::unique_ptr<Problem> problem_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "bulk-surface convective Cahn-Hilliard simulator";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "BscchError", PyExc_RuntimeError);
  // registered later, so tried first
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("preset", [](const std::string& name) { return to_json_text(preset(name)); }, py::arg("name"),
        "Canonical JSON of a named preset.");
  m.def("normalize_config", [](const std::string& text) { return to_json_text(parse_config(text)); }, py::arg("text"),
        "Parses, validates and returns canonical JSON. Raises ValueError listing the issues.");
  m.def("config_hash", [](const std::string& text) { return config_hash(parse_config(text)); }, py::arg("text"));
  m.def("run_experiment",
        [](const std::string& text, const std::string& out_dir) {
          const auto cfg = parse_config(text);
          py::gil_scoped_release release;
          return run_experiment(cfg, out_dir);
        },
        py::arg("text"), py::arg("out_dir"), "Exit status as the CLI: 0 ok, 1 config, 2 numerical, 3 certify failures.");
  m.def("certify",
        [](const std::string& text) {
          const auto cfg = parse_config(text);
          std::vector<CertifyRow> rows;
          {
            py::gil_scoped_release release;
            rows = certify(cfg);
          }
          py::list out;
          for (const auto& r : rows) {
            py::dict d;
            d["check"] = r.name;
            d["passed"] = r.passed;
            d["value"] = r.value;
            d["tolerance"] = r.tolerance;
            d["detail"] = r.detail;
            out.append(d);
          }
          return out;
        },
        py::arg("text"));

  m.def("yosida_derivative",
        [](double theta, double lambda, double s) { return yosida_derivative(LogEntropy(theta), lambda, s); },
        py::arg("theta"), py::arg("lam"), py::arg("s"));
  m.def("uniform_gronwall_bound", &uniform_gronwall_bound, py::arg("a1"), py::arg("a2"), py::arg("a3"), py::arg("r"));
  m.def("decay_gronwall_Q", &decay_gronwall_Q, py::arg("gamma"), py::arg("A1"), py::arg("A2"));

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("config"))
      .def_property_readonly("num_bulk", &Model::num_bulk)
      .def_property_readonly("num_surface", &Model::num_surface)
      .def_property_readonly("config", &Model::config)
      .def("mesh", &Model::mesh)
      .def("initial", &Model::initial, py::arg("seed"))
      .def("energy", &Model::energy, py::arg("bulk"), py::arg("surface"))
      .def("simulate", &Model::simulate, py::arg("bulk"), py::arg("surface"), py::arg("tau"), py::arg("t_end"))
      .def("stationary", &Model::stationary, py::arg("bulk"), py::arg("surface"));
}
