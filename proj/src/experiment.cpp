#include "bscch/experiment.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "bscch/diagnostics.hpp"
#include "bscch/mass.hpp"
#include "bscch/stationary.hpp"

namespace bscch {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_checkpoint(const fs::path& path, const SimState& s) {
  std::ostringstream os;
  save_checkpoint(s, os);
  write_text(path, os.str());
}

void write_series(const fs::path& path, const TrajectoryRecord& rec) {
  std::ostringstream os;
  TimeSeries::from_record(rec).write_csv(os);
  write_text(path, os.str());
}

json mass_json(const MassValue& m) {
  if (const auto* p = std::get_if<MassPair>(&m)) return json::array({p->bulk, p->surface});
  return std::get<double>(m);
}

json energy_json(const EnergyBreakdown& e) {
  return {{"bulk_dirichlet", e.bulk_dirichlet}, {"bulk_potential", e.bulk_potential},
          {"surface_dirichlet", e.surface_dirichlet}, {"surface_potential", e.surface_potential},
          {"k_penalty", e.k_penalty}, {"total", e.total}};
}

json manifest(const RunConfig& cfg, const Problem& p) {
  json j;
  j["schema_version"] = 1;
  j["experiment"] = cfg.experiment;
  j["seed"] = cfg.seed;
  j["config_hash"] = hex64(config_hash(cfg));
  j["mesh_hash"] = hex64(p.mesh().hash());
  j["csv_schema_version"] = TimeSeries::kSchemaVersion;
  j["csv_columns"] = TimeSeries::schema();
  j["versions"] = {{"bscch", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"boost", BOOST_LIB_VERSION},
                   {"compiler", __VERSION__}};
  return j;
}

// ---------------------------------------------------------------------------------------------

json simulate(const RunConfig& cfg, const Problem& p, const fs::path& out) {
  TimeStepper ts(p, cfg.scheme, cfg.velocity.build(p));
  const auto x = initial_field(p, cfg, cfg.seed);
  RunOptions ro;
  ro.record_every = cfg.run.record_every;
  fs::create_directories(out / "checkpoints");
  if (cfg.run.checkpoint_every > 0)
    ro.on_step = [&](const SimState& s) {
      if (s.step % cfg.run.checkpoint_every == 0) {
        char name[64];
        std::snprintf(name, sizeof name, "step_%08ld.ckpt", s.step);
        write_checkpoint(out / "checkpoints" / name, s);
      }
    };
  const auto rec = run(ts, x, cfg.run.tau, cfg.run.t_end, ro);
  write_series(out / "timeseries.csv", rec);
  write_checkpoint(out / "checkpoints" / "final.ckpt", rec.final_state);
  const auto& a = rec.samples.front();
  const auto& b = rec.samples.back();
  return {{"steps", rec.final_state.step},
          {"final_time", rec.final_state.time},
          {"energy_initial", a.energy.total},
          {"energy_final", energy_json(b.energy)},
          {"mass_initial", mass_json(a.mass)},
          {"mass_final", mass_json(b.mass)},
          {"mass_drift", relative_mass_drift(a.mass, b.mass)},
          {"energy_residual_positive_part", energy_residual_positive_part(rec)},
          {"max_abs", rec.max_abs},
          {"interiority_breach", rec.interiority_breach},
          {"cfl_warning", rec.cfl_warning},
          {"upwinded_steps", rec.upwinded_steps},
          {"total_newton", rec.total_newton},
          {"max_newton", rec.max_newton}};
}

json stationary(const RunConfig& cfg, const Problem& p, const fs::path& out) {
  // guess: the initial field advanced to t_end (no motion when t_end == tau)
  auto guess = initial_field(p, cfg, cfg.seed);
  if (cfg.run.t_end > cfg.run.tau) {
    TimeStepper ts(p, cfg.scheme, cfg.velocity.build(p));
    RunOptions ro;
    ro.record_every = std::max(1, cfg.run.record_every);
    ro.rate_norm = false;
    guess = run(ts, guess, cfg.run.tau, cfg.run.t_end, ro).final_state.phi;
  }
  StationaryOptions so;
  so.tol = cfg.stationary.tol;
  so.max_iter = cfg.stationary.max_iter;
  const auto sol = newton_solve(p, guess, so);
  const auto f = multiplier_formulas(p, sol);
  SimState s;
  s.time = cfg.run.t_end;
  s.phi = sol.phi;
  fs::create_directories(out / "checkpoints");
  write_checkpoint(out / "checkpoints" / "stationary.ckpt", s);
  return {{"residual", sol.residual},
          {"iterations", sol.iterations},
          {"history", sol.history},
          {"mass_defect", sol.mass_defect},
          {"mu", sol.multipliers.mu},
          {"theta", sol.multipliers.theta},
          {"mu_formula", f.mu},
          {"theta_formula", f.theta},
          {"delta_star", sol.delta_star},
          {"energy", energy_json(energy(p, sol.phi))},
          {"criticality_defect", criticality_defect(p, sol.phi, 20, static_cast<unsigned>(cfg.seed))}};
}

json pullback(const RunConfig& cfg, const Problem& p) {
  std::vector<BulkSurfaceField> set;
  for (int k = 0; k < cfg.pullback.set_size; ++k)
    set.push_back(random_initial(p, cfg.initial.bound, cfg.initial.bound, cfg.seed + static_cast<std::uint64_t>(k)));
  PullbackOptions o;
  o.t_fixed = cfg.pullback.t_fixed;
  for (double lag : cfg.pullback.lags) o.tau_list.push_back(cfg.pullback.t_fixed - lag);
  o.velocity_offset = cfg.pullback.velocity_offset;
  o.threads = cfg.threads;
  const auto r = pullback_experiment(p, cfg.scheme, cfg.velocity.build(p), set, o);
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"tau", row.tau}, {"max_h1", row.max_h1}, {"spread", row.spread}, {"h1", row.h1}});
  return {{"rows", rows},
          {"fit", {{"model", "max_h1^2 = A exp(-rate (t - tau)) + B"},
                   {"A", r.amplitude},
                   {"rate", r.rate},
                   {"B", r.plateau},
                   {"rms", r.fit_rms},
                   {"ok", r.fit_ok}}},
          {"monotone", r.monotone},
          {"verdict", {{"rate_at_least", 0.1}, {"passed", r.fit_ok && r.monotone && r.rate >= 0.1}}}};
}

json equilibrium(const RunConfig& cfg, const Problem& p, const fs::path& out) {
  EquilibriumOptions o;
  o.tau = cfg.run.tau;
  o.t_end = cfg.run.t_end;
  o.d5_rate = cfg.equilibrium.d5_rate;
  o.record_every = cfg.run.record_every;
  o.cauchy_fraction = cfg.equilibrium.cauchy_fraction;
  o.increment_fraction = cfg.equilibrium.increment_fraction;
  o.energy_floor = cfg.equilibrium.energy_floor;
  o.newton.tol = cfg.stationary.tol;
  o.newton.max_iter = cfg.stationary.max_iter;
  const auto r = equilibrium_experiment(p, cfg.scheme, cfg.velocity.build(p), initial_field(p, cfg, cfg.seed), o);
  write_series(out / "timeseries.csv", r.record);
  fs::create_directories(out / "checkpoints");
  write_checkpoint(out / "checkpoints" / "final.ckpt", r.record.final_state);
  SimState s;
  s.time = cfg.run.t_end;
  s.phi = r.refined.phi;
  write_checkpoint(out / "checkpoints" / "refined.ckpt", s);
  const bool band = r.fit.in_band();
  return {{"d5", {{"integral", r.d5.integral}, {"tail", r.d5.tail}, {"satisfied", r.d5.satisfied()}}},
          {"energy_limit_window", r.e_star_window},
          {"energy_limit_refined", r.e_star},
          {"cauchy", r.cauchy},
          {"monotone_from", r.monotone_from ? json(*r.monotone_from) : json(nullptr)},
          {"max_increment", r.max_increment},
          {"refined_residual", r.refined.residual},
          {"refined_iterations", r.refined.iterations},
          {"delta_star", r.refined.delta_star},
          {"terminal_margin", r.terminal_margin},
          {"exponent_fit", {{"skipped", r.fit.skipped}, {"points", r.fit.points}, {"slope", r.fit.slope},
                            {"varpi", r.fit.varpi}, {"r2", r.fit.r2}, {"in_band", band}}},
          {"tolerances", {{"cauchy", 1e-6}, {"increment", 1e-4}, {"residual", 1e-10}}},
          {"verdict", {{"cauchy", r.cauchy <= 1e-6},
                       {"increment", r.max_increment <= 1e-4},
                       {"residual", r.refined.residual <= 1e-10},
                       {"varpi_in_band", band}}}};
}

}  // namespace

// ---------------------------------------------------------------------------------------------

std::vector<CertifyRow> certify(const RunConfig& cfg) {
  const auto problem = build_problem(cfg);
  const Problem& p = *problem;
  std::vector<CertifyRow> rows;
  auto add = [&](std::string name, bool ok, double value, double tol, std::string detail = {}) {
    rows.push_back({std::move(name), ok, value, tol, std::move(detail)});
  };
  auto guarded = [&](const std::string& name, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      add(name, false, std::nan(""), 0.0, std::string("error: ") + e.what());
    }
  };
  const auto x = initial_field(p, cfg, cfg.seed);
  VelocityPair vel = cfg.velocity.build(p);
  if (vel.is_zero()) {
    VelocitySpec rot;
    rot.stream = "rotation";
    rot.amplitude = 1.0;
    rot.surface_amplitude = 0.5;
    vel = rot.build(p);
  }
  const int steps = 100;
  const double horizon = steps * cfg.scheme.dt;

  guarded("mass conservation", [&] {
    TimeStepper ts(p, cfg.scheme, vel);
    RunOptions ro;
    ro.rate_norm = false;
    const auto rec = run(ts, x, 0.0, horizon, ro);
    const double drift = relative_mass_drift(rec.samples.front().mass, rec.samples.back().mass);
    add("mass conservation", drift <= 1e-9, drift, 1e-9, std::to_string(steps) + " steps with convection");
    const bool direct = cfg.scheme.potential_mode == PotentialMode::DirectLog;
    add("direct-log interiority", !direct || rec.max_abs < 1.0, rec.max_abs, 1.0,
        direct ? "max nodal |phi|" : "yosida mode: not asserted");
  });
  guarded("energy decrease", [&] {
    TimeStepper ts(p, cfg.scheme);
    RunOptions ro;
    ro.rate_norm = false;
    const auto rec = run(ts, x, 0.0, horizon, ro);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < rec.samples.size(); ++k)
      worst = std::max(worst, rec.samples[k].energy.total - rec.samples[k - 1].energy.total);
    add("energy decrease", worst <= 1e-10, worst, 1e-10, "largest per-step increase, zero velocity");
    const double pos = energy_residual_positive_part(rec);
    add("energy inequality", pos <= 1e-10, pos, 1e-10, "positive part of the residual, zero velocity");
  });
  guarded("yosida", [&] {
    const auto& f = p.bulk_potential().convex();
    const double lam = cfg.scheme.lambda;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double a = u(rng), b = u(rng);
      if (a == b) continue;
      worst = std::max(worst, std::abs(yosida_derivative(f, lam, a) - yosida_derivative(f, lam, b)) / std::abs(a - b));
    }
    add("yosida lipschitz", worst <= 1.0 / lam + 1e-10, worst, 1.0 / lam, "sampled difference quotients");
    if (f.singular()) {
      YosidaPart y(p.bulk_potential().convex_ptr(), lam);
      double excess = -std::numeric_limits<double>::infinity();
      for (int i = 0; i <= 400; ++i) {
        const double s = -1.0 + i / 200.0;
        excess = std::max(excess, y.value(s) - f.value(s));
      }
      add("yosida below base", excess <= 1e-14, excess, 1e-14, "max of W1_lambda - W1 on [-1,1]");
    }
  });
  guarded("poincare", [&] {
    if (p.params().K.is_infinite()) {
      add("poincare", true, 0.0, 0.0, "K = inf: not applicable");
      return;
    }
    const auto r = poincare_constant(p.ops(), p.params());
    add("poincare", r.lambda_min > 0.0, r.lambda_min, 0.0, "smallest constrained eigenvalue");
  });
  guarded("solution operator", [&] {
    const auto& solver = p.l_solver();
    const auto& form = p.l_form();
    const SparseMatrix pt = form.prolongation().transpose();
    std::mt19937_64 rng(cfg.seed + 1);
    std::normal_distribution<double> n01;
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
      auto f = BulkSurfaceField::zeros(p.num_bulk(), p.num_surface());
      for (int i = 0; i < f.bulk.size(); ++i) f.bulk[i] = n01(rng);
      for (int i = 0; i < f.surface.size(); ++i) f.surface[i] = n01(rng);
      f = solver.make_compatible(f);
      const auto u = solver.solve(f);
      const Vector mf = p.ops().lumped_stacked().cwiseProduct(f.stacked());
      const Vector res = pt * (form.matrix() * u.stacked() + mf);
      worst = std::max(worst, res.norm() / std::max(1e-300, (pt * mf).norm()));
    }
    add("solution operator", worst <= 1e-10, worst, 1e-10, "relative weak-identity residual");
  });
  {
    const double q = decay_gronwall_Q(1.0, 1.0, 0.0);
    const double e = std::exp(0.5) / (1.0 - std::exp(-0.5));
    add("gronwall constants", std::abs(q - e * e) <= 1e-6 && uniform_gronwall_bound(std::log(2.0), 1, 1, 1) == 4.0,
        q, 1e-6, "Q(1,1,0)");
  }
  guarded("process axioms", [&] {
    TimeStepper ts(p, cfg.scheme, vel);
    RunOptions ro;
    ro.rate_norm = false;
    const double t1 = 10 * cfg.scheme.dt, t2 = 20 * cfg.scheme.dt;
    const auto id = run(ts, x, t1, t1, ro);
    add("process identity", (id.final_state.phi - x).max_abs() == 0.0, (id.final_state.phi - x).max_abs(), 0.0);
    const auto full = run(ts, x, 0.0, t2, ro);
    const auto half = run(ts, x, 0.0, t1, ro);
    const auto rest = run(ts, half.final_state.phi, half.final_state.time, t2, ro);
    const double d = (full.final_state.phi - rest.final_state.phi).max_abs();
    add("process composition", d == 0.0, d, 0.0, "aligned steps");
    TimeStepper still(p, cfg.scheme);
    const auto a = run(still, x, 0.0, t1, ro);
    const auto b = run(still, x, 7.0, 7.0 + t1, ro);
    const double da = (a.final_state.phi - b.final_state.phi).max_abs();
    add("autonomy", da == 0.0, da, 0.0, "zero velocity, shifted start");
  });
  guarded("stationary solver", [&] {
    StationaryOptions so;
    so.tol = cfg.stationary.tol;
    so.max_iter = cfg.stationary.max_iter;
    const auto sol = newton_solve(p, mass_state(p), so);
    add("stationary solver", sol.residual <= so.tol, sol.residual, so.tol,
        "Newton from the mass state, " + std::to_string(sol.iterations) + " iterations");
  });
  guarded("checkpoint", [&] {
    TimeStepper ts(p, cfg.scheme);
    SimState s;
    s.phi = x;
    s = ts.step(s);
    std::stringstream io;
    save_checkpoint(s, io);
    const auto r = load_checkpoint(io);
    const bool same = r.time == s.time && (r.phi.bulk.array() == s.phi.bulk.array()).all() &&
                      (r.phi.surface.array() == s.phi.surface.array()).all() &&
                      (r.mu.bulk.array() == s.mu.bulk.array()).all();
    add("checkpoint round trip", same, same ? 0.0 : 1.0, 0.0, "bitwise");
  });
  return rows;
}

int run_experiment(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  auto fail = [&](const char* kind, const std::string& msg, int code) {
    json e = {{"kind", kind}, {"message", msg}};
    try {
      write_json(out / "error.json", e);
    } catch (...) {
    }
    return code;
  };
  try {
    validate_config(cfg);
    write_text(out / "config.json", to_json_text(cfg));
    const auto problem = build_problem(cfg);
    write_json(out / "manifest.json", manifest(cfg, *problem));
    json summary;
    summary["experiment"] = cfg.experiment;
    int code = 0;
    if (cfg.experiment == "simulate") {
      summary["result"] = simulate(cfg, *problem, out);
    } else if (cfg.experiment == "stationary") {
      summary["result"] = stationary(cfg, *problem, out);
    } else if (cfg.experiment == "pullback") {
      summary["result"] = pullback(cfg, *problem);
    } else if (cfg.experiment == "equilibrium") {
      summary["result"] = equilibrium(cfg, *problem, out);
    } else if (cfg.experiment == "certify") {
      const auto rows = certify(cfg);
      std::ostringstream csv;
      csv << "check,passed,value,tolerance,detail\n";
      json table = json::array();
      char buf[64];
      for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", r.value, r.tolerance);
        csv << '"' << r.name << "\"," << (r.passed ? "pass" : "FAIL") << ',' << buf << ",\"" << r.detail << "\"\n";
        table.push_back({{"check", r.name}, {"passed", r.passed}, {"value", r.value}, {"tolerance", r.tolerance},
                         {"detail", r.detail}});
        if (!r.passed) code = 3;
      }
      write_text(out / "certify.csv", csv.str());
      summary["result"] = table;
    }
    write_json(out / "summary.json", summary);
    return code;
  } catch (const ConfigError& e) {
    return fail(to_string(e.kind()), e.what(), 1);
  } catch (const Error& e) {
    return fail(to_string(e.kind()), e.what(), e.kind() == ErrorKind::Config ? 1 : 2);
  } catch (const std::exception& e) {
    return fail("Internal", e.what(), 2);
  }
}

void export_mesh(const RunConfig& cfg, const fs::path& path) {
  const auto mesh = build_disk_mesh(cfg.radius, cfg.level);
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_vtk(mesh, os);
}

}  // namespace bscch
