#include "bscch/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "bscch/mass.hpp"

namespace bscch {

using json = nlohmann::json;

SplitPotential PotentialSpec::build() const {
  if (kind == "log") return SplitPotential(std::make_shared<LogEntropy>(theta), SmoothPart{-theta_c, -field});
  if (kind == "quadratic") return make_quadratic_potential(c, SmoothPart{curvature, -field});
  throw Error(ErrorKind::Config, "unknown potential kind '" + kind + "'");
}

VelocityPair VelocitySpec::build(const Problem& problem) const {
  if (stream == "none") return {};
  const auto& mesh = problem.mesh();
  // the stream functions take the disk radius; the mesh is centred at the origin
  double radius = 0.0;
  for (int j : mesh.surface_nodes()) radius = std::max(radius, mesh.nodes()[j].norm());
  Vector psi;
  if (stream == "rotation")
    psi = stream_rotation(mesh, amplitude, radius);
  else if (stream == "cellular")
    psi = stream_cellular(mesh, amplitude, radius, mode);
  else if (stream == "rotation+cellular")
    psi = stream_rotation(mesh, amplitude, radius) + stream_cellular(mesh, cellular_amplitude, radius, mode);
  else
    throw Error(ErrorKind::Config, "unknown stream '" + stream + "'");
  return VelocityPair(mesh, problem.ops(), std::move(psi), surface_amplitude,
                      surface_from_bulk || problem.params().K.is_zero(), envelope);
}

RunConfig::RunConfig() {
  params.K = ExtendedReal::finite(1.0);
  params.L = ExtendedReal::finite(1.0);
  params.mass_target = 0.0;
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : "; ") + x;
  return s;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : Error(ErrorKind::Config, "invalid config: " + join(issues)), issues_(std::move(issues)) {}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"simulate", "stationary", "pullback", "equilibrium", "certify"};
  return names;
}

// ---------------------------------------------------------------------------------------------

namespace {

// Strict reader: every key must be consumed; type errors and unknown keys are collected.
class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<std::string>& issues)
      : j_(j), path_(std::move(path)), issues_(issues) {
    if (!j_.is_object()) issues_.push_back(path_ + ": expected an object");
  }
  ~Reader() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) issues_.push_back(path_ + "." + it.key() + ": unknown key");
  }

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  const json* get(const std::string& key) {
    if (!has(key)) return nullptr;
    used_.insert(key);
    return &j_.at(key);
  }
  std::string at(const std::string& key) const { return path_ + "." + key; }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (v->is_number())
        out = v->get<double>();
      else
        issues_.push_back(at(key) + ": expected a number");
    }
  }
  template <class I>
  void integer(const std::string& key, I& out) {
    if (const json* v = get(key)) {
      if (v->is_number_integer())
        out = v->get<I>();
      else
        issues_.push_back(at(key) + ": expected an integer");
    }
  }
  void string(const std::string& key, std::string& out, const std::vector<std::string>& allowed = {}) {
    if (const json* v = get(key)) {
      if (!v->is_string()) {
        issues_.push_back(at(key) + ": expected a string");
        return;
      }
      const auto s = v->get<std::string>();
      if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
        issues_.push_back(at(key) + ": '" + s + "' is not one of " + join(allowed));
        return;
      }
      out = s;
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (v->is_boolean())
        out = v->get<bool>();
      else
        issues_.push_back(at(key) + ": expected a boolean");
    }
  }
  void extended(const std::string& key, ExtendedReal& out) {
    if (const json* v = get(key)) {
      if (v->is_string() && v->get<std::string>() == "infinity") {
        out = ExtendedReal::infinity();
      } else if (v->is_number() && v->get<double>() >= 0.0 && std::isfinite(v->get<double>())) {
        out = ExtendedReal::finite(v->get<double>());
      } else {
        issues_.push_back(at(key) + ": expected a number >= 0 or \"infinity\"");
      }
    }
  }
  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) {
        issues_.push_back(at(key) + ": expected an array of numbers");
        return;
      }
      std::vector<double> r;
      for (const auto& x : *v) {
        if (!x.is_number()) {
          issues_.push_back(at(key) + ": expected an array of numbers");
          return;
        }
        r.push_back(x.get<double>());
      }
      out = r;
    }
  }
  std::vector<std::string>& issues() { return issues_; }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& issues_;
  std::set<std::string> used_;
};

void read_potential(Reader& parent, const std::string& key, PotentialSpec& p) {
  const json* j = parent.get(key);
  if (!j) return;
  Reader r(*j, parent.at(key), parent.issues());
  r.string("kind", p.kind, {"log", "quadratic"});
  r.number("theta", p.theta);
  r.number("theta_c", p.theta_c);
  r.number("c", p.c);
  r.number("curvature", p.curvature);
  r.number("field", p.field);
}

std::vector<std::string> envelope_names() {
  std::vector<std::string> v;
  for (auto k : {EnvelopeKind::Zero, EnvelopeKind::Constant, EnvelopeKind::WindowExponential,
                 EnvelopeKind::Exponential, EnvelopeKind::Bump})
    v.emplace_back(to_string(k));
  return v;
}

void read_config(const json& root, RunConfig& c, std::vector<std::string>& issues) {
  Reader r(root, "$", issues);
  r.get("preset");  // handled by the caller
  r.string("experiment", c.experiment, experiment_names());
  if (const json* g = r.get("geometry")) {
    Reader q(*g, "$.geometry", issues);
    q.number("radius", c.radius);
    q.integer("level", c.level);
  }
  if (const json* p = r.get("params")) {
    Reader q(*p, "$.params", issues);
    q.extended("K", c.params.K);
    q.extended("L", c.params.L);
    q.number("alpha", c.params.alpha);
    q.number("beta", c.params.beta);
    if (const json* m = q.get("m")) {
      if (m->is_number()) {
        c.params.mass_target = m->get<double>();
      } else if (m->is_array() && m->size() == 2 && (*m)[0].is_number() && (*m)[1].is_number()) {
        c.params.mass_target = MassPair{(*m)[0].get<double>(), (*m)[1].get<double>()};
      } else {
        issues.push_back("$.params.m: expected a number or a pair [m1, m2]");
      }
    }
  }
  if (const json* p = r.get("potential")) {
    Reader q(*p, "$.potential", issues);
    read_potential(q, "bulk", c.bulk);
    read_potential(q, "surface", c.surface);
  }
  if (const json* v = r.get("velocity")) {
    Reader q(*v, "$.velocity", issues);
    q.string("stream", c.velocity.stream, {"none", "rotation", "cellular", "rotation+cellular"});
    q.number("amplitude", c.velocity.amplitude);
    q.number("cellular_amplitude", c.velocity.cellular_amplitude);
    q.integer("mode", c.velocity.mode);
    q.number("surface_amplitude", c.velocity.surface_amplitude);
    q.boolean("surface_from_bulk", c.velocity.surface_from_bulk);
    if (const json* e = q.get("envelope")) {
      Reader w(*e, "$.velocity.envelope", issues);
      std::string kind = to_string(c.velocity.envelope.kind);
      w.string("kind", kind, envelope_names());
      c.velocity.envelope.kind = envelope_kind_from_string(kind);
      w.number("rate", c.velocity.envelope.rate);
      w.number("onset", c.velocity.envelope.onset);
      w.number("width", c.velocity.envelope.width);
      // default envelope min(1, exp(-2a (t - T_dec)))
      if (w.has("a") || w.has("t_dec")) {
        double a = 0.0, t_dec = 0.0;
        w.number("a", a);
        w.number("t_dec", t_dec);
        c.velocity.envelope = default_envelope(a, t_dec);
      }
    }
  }
  if (const json* s = r.get("scheme")) {
    Reader q(*s, "$.scheme", issues);
    q.number("dt", c.scheme.dt);
    q.number("newton_tol", c.scheme.newton_tol);
    q.integer("newton_max_iter", c.scheme.newton_max_iter);
    std::string mode = to_string(c.scheme.potential_mode);
    q.string("potential_mode", mode, {"yosida", "direct-log"});
    c.scheme.potential_mode = mode == "yosida" ? PotentialMode::Yosida : PotentialMode::DirectLog;
    q.number("lambda", c.scheme.lambda);
    std::string conv = to_string(c.scheme.convection);
    q.string("convection", conv, {"explicit", "semi-implicit"});
    c.scheme.convection = conv == "explicit" ? ConvectionTreatment::Explicit : ConvectionTreatment::SemiImplicit;
    q.integer("max_halvings", c.scheme.max_halvings);
  }
  if (const json* s = r.get("run")) {
    Reader q(*s, "$.run", issues);
    q.number("tau", c.run.tau);
    q.number("t_end", c.run.t_end);
    q.integer("record_every", c.run.record_every);
    q.integer("checkpoint_every", c.run.checkpoint_every);
  }
  if (const json* s = r.get("initial")) {
    Reader q(*s, "$.initial", issues);
    q.string("kind", c.initial.kind, {"random", "constant", "checkpoint"});
    q.number("bound", c.initial.bound);
    q.number("noise", c.initial.noise);
    q.string("path", c.initial.path);
  }
  if (const json* s = r.get("pullback")) {
    Reader q(*s, "$.pullback", issues);
    q.number("t_fixed", c.pullback.t_fixed);
    q.numbers("lags", c.pullback.lags);
    q.integer("set_size", c.pullback.set_size);
    q.number("velocity_offset", c.pullback.velocity_offset);
  }
  if (const json* s = r.get("equilibrium")) {
    Reader q(*s, "$.equilibrium", issues);
    q.number("d5_rate", c.equilibrium.d5_rate);
    q.number("energy_floor", c.equilibrium.energy_floor);
    q.number("cauchy_fraction", c.equilibrium.cauchy_fraction);
    q.number("increment_fraction", c.equilibrium.increment_fraction);
  }
  if (const json* s = r.get("stationary")) {
    Reader q(*s, "$.stationary", issues);
    q.number("tol", c.stationary.tol);
    q.integer("max_iter", c.stationary.max_iter);
  }
  if (const json* s = r.get("output")) {
    Reader q(*s, "$.output", issues);
    q.string("dir", c.out_dir);
  }
  r.integer("seed", c.seed);
  r.integer("threads", c.threads);
}

}  // namespace

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "default") return c;
  if (name == "spinodal") {
    // m = 0 is linearly unstable on this disk; the surface field selects a radial equilibrium
    c.experiment = "equilibrium";
    c.radius = 2.5;
    c.level = 4;
    c.surface.field = 1.0;
    c.velocity.stream = "cellular";
    c.velocity.amplitude = 1.0;
    c.velocity.mode = 1;
    c.velocity.surface_amplitude = 0.5;
    c.velocity.envelope = default_envelope(1.0, 1.0);
    c.scheme.dt = 0.05;
    c.run.t_end = 100.0;
    c.run.record_every = 4;
    c.initial.noise = 0.1;
    c.pullback.t_fixed = 4.0;
    return c;
  }
  throw ConfigError({"$.preset: unknown preset '" + name + "'"});
}

void validate_config(const RunConfig& c) {
  std::vector<std::string> issues;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) issues.push_back(msg);
  };
  check(c.radius > 0.0 && std::isfinite(c.radius), "$.geometry.radius: must be positive");
  check(c.level >= 0 && c.level <= 8, "$.geometry.level: must lie in [0, 8]");
  // continuum measures of the disk; the discrete ones are checked again when the problem is built
  const DomainGeometry geo{std::numbers::pi * c.radius * c.radius, 2.0 * std::numbers::pi * c.radius};
  try {
    c.params.validate(geo);
  } catch (const Error& e) {
    issues.push_back(std::string("$.params: ") + e.what());
  }
  for (const auto* p : {&c.bulk, &c.surface}) {
    try {
      p->build();
    } catch (const Error& e) {
      issues.push_back(std::string("$.potential: ") + e.what());
    }
  }
  try {
    c.scheme.validate();
  } catch (const Error& e) {
    issues.push_back(std::string("$.scheme: ") + e.what());
  }
  check(c.velocity.amplitude >= 0.0 && c.velocity.cellular_amplitude >= 0.0, "$.velocity: amplitudes must be >= 0");
  check(c.velocity.mode >= 1, "$.velocity.mode: must be >= 1");
  check(c.run.t_end >= c.run.tau, "$.run.t_end: must not precede tau");
  check(c.run.record_every >= 1, "$.run.record_every: must be >= 1");
  check(c.run.checkpoint_every >= 0, "$.run.checkpoint_every: must be >= 0");
  check(c.initial.bound > 0.0 && c.initial.bound <= 1.0, "$.initial.bound: must lie in (0, 1]");
  check(c.initial.noise >= 0.0, "$.initial.noise: must be >= 0");
  check(c.initial.kind != "checkpoint" || !c.initial.path.empty(), "$.initial.path: required for checkpoint data");
  check(c.pullback.set_size >= 1, "$.pullback.set_size: must be >= 1");
  bool lags_ok = !c.pullback.lags.empty();
  for (std::size_t k = 0; k < c.pullback.lags.size(); ++k)
    lags_ok = lags_ok && c.pullback.lags[k] > 0.0 && (k == 0 || c.pullback.lags[k] > c.pullback.lags[k - 1]);
  check(lags_ok, "$.pullback.lags: must be positive and increasing");
  check(c.stationary.tol > 0.0 && c.stationary.max_iter >= 0, "$.stationary: tol > 0 and max_iter >= 0 required");
  check(c.threads >= 1, "$.threads: must be >= 1");
  check(std::find(experiment_names().begin(), experiment_names().end(), c.experiment) != experiment_names().end(),
        "$.experiment: unknown experiment '" + c.experiment + "'");

  if (c.experiment == "equilibrium" && c.velocity.stream != "none" && issues.empty()) {
    // D5 only depends on the envelope; a coarse mesh gives the same verdict
    RunConfig coarse = c;
    coarse.level = 0;
    try {
      const auto p = build_problem(coarse);
      const auto v = c.velocity.build(*p);
      const double horizon = std::max(c.run.t_end, v.t_dec() - v.offset() + 1.0);
      const auto rep = check_D5(v, c.equilibrium.d5_rate, horizon);
      check(rep.satisfied(), "$.velocity.envelope: rule D5 violated (int e^{a s} ||(v,w)|| ds diverges or the "
                             "envelope is not non-increasing after T_dec)");
    } catch (const Error& e) {
      issues.push_back(std::string("$.velocity: ") + e.what());
    }
  }
  if (!issues.empty()) throw ConfigError(issues);
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("$: malformed JSON: ") + e.what()});
  }
  if (!root.is_object()) throw ConfigError({"$: expected an object"});
  RunConfig c;
  std::vector<std::string> issues;
  if (root.contains("preset")) {
    if (!root["preset"].is_string()) throw ConfigError({"$.preset: expected a string"});
    c = preset(root["preset"].get<std::string>());
  }
  try {
    read_config(root, c, issues);
  } catch (const Error& e) {
    issues.push_back(e.what());
  }
  if (!issues.empty()) throw ConfigError(issues);
  validate_config(c);
  return c;
}

namespace {

json extended_json(ExtendedReal r) { return r.is_infinite() ? json("infinity") : json(r.value()); }

json potential_json(const PotentialSpec& p) {
  return {{"kind", p.kind}, {"theta", p.theta}, {"theta_c", p.theta_c}, {"c", p.c},
          {"curvature", p.curvature}, {"field", p.field}};
}

}  // namespace

std::string to_json_text(const RunConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["geometry"] = {{"radius", c.radius}, {"level", c.level}};
  json m;
  if (const auto* pair = std::get_if<MassPair>(&c.params.mass_target))
    m = json::array({pair->bulk, pair->surface});
  else
    m = std::get<double>(c.params.mass_target);
  j["params"] = {{"K", extended_json(c.params.K)}, {"L", extended_json(c.params.L)}, {"alpha", c.params.alpha},
                 {"beta", c.params.beta}, {"m", m}};
  j["potential"] = {{"bulk", potential_json(c.bulk)}, {"surface", potential_json(c.surface)}};
  const auto& e = c.velocity.envelope;
  j["velocity"] = {{"stream", c.velocity.stream},
                   {"amplitude", c.velocity.amplitude},
                   {"cellular_amplitude", c.velocity.cellular_amplitude},
                   {"mode", c.velocity.mode},
                   {"surface_amplitude", c.velocity.surface_amplitude},
                   {"surface_from_bulk", c.velocity.surface_from_bulk},
                   {"envelope", {{"kind", to_string(e.kind)}, {"rate", e.rate}, {"onset", e.onset}, {"width", e.width}}}};
  j["scheme"] = {{"dt", c.scheme.dt},
                 {"newton_tol", c.scheme.newton_tol},
                 {"newton_max_iter", c.scheme.newton_max_iter},
                 {"potential_mode", to_string(c.scheme.potential_mode)},
                 {"lambda", c.scheme.lambda},
                 {"convection", to_string(c.scheme.convection)},
                 {"max_halvings", c.scheme.max_halvings}};
  j["run"] = {{"tau", c.run.tau}, {"t_end", c.run.t_end}, {"record_every", c.run.record_every},
              {"checkpoint_every", c.run.checkpoint_every}};
  j["initial"] = {{"kind", c.initial.kind}, {"bound", c.initial.bound}, {"noise", c.initial.noise}, {"path", c.initial.path}};
  j["pullback"] = {{"t_fixed", c.pullback.t_fixed}, {"lags", c.pullback.lags}, {"set_size", c.pullback.set_size},
                   {"velocity_offset", c.pullback.velocity_offset}};
  j["equilibrium"] = {{"d5_rate", c.equilibrium.d5_rate}, {"energy_floor", c.equilibrium.energy_floor},
                      {"cauchy_fraction", c.equilibrium.cauchy_fraction},
                      {"increment_fraction", c.equilibrium.increment_fraction}};
  j["stationary"] = {{"tol", c.stationary.tol}, {"max_iter", c.stationary.max_iter}};
  j["output"] = {{"dir", c.out_dir}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

std::uint64_t config_hash(const RunConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : to_json_text(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::unique_ptr<Problem> build_problem(const RunConfig& cfg) {
  return std::make_unique<Problem>(build_disk_mesh(cfg.radius, cfg.level), cfg.params, cfg.bulk.build(),
                                   cfg.surface.build());
}

BulkSurfaceField mass_state(const Problem& problem) {
  auto base = BulkSurfaceField::zeros(problem.num_bulk(), problem.num_surface());
  project_mass(base, problem.params(), problem.ops());
  return base;
}

BulkSurfaceField random_initial(const Problem& problem, double bound, double noise, std::uint64_t seed) {
  const auto& params = problem.params();
  const auto base = mass_state(problem);
  if (!(base.max_abs() < bound))
    throw Error(ErrorKind::InvalidParameter, "initial data: the mass target does not fit inside the bound");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto xi = BulkSurfaceField::zeros(problem.num_bulk(), problem.num_surface());
  for (int i = 0; i < xi.bulk.size(); ++i) xi.bulk[i] = u(rng);
  for (int i = 0; i < xi.surface.size(); ++i) xi.surface[i] = u(rng);
  if (params.K.is_zero()) {
    const auto& sn = problem.mesh().surface_nodes();
    for (std::size_t j = 0; j < sn.size(); ++j) xi.bulk[sn[j]] = params.alpha * xi.surface[j];
  }
  SystemParams zero = params;
  if (params.L.is_infinite())
    zero.mass_target = MassPair{0.0, 0.0};
  else
    zero.mass_target = 0.0;
  project_mass(xi, zero, problem.ops());

  // largest scale <= noise keeping every value inside the bound
  double scale = noise;
  auto limit = [&](const Vector& b, const Vector& x) {
    for (int i = 0; i < b.size(); ++i)
      if (x[i] != 0.0) scale = std::min(scale, (bound - std::abs(b[i])) / std::abs(x[i]));
  };
  limit(base.bulk, xi.bulk);
  limit(base.surface, xi.surface);
  return base + scale * xi;
}

BulkSurfaceField initial_field(const Problem& problem, const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.initial.kind == "random") return random_initial(problem, cfg.initial.bound, cfg.initial.noise, seed);
  if (cfg.initial.kind == "constant") return mass_state(problem);
  if (cfg.initial.kind == "checkpoint") {
    std::ifstream is(cfg.initial.path);
    if (!is) throw Error(ErrorKind::Io, "cannot open checkpoint " + cfg.initial.path);
    auto s = load_checkpoint(is);
    problem.ops().check_dims(s.phi);
    return s.phi;
  }
  throw Error(ErrorKind::Config, "unknown initial kind '" + cfg.initial.kind + "'");
}

}  // namespace bscch
