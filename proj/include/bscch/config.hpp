#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bscch/errors.hpp"
#include "bscch/params.hpp"
#include "bscch/potentials.hpp"
#include "bscch/timestepper.hpp"
#include "bscch/velocity.hpp"

namespace bscch {

/// W = log entropy (theta) - theta_c s^2/2 - field s, or c s^2/2 + curvature s^2/2 - field s.
struct PotentialSpec {
  std::string kind = "log";  // log | quadratic
  double theta = 1.0;
  double theta_c = 2.0;
  double c = 1.0;
  double curvature = 0.0;
  double field = 0.0;
  SplitPotential build() const;
};

struct VelocitySpec {
  std::string stream = "none";  // none | rotation | cellular | rotation+cellular
  double amplitude = 0.0;
  double cellular_amplitude = 0.0;  // for rotation+cellular
  int mode = 1;                     // cellular wave number
  double surface_amplitude = 0.0;
  /// Surface velocity from the bulk trace; forced on for K = 0.
  bool surface_from_bulk = false;
  Envelope envelope{EnvelopeKind::Constant, 0.0, 0.0, 1.0};
  VelocityPair build(const Problem& problem) const;
};

struct InitialSpec {
  std::string kind = "random";  // random | constant | checkpoint
  double bound = 0.9;           // |values| <= bound
  double noise = 0.9;           // noise amplitude before clamping
  std::string path;             // checkpoint file
};

struct RunSpec {
  double tau = 0.0;
  double t_end = 1.0;
  int record_every = 1;
  long checkpoint_every = 0;  // 0: final checkpoint only
};

struct PullbackSpec {
  double t_fixed = 4.0;
  std::vector<double> lags = {4.0, 8.0, 16.0, 32.0};
  int set_size = 5;
  double velocity_offset = 0.0;
};

struct EquilibriumSpec {
  double d5_rate = 1.0;
  double energy_floor = 1e-13;
  double cauchy_fraction = 0.05;
  double increment_fraction = 0.10;
};

struct StationarySpec {
  double tol = 1e-10;
  int max_iter = 50;
};

struct RunConfig {
  std::string experiment = "simulate";  // simulate | stationary | pullback | equilibrium | certify
  double radius = 1.0;
  int level = 3;
  SystemParams params;
  PotentialSpec bulk, surface;
  VelocitySpec velocity;
  SchemeConfig scheme;
  RunSpec run;
  InitialSpec initial;
  PullbackSpec pullback;
  EquilibriumSpec equilibrium;
  StationarySpec stationary;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  RunConfig();
};

/// Schema errors with JSON paths, e.g. "$.params.Kx: unknown key".
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

const std::vector<std::string>& experiment_names();

/// Strict JSON: unknown keys, wrong types and A2/D1/D5 violations are rejected. A top-level
/// "preset" key starts from that preset instead of the defaults.
RunConfig parse_config(const std::string& text);
/// Preset by name: "default" or "spinodal".
RunConfig preset(const std::string& name);
/// Checks the config as parse_config does; throws ConfigError.
void validate_config(const RunConfig& cfg);

/// Canonical JSON (sorted keys, every field present). parse_config(to_json_text(c)) == c.
std::string to_json_text(const RunConfig& cfg);
/// FNV-1a 64 of the canonical JSON.
std::uint64_t config_hash(const RunConfig& cfg);

std::unique_ptr<Problem> build_problem(const RunConfig& cfg);

/// Noise around the constant state with the target mass: zero-mean noise (trace-preserving for
/// K = 0) scaled so that |values| <= bound. Deterministic in the seed.
BulkSurfaceField random_initial(const Problem& problem, double bound, double noise, std::uint64_t seed);
/// Constant (or, for K = 0 with L = inf, piecewise constant) state with the target mass.
BulkSurfaceField mass_state(const Problem& problem);
/// Initial data per the config's InitialSpec.
BulkSurfaceField initial_field(const Problem& problem, const RunConfig& cfg, std::uint64_t seed);

}  // namespace bscch
