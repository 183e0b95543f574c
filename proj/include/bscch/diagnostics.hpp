#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bscch/stationary.hpp"
#include "bscch/timestepper.hpp"

namespace bscch {

/// (a3/r + a2) e^{a1}. Throws InvalidParameter for r <= 0 or non-finite input.
double uniform_gronwall_bound(double a1, double a2, double a3, double r);

/// (e^{g/2} / (1 - e^{-g/2}) A1)^2 + 2 e^g / (1 - e^{-g}) A2. Throws InvalidParameter for
/// gamma <= 0 or negative A1, A2.
double decay_gronwall_Q(double gamma, double A1, double A2);

/// Per-sample scalars of a trajectory. Times are strictly increasing.
struct TimeSeries {
  static constexpr int kSchemaVersion = 1;
  std::vector<std::string> columns;   // first column is "t"
  std::vector<std::vector<double>> rows;

  static const std::vector<std::string>& schema();
  /// Throws InvalidParameter when times are not strictly increasing.
  static TimeSeries from_record(const TrajectoryRecord& record);
  /// Header line then one row per sample, values in %.17g.
  void write_csv(std::ostream& os) const;
  std::vector<double> column(const std::string& name) const;
};

/// max over recorded samples s < t of max(0, energy_inequality_residual(s, t)).
double energy_residual_positive_part(const TrajectoryRecord& record);

struct SeparationReport {
  std::vector<double> times;
  std::vector<double> margins;  // 1 - max nodal |phi|, |psi|
  double floor = 0.0;
  /// First sample time from which the margin stays >= floor; empty if the last sample is below.
  std::optional<double> t_s;
  double min_margin = 0.0;
  double terminal_margin = 0.0;
};

SeparationReport separation_monitor(const TrajectoryRecord& record, double floor);

/// Runs fn(0..n-1) on up to `threads` workers. Exceptions are rethrown (lowest index first).
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// ---------------------------------------------------------------------------------------------

struct PullbackOptions {
  std::vector<double> tau_list;  // decreasing, all < t_fixed
  double t_fixed = 0.0;
  /// The velocity is evaluated at t + offset.
  double velocity_offset = 0.0;
  int threads = 1;
};

struct PullbackRow {
  double tau = 0.0;
  std::vector<double> h1;  // per initial field, at t_fixed
  double max_h1 = 0.0;
  double spread = 0.0;     // max pairwise H1 distance at t_fixed
};

struct PullbackResult {
  std::vector<PullbackRow> rows;
  /// Least-squares fit of max_h1^2 = A exp(-rate (t_fixed - tau)) + B.
  double amplitude = 0.0;
  double rate = 0.0;
  double plateau = 0.0;
  double fit_rms = 0.0;
  bool fit_ok = false;
  /// |max_h1^2 - plateau| non-increasing as tau decreases.
  bool monotone = false;
};

PullbackResult pullback_experiment(const Problem& problem, const SchemeConfig& cfg,
                                   const VelocityPair& velocity,
                                   const std::vector<BulkSurfaceField>& bounded_set,
                                   const PullbackOptions& opts);

// ---------------------------------------------------------------------------------------------

struct EquilibriumOptions {
  double tau = 0.0;
  double t_end = 100.0;
  /// Rate a in the D5 condition int e^{a s} ||(v, w)|| ds < inf.
  double d5_rate = 1.0;
  int record_every = 1;
  double cauchy_fraction = 0.05;     // E* window
  double increment_fraction = 0.10;  // H1 increment window
  /// Samples before this time are excluded from the exponent fit (default: once E is monotone
  /// and the velocity envelope is below 1e-6).
  std::optional<double> tail_start;
  /// Relative energy floor below which |E - E*| is treated as rounding.
  double energy_floor = 1e-13;
  StationaryOptions newton;
};

struct ExponentFit {
  bool skipped = true;
  int points = 0;
  double slope = 0.0;    // 1 / (1 - varpi)
  double varpi = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  bool in_band() const { return !skipped && varpi > 0.0 && varpi < 0.5; }
};

/// Log-log least squares of |E - E*| against mu_norm over the given samples.
ExponentFit fit_lojasiewicz_exponent(const std::vector<double>& energy_gap, const std::vector<double>& mu_norm);

struct EquilibriumReport {
  D5Report d5;
  TrajectoryRecord record;
  double e_star_window = 0.0;  // mean E over the final window
  double cauchy = 0.0;         // max |E_i - E_j| over the final window
  std::optional<double> monotone_from;  // E non-increasing (to 1e-10) from this time on
  double max_increment = 0.0;  // max ||phi(t) - phi(t_end)||_H1 over the final increment window
  std::vector<double> increment_times, increments;
  StationarySolution refined;
  double e_star = 0.0;          // energy of the refined state
  double terminal_margin = 0.0; // 1 - max |phi(t_end)|
  ExponentFit fit;
};

/// Throws InvalidParameter naming D5 when the velocity does not satisfy the decay condition.
EquilibriumReport equilibrium_experiment(const Problem& problem, const SchemeConfig& cfg,
                                         const VelocityPair& velocity, const BulkSurfaceField& initial,
                                         const EquilibriumOptions& opts);

// ---------------------------------------------------------------------------------------------

/// ||v_a(t) - v_b(t)||_{L2(Omega)} and ||w_a(t) - w_b(t)||_{L2(Gamma)} combined.
double velocity_distance(const FemOperators& ops, const VelocitySample& a, const VelocitySample& b);

struct DependenceOptions {
  double tau = 0.0;
  double t_end = 1.0;
  std::vector<double> eps = {0.1, 0.05};
  int threads = 1;
};

struct DependenceReport {
  std::vector<double> eps;
  std::vector<double> diff_sq;   // ||phi_eps(T) - phi_0(T)||^2_{L,beta,*}
  std::vector<double> forcing;   // int ||v_eps - v_0||^2 dt
  std::vector<double> constant;  // diff_sq / forcing
  /// constant[i] / constant[i+1] for consecutive entries.
  std::vector<double> ratios;
};

/// Runs the family velocity(eps) from the same data; velocity(0) is the reference.
DependenceReport velocity_dependence(const Problem& problem, const SchemeConfig& cfg,
                                     const std::function<VelocityPair(double)>& velocity,
                                     const BulkSurfaceField& initial, const DependenceOptions& opts);

}  // namespace bscch
