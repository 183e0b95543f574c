#include "bscch/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "bscch/errors.hpp"
#include "bscch/mass.hpp"

namespace bscch {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorKind::InvalidParameter, std::string(what) + " must be finite");
}

}  // namespace

double uniform_gronwall_bound(double a1, double a2, double a3, double r) {
  require_finite(a1, "a1");
  require_finite(a2, "a2");
  require_finite(a3, "a3");
  require_finite(r, "r");
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidParameter, "uniform Gronwall bound: r must be positive");
  return (a3 / r + a2) * std::exp(a1);
}

double decay_gronwall_Q(double gamma, double A1, double A2) {
  require_finite(gamma, "gamma");
  require_finite(A1, "A1");
  require_finite(A2, "A2");
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidParameter, "decay Gronwall constant: gamma must be positive");
  if (A1 < 0.0 || A2 < 0.0) throw Error(ErrorKind::InvalidParameter, "decay Gronwall constant: A1, A2 must be >= 0");
  const double c1 = std::exp(0.5 * gamma) / -std::expm1(-0.5 * gamma) * A1;
  return c1 * c1 + 2.0 * std::exp(gamma) / -std::expm1(-gamma) * A2;
}

// ---------------------------------------------------------------------------------------------

const std::vector<std::string>& TimeSeries::schema() {
  static const std::vector<std::string> cols = {
      "t",           "step",          "energy",       "bulk_dirichlet", "bulk_potential",
      "surface_dirichlet", "surface_potential", "k_penalty", "mass",      "mass_surface",
      "mu_norm",     "rate_dual",     "velocity_norm", "envelope",      "max_abs",
      "margin",      "cum_dissipation", "cum_work",    "newton"};
  return cols;
}

TimeSeries TimeSeries::from_record(const TrajectoryRecord& record) {
  TimeSeries ts;
  ts.columns = schema();
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& s : record.samples) {
    if (!(s.time > last)) throw Error(ErrorKind::InvalidParameter, "time series: times must be strictly increasing");
    last = s.time;
    double m0 = 0.0, m1 = std::numeric_limits<double>::quiet_NaN();
    if (const auto* pair = std::get_if<MassPair>(&s.mass)) {
      m0 = pair->bulk;
      m1 = pair->surface;
    } else {
      m0 = std::get<double>(s.mass);
    }
    const auto& e = s.energy;
    ts.rows.push_back({s.time, static_cast<double>(s.step), e.total, e.bulk_dirichlet, e.bulk_potential,
                       e.surface_dirichlet, e.surface_potential, e.k_penalty, m0, m1, s.mu_norm, s.rate_dual,
                       s.velocity_norm, s.envelope, s.max_abs, 1.0 - s.max_abs, s.cum_dissipation, s.cum_work,
                       static_cast<double>(s.newton_iterations)});
  }
  return ts;
}

void TimeSeries::write_csv(std::ostream& os) const {
  for (std::size_t j = 0; j < columns.size(); ++j) os << (j ? "," : "") << columns[j];
  os << '\n';
  char buf[64];
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", row[j]);
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
}

std::vector<double> TimeSeries::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw Error(ErrorKind::InvalidParameter, "time series: no column " + name);
  const auto j = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

double energy_residual_positive_part(const TrajectoryRecord& record) {
  // R(s, t) = A(t) - A(s) with A(k) = R(0, k)
  double lowest = std::numeric_limits<double>::infinity(), sup = 0.0;
  for (std::size_t k = 0; k < record.samples.size(); ++k) {
    const double a = energy_inequality_residual(record, 0, k);
    lowest = std::min(lowest, a);
    sup = std::max(sup, a - lowest);
  }
  return sup;
}

SeparationReport separation_monitor(const TrajectoryRecord& record, double floor) {
  SeparationReport rep;
  rep.floor = floor;
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& s : record.samples) {
    rep.times.push_back(s.time);
    rep.margins.push_back(1.0 - s.max_abs);
    rep.min_margin = std::min(rep.min_margin, 1.0 - s.max_abs);
  }
  if (rep.margins.empty()) return rep;
  rep.terminal_margin = rep.margins.back();
  std::size_t k = rep.margins.size();
  while (k > 0 && rep.margins[k - 1] >= floor) --k;
  if (k < rep.margins.size()) rep.t_s = rep.times[k];
  return rep;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  threads = std::clamp(threads, 1, n);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------------------------

namespace {

struct ExpFit {
  double a = 0.0, rate = 0.0, b = 0.0, rms = 0.0;
};

// y = a exp(-rate s) + b: linear least squares in (a, b) for fixed rate, Brent on the rate
double linear_part(const std::vector<double>& s, const std::vector<double>& y, double rate, double& a, double& b) {
  const std::size_t n = s.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::exp(-rate * s[i]);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  const double det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-300) {
    a = 0.0;
    b = sy / n;
  } else {
    a = (n * sxy - sx * sy) / det;
    b = (sy - a * sx) / n;
  }
  double r = 0.0;
  for (std::size_t i = 0; i < n; ++i) r += std::pow(a * std::exp(-rate * s[i]) + b - y[i], 2);
  return r;
}

ExpFit fit_exponential(const std::vector<double>& s, const std::vector<double>& y) {
  ExpFit best;
  double a, b;
  double best_r = std::numeric_limits<double>::infinity();
  double best_rate = 0.0;
  // log grid then Brent around the best grid point
  const int n = 240;
  const double lo = std::log(1e-3), hi = std::log(20.0);
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = std::exp(lo + (hi - lo) * i / (n - 1));
  int bi = 0;
  for (int i = 0; i < n; ++i) {
    const double r = linear_part(s, y, grid[i], a, b);
    if (r < best_r) {
      best_r = r;
      bi = i;
    }
  }
  const double left = grid[std::max(bi - 1, 0)], right = grid[std::min(bi + 1, n - 1)];
  auto f = [&](double rate) { return linear_part(s, y, rate, a, b); };
  const auto res = boost::math::tools::brent_find_minima(f, left, right, 50);
  best_rate = res.second <= best_r ? res.first : grid[bi];
  best.rms = std::sqrt(linear_part(s, y, best_rate, a, b) / s.size());
  best.a = a;
  best.b = b;
  best.rate = best_rate;
  return best;
}

void check_set(const Problem& problem, const std::vector<BulkSurfaceField>& set) {
  if (set.empty()) throw Error(ErrorKind::InvalidParameter, "pullback: bounded set is empty");
  for (const auto& x : set) check_initial(problem, x, false);
}

}  // namespace

PullbackResult pullback_experiment(const Problem& problem, const SchemeConfig& cfg, const VelocityPair& velocity,
                                   const std::vector<BulkSurfaceField>& bounded_set, const PullbackOptions& opts) {
  check_set(problem, bounded_set);
  if (opts.tau_list.empty()) throw Error(ErrorKind::InvalidParameter, "pullback: empty tau list");
  for (std::size_t k = 0; k < opts.tau_list.size(); ++k) {
    if (!(opts.tau_list[k] < opts.t_fixed)) throw Error(ErrorKind::InvalidParameter, "pullback: tau must precede t_fixed");
    if (k > 0 && !(opts.tau_list[k] < opts.tau_list[k - 1]))
      throw Error(ErrorKind::InvalidParameter, "pullback: tau list must be decreasing");
  }
  const VelocityPair vel = velocity.shifted(opts.velocity_offset);
  const int nt = static_cast<int>(opts.tau_list.size());
  const int nx = static_cast<int>(bounded_set.size());
  std::vector<BulkSurfaceField> finals(static_cast<std::size_t>(nt * nx));
  parallel_for(nt * nx, opts.threads, [&](int job) {
    const int k = job / nx, i = job % nx;
    TimeStepper ts(problem, cfg, vel);
    RunOptions ro;
    ro.record_every = std::numeric_limits<int>::max();
    ro.rate_norm = false;
    finals[job] = run(ts, bounded_set[i], opts.tau_list[k], opts.t_fixed, ro).final_state.phi;
  });

  PullbackResult out;
  const auto& ops = problem.ops();
  for (int k = 0; k < nt; ++k) {
    PullbackRow row;
    row.tau = opts.tau_list[k];
    for (int i = 0; i < nx; ++i) {
      const auto& u = finals[k * nx + i];
      row.h1.push_back(ops.h1_norm(u));
      for (int j = 0; j < i; ++j) row.spread = std::max(row.spread, ops.h1_norm(u - finals[k * nx + j]));
    }
    row.max_h1 = *std::max_element(row.h1.begin(), row.h1.end());
    out.rows.push_back(std::move(row));
  }

  if (nt >= 3) {
    std::vector<double> s, y;
    for (const auto& r : out.rows) {
      s.push_back(opts.t_fixed - r.tau);
      y.push_back(r.max_h1 * r.max_h1);
    }
    const auto fit = fit_exponential(s, y);
    out.amplitude = fit.a;
    out.rate = fit.rate;
    out.plateau = fit.b;
    out.fit_rms = fit.rms;
    out.fit_ok = std::isfinite(fit.rate) && std::isfinite(fit.rms);
    const double scale = std::max(1.0, std::abs(fit.b));
    out.monotone = true;
    for (int k = 1; k < nt; ++k)
      if (std::abs(y[k] - fit.b) > std::abs(y[k - 1] - fit.b) + 1e-12 * scale) out.monotone = false;
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

ExponentFit fit_lojasiewicz_exponent(const std::vector<double>& energy_gap, const std::vector<double>& mu_norm) {
  if (energy_gap.size() != mu_norm.size()) throw Error(ErrorKind::DimensionMismatch, "exponent fit: size mismatch");
  ExponentFit fit;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < energy_gap.size(); ++i) {
    if (energy_gap[i] > 0.0 && mu_norm[i] > 0.0) {
      x.push_back(std::log(mu_norm[i]));
      y.push_back(std::log(energy_gap[i]));
    }
  }
  fit.points = static_cast<int>(x.size());
  if (fit.points < 3) return fit;
  const double n = fit.points;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return fit;
  fit.skipped = false;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.varpi = 1.0 - 1.0 / fit.slope;
  fit.r2 = sxy * sxy / (sxx * syy);
  return fit;
}

EquilibriumReport equilibrium_experiment(const Problem& problem, const SchemeConfig& cfg, const VelocityPair& velocity,
                                         const BulkSurfaceField& initial, const EquilibriumOptions& opts) {
  if (!(opts.t_end > opts.tau)) throw Error(ErrorKind::InvalidParameter, "equilibrium: t_end must exceed tau");
  EquilibriumReport rep;
  rep.d5 = check_D5(velocity, opts.d5_rate, opts.t_end);
  if (!rep.d5.satisfied())
    throw Error(ErrorKind::InvalidParameter,
                "equilibrium: velocity violates rule D5 (int e^{a s} ||(v,w)|| ds must be finite with a "
                "non-increasing envelope)");

  TimeStepper ts(problem, cfg, velocity);
  RunOptions ro;
  ro.record_every = opts.record_every;
  ro.keep_states = true;
  ro.rate_norm = false;
  rep.record = run(ts, initial, opts.tau, opts.t_end, ro);
  const auto& smp = rep.record.samples;
  const auto& states = rep.record.states;
  const std::size_t n = smp.size();
  const double span = opts.t_end - opts.tau;

  // energy limit and Cauchy window
  const double w0 = opts.t_end - opts.cauchy_fraction * span;
  double emin = std::numeric_limits<double>::infinity(), emax = -emin, esum = 0.0;
  int count = 0;
  for (const auto& s : smp)
    if (s.time >= w0) {
      emin = std::min(emin, s.energy.total);
      emax = std::max(emax, s.energy.total);
      esum += s.energy.total;
      ++count;
    }
  rep.e_star_window = esum / count;
  rep.cauchy = emax - emin;

  std::size_t k = n - 1;
  while (k > 0 && smp[k].energy.total <= smp[k - 1].energy.total + 1e-10) --k;
  rep.monotone_from = smp[k].time;

  // H1 increments against the terminal state
  const auto& ops = problem.ops();
  const auto& last = rep.record.final_state.phi;
  const double i0 = opts.t_end - opts.increment_fraction * span;
  for (std::size_t i = 0; i < n; ++i)
    if (smp[i].time >= i0) {
      rep.increment_times.push_back(smp[i].time);
      rep.increments.push_back(ops.h1_norm(states[i].phi - last));
      rep.max_increment = std::max(rep.max_increment, rep.increments.back());
    }
  rep.terminal_margin = 1.0 - last.max_abs();

  rep.refined = newton_solve(problem, last, opts.newton);
  rep.e_star = energy(problem, rep.refined.phi).total;

  // exponent fit over the tail
  double t_tail = *rep.monotone_from;
  if (opts.tail_start) {
    t_tail = *opts.tail_start;
  } else {
    for (const auto& s : smp)
      if (s.time >= t_tail && s.envelope <= 1e-6) {
        t_tail = s.time;
        break;
      }
  }
  const double floor = opts.energy_floor * std::max(1.0, std::abs(rep.e_star));
  std::vector<double> gap, mu;
  for (const auto& s : smp) {
    if (s.time < t_tail || s.step == 0) continue;
    const double g = s.energy.total - rep.e_star;
    if (s.mu_norm < 10.0 * cfg.newton_tol || g < floor) continue;
    gap.push_back(g);
    mu.push_back(s.mu_norm);
  }
  rep.fit = fit_lojasiewicz_exponent(gap, mu);
  return rep;
}

// ---------------------------------------------------------------------------------------------

double velocity_distance(const FemOperators& ops, const VelocitySample& a, const VelocitySample& b) {
  double s = 0.0;
  const std::size_t nt = ops.tri_area.size();
  for (std::size_t t = 0; t < nt; ++t) {
    const Eigen::Vector2d va = a.zero ? Eigen::Vector2d::Zero() : a.bulk[t];
    const Eigen::Vector2d vb = b.zero ? Eigen::Vector2d::Zero() : b.bulk[t];
    s += ops.tri_area[t] * (va - vb).squaredNorm();
  }
  for (std::size_t e = 0; e < ops.edge_length.size(); ++e) {
    const double wa = a.zero ? 0.0 : a.surface[e];
    const double wb = b.zero ? 0.0 : b.surface[e];
    s += ops.edge_length[e] * (wa - wb) * (wa - wb);
  }
  return std::sqrt(s);
}

DependenceReport velocity_dependence(const Problem& problem, const SchemeConfig& cfg,
                                     const std::function<VelocityPair(double)>& velocity,
                                     const BulkSurfaceField& initial, const DependenceOptions& opts) {
  if (opts.eps.empty()) throw Error(ErrorKind::InvalidParameter, "dependence: empty eps list");
  if (!(opts.t_end > opts.tau)) throw Error(ErrorKind::InvalidParameter, "dependence: t_end must exceed tau");
  const int ne = static_cast<int>(opts.eps.size());
  std::vector<VelocityPair> pairs;
  pairs.push_back(velocity(0.0));
  for (double e : opts.eps) pairs.push_back(velocity(e));
  std::vector<BulkSurfaceField> finals(static_cast<std::size_t>(ne + 1));
  parallel_for(ne + 1, opts.threads, [&](int i) {
    TimeStepper ts(problem, cfg, pairs[i]);
    RunOptions ro;
    ro.record_every = std::numeric_limits<int>::max();
    ro.rate_norm = false;
    finals[i] = run(ts, initial, opts.tau, opts.t_end, ro).final_state.phi;
  });

  DependenceReport rep;
  const auto& ops = problem.ops();
  for (int i = 0; i < ne; ++i) {
    const auto& pe = pairs[i + 1];
    auto dist2 = [&](double t) { return std::pow(velocity_distance(ops, pe.sample(t), pairs[0].sample(t)), 2); };
    const double forcing =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(dist2, opts.tau, opts.t_end, 8, 1e-10);
    const double d = problem.l_solver().dual_norm(finals[i + 1] - finals[0]);
    rep.eps.push_back(opts.eps[i]);
    rep.diff_sq.push_back(d * d);
    rep.forcing.push_back(forcing);
    rep.constant.push_back(forcing > 0.0 ? d * d / forcing : std::numeric_limits<double>::quiet_NaN());
  }
  for (int i = 0; i + 1 < ne; ++i) rep.ratios.push_back(rep.constant[i] / rep.constant[i + 1]);
  return rep;
}

}  // namespace bscch
