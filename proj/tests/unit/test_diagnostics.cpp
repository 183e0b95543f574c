#include <cmath>
#include <random>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "doctest.h"

#include "bscch/diagnostics.hpp"
#include "bscch/errors.hpp"
#include "bscch/mass.hpp"

using namespace bscch;

namespace {

const ExtendedReal kOne = ExtendedReal::finite(1.0);
const ExtendedReal kInf = ExtendedReal::infinity();

std::unique_ptr<Problem> make_problem(ExtendedReal K, ExtendedReal L, int level, double m, double alpha = 1.0) {
  SystemParams p;
  p.K = K;
  p.L = L;
  p.alpha = alpha;
  if (L.is_infinite())
    p.mass_target = MassPair{m, m};
  else
    p.mass_target = m;
  return std::make_unique<Problem>(build_disk_mesh(1.0, level), p, make_log_potential(1.0, 2.0),
                                   make_log_potential(1.0, 2.0));
}

BulkSurfaceField noisy(const Problem& p, double c, double eps, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto f = BulkSurfaceField::constant(p.num_bulk(), p.num_surface(), c, c);
  for (int i = 0; i < f.bulk.size(); ++i) f.bulk[i] += eps * u(rng);
  for (int i = 0; i < f.surface.size(); ++i) f.surface[i] += eps * u(rng);
  project_mass(f, p.params(), p.ops());
  return f;
}

// dense RK4 trajectory of a scalar ODE on a uniform grid
template <class Rhs>
std::vector<double> rk4(Rhs rhs, double y0, double t0, double t1, int n) {
  using namespace boost::numeric::odeint;
  runge_kutta4<double> stepper;
  std::vector<double> y(n + 1);
  y[0] = y0;
  double x = y0;
  const double h = (t1 - t0) / n;
  for (int i = 0; i < n; ++i) {
    stepper.do_step(rhs, x, t0 + i * h, h);
    y[i + 1] = x;
  }
  return y;
}

// trapezoid integral of samples f over [i, j] on a grid of width h
double window(const std::vector<double>& f, int i, int j, double h) {
  double s = 0.0;
  for (int k = i; k < j; ++k) s += 0.5 * h * (f[k] + f[k + 1]);
  return s;
}

}  // namespace

TEST_CASE("uniform Gronwall bound arithmetic") {
  CHECK(uniform_gronwall_bound(0.0, 0.0, 0.7, 0.7) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(uniform_gronwall_bound(std::log(2.0), 1.0, 1.0, 1.0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK_THROWS_AS(uniform_gronwall_bound(1.0, 1.0, 1.0, 0.0), Error);
  CHECK_THROWS_AS(uniform_gronwall_bound(1.0, 1.0, 1.0, -1.0), Error);
}

TEST_CASE("uniform Gronwall bound holds for an RK4 solution") {
  // y' = -2y + g y + h <= g y + h with g, h >= 0
  auto g = [](double t) { return 0.5 * (1.0 + std::sin(t)); };
  auto h = [](double t) { return 0.5 * (1.0 + std::cos(3.0 * t)); };
  const double T = 12.0, r = 1.0;
  const int n = 12000;
  const double dt = T / n;
  const auto y = rk4([&](const double& x, double& dxdt, double t) { dxdt = (-2.0 + g(t)) * x + h(t); }, 3.0, 0.0, T, n);
  std::vector<double> gs(n + 1), hs(n + 1);
  for (int i = 0; i <= n; ++i) {
    gs[i] = g(i * dt);
    hs[i] = h(i * dt);
  }
  const int w = static_cast<int>(std::lround(r / dt));
  double a1 = 0, a2 = 0, a3 = 0;
  for (int i = 0; i + w <= n; ++i) {
    a1 = std::max(a1, window(gs, i, i + w, dt));
    a2 = std::max(a2, window(hs, i, i + w, dt));
    a3 = std::max(a3, window(y, i, i + w, dt));
  }
  const double bound = uniform_gronwall_bound(a1, a2, a3, r);
  for (int i = 0; i + w <= n; ++i) {
    CHECK(y[i + w] <= bound);
    // same bound with window-specific constants
    const double local = uniform_gronwall_bound(window(gs, i, i + w, dt), window(hs, i, i + w, dt),
                                                window(y, i, i + w, dt), r);
    CHECK(y[i + w] <= local * (1.0 + 1e-9));
  }
}

TEST_CASE("decay Gronwall constant") {
  CHECK(decay_gronwall_Q(1.0, 0.0, 0.0) == 0.0);
  const double e = std::exp(0.5) / (1.0 - std::exp(-0.5));
  CHECK(std::abs(decay_gronwall_Q(1.0, 1.0, 0.0) - e * e) <= 1e-12);
  CHECK(std::abs(decay_gronwall_Q(1.0, 1.0, 0.0) - 17.56) <= 0.01);
  CHECK(std::abs(decay_gronwall_Q(1.0, 0.0, 1.0) - 2.0 * std::exp(1.0) / (1.0 - std::exp(-1.0))) <= 1e-12);
  CHECK_THROWS_AS(decay_gronwall_Q(0.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(decay_gronwall_Q(-1.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(decay_gronwall_Q(1.0, -1.0, 1.0), Error);
}

TEST_CASE("decay Gronwall bound holds for an RK4 solution") {
  for (double gamma : {0.5, 1.0, 3.0}) {
    CAPTURE(gamma);
    auto g = [](double t) { return 1.0 + std::sin(2.0 * t); };
    auto h = [](double t) { return 0.5 * (1.0 + std::cos(t)); };
    const double T = 25.0, y0 = 5.0;
    const int n = 25000;
    const double dt = T / n;
    const auto y = rk4([&](const double& x, double& dxdt, double t) { dxdt = -gamma * x + g(t) * std::sqrt(std::max(x, 0.0)) + h(t); },
                       y0, 0.0, T, n);
    std::vector<double> gs(n + 1), hs(n + 1);
    for (int i = 0; i <= n; ++i) {
      gs[i] = g(i * dt);
      hs[i] = h(i * dt);
    }
    const int w = static_cast<int>(std::lround(1.0 / dt));
    double A1 = 0, A2 = 0;
    for (int i = 0; i + w <= n; ++i) {
      A1 = std::max(A1, window(gs, i, i + w, dt));
      A2 = std::max(A2, window(hs, i, i + w, dt));
    }
    const double Q = decay_gronwall_Q(gamma, A1, A2);
    for (int i = 0; i <= n; ++i) CHECK(y[i] <= 2.0 * y0 * std::exp(-gamma * i * dt) + Q);
  }
}

TEST_CASE("energy breakdown") {
  auto p = make_problem(kOne, kOne, 3, 0.0);
  const auto zero = BulkSurfaceField::zeros(p->num_bulk(), p->num_surface());
  CHECK(energy(*p, zero).total == 0.0);

  // constants (alpha c, c) with K in (0, inf): no gradient, no penalty
  const double alpha = 0.5, c = 0.4;
  auto q = make_problem(kOne, kOne, 3, 0.0, alpha);
  const auto k = BulkSurfaceField::constant(q->num_bulk(), q->num_surface(), alpha * c, c);
  const auto e = energy(*q, k);
  const auto geo = q->geometry();
  const double expected =
      geo.bulk_measure * q->bulk_potential().value(alpha * c) + geo.surface_measure * q->surface_potential().value(c);
  CHECK(std::abs(e.k_penalty) <= 1e-14);
  CHECK(std::abs(e.total - expected) <= 1e-12 * std::abs(expected));

  // K = inf: penalty vanishes whatever the trace mismatch
  auto d = make_problem(kInf, kOne, 3, 0.0);
  const auto mis = BulkSurfaceField::constant(d->num_bulk(), d->num_surface(), 0.5, -0.5);
  CHECK(energy(*d, mis).k_penalty == 0.0);

  const auto x = noisy(*q, 0.0, 0.5, 1);
  const auto b = energy(*q, x);
  CHECK(b.bulk_dirichlet >= 0.0);
  CHECK(b.surface_dirichlet >= 0.0);
  CHECK(b.k_penalty >= 0.0);
  CHECK(std::abs(b.total - (b.bulk_dirichlet + b.bulk_potential + b.surface_dirichlet + b.surface_potential +
                            b.k_penalty)) <= 1e-12);

  auto bad = x;
  bad.surface[3] = 1.0;
  CHECK_THROWS_AS(energy(*q, bad), SingularDomainError);
}

TEST_CASE("time series and separation monitor") {
  auto p = make_problem(kOne, kOne, 2, 0.0);
  SchemeConfig cfg;
  cfg.dt = 0.01;
  TimeStepper ts(*p, cfg);
  const auto still = run(ts, BulkSurfaceField::zeros(p->num_bulk(), p->num_surface()), 0.5, 0.55);
  const auto sep = separation_monitor(still, 0.5);
  for (double m : sep.margins) CHECK(m == 1.0);
  REQUIRE(sep.t_s.has_value());
  CHECK(*sep.t_s == 0.5);

  const auto rec = run(ts, noisy(*p, 0.0, 0.9, 2), 0.0, 0.1);
  const auto mon = separation_monitor(rec, 0.0);
  CHECK(mon.min_margin > 0.0);
  CHECK(mon.terminal_margin == 1.0 - rec.final_state.phi.max_abs());

  const auto series = TimeSeries::from_record(rec);
  CHECK(series.rows.size() == rec.samples.size());
  CHECK(series.columns == TimeSeries::schema());
  const auto t = series.column("t");
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] > t[i - 1]);
  std::ostringstream a, b;
  series.write_csv(a);
  TimeSeries::from_record(run(ts, noisy(*p, 0.0, 0.9, 2), 0.0, 0.1)).write_csv(b);
  CHECK(a.str() == b.str());
  CHECK_THROWS_AS(series.column("nope"), Error);

  auto broken = rec;
  broken.samples[2].time = broken.samples[1].time;
  CHECK_THROWS_AS(TimeSeries::from_record(broken), Error);
}

TEST_CASE("positive part of the energy residual") {
  auto p = make_problem(kOne, kOne, 2, 0.0);
  SchemeConfig cfg;
  cfg.dt = 0.01;
  TimeStepper ts(*p, cfg);
  const auto rec = run(ts, noisy(*p, 0.0, 0.5, 9), 0.0, 0.2);
  // no convection: the scheme only dissipates
  CHECK(energy_residual_positive_part(rec) <= 1e-12);
  // brute force over all pairs
  auto fake = rec;
  for (std::size_t k = 0; k < fake.samples.size(); ++k) fake.samples[k].cum_work = 0.3 * std::sin(3.0 * k);
  double brute = 0.0;
  for (std::size_t s = 0; s < fake.samples.size(); ++s)
    for (std::size_t t = s; t < fake.samples.size(); ++t) brute = std::max(brute, energy_inequality_residual(fake, s, t));
  CHECK(energy_residual_positive_part(fake) == doctest::Approx(brute).epsilon(1e-14));
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hits(50, 0);
  parallel_for(50, 4, [&](int i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](int i) {
                    if (i == 7) throw Error(ErrorKind::Resource, "boom");
                  }),
                  Error);
}

TEST_CASE("pullback experiment basics") {
  auto p = make_problem(kOne, kOne, 2, 0.0);
  SchemeConfig cfg;
  cfg.dt = 0.02;
  const auto x = noisy(*p, 0.0, 0.5, 3);

  PullbackOptions o;
  o.tau_list = {0.8, 0.6, 0.4};
  o.t_fixed = 1.0;
  const auto same = pullback_experiment(*p, cfg, {}, {x, x, x}, o);
  for (const auto& r : same.rows) CHECK(r.spread == 0.0);

  // zero velocity: shifting every time by the same amount changes nothing
  PullbackOptions shifted = o;
  shifted.tau_list = {3.8, 3.6, 3.4};
  shifted.t_fixed = 4.0;
  const auto a = pullback_experiment(*p, cfg, {}, {x}, o);
  const auto b = pullback_experiment(*p, cfg, {}, {x}, shifted);
  for (std::size_t k = 0; k < a.rows.size(); ++k) CHECK(a.rows[k].max_h1 == b.rows[k].max_h1);

  // thread count does not change results
  const auto vel = VelocityPair(p->mesh(), p->ops(), stream_rotation(p->mesh(), 1.0, 1.0), 0.5, false,
                                default_envelope(1.0, 0.7));
  PullbackOptions t1 = o, t3 = o;
  t3.threads = 3;
  const auto r1 = pullback_experiment(*p, cfg, vel, {x, noisy(*p, 0.0, 0.5, 4)}, t1);
  const auto r3 = pullback_experiment(*p, cfg, vel, {x, noisy(*p, 0.0, 0.5, 4)}, t3);
  for (std::size_t k = 0; k < r1.rows.size(); ++k) {
    CHECK(r1.rows[k].max_h1 == r3.rows[k].max_h1);
    CHECK(r1.rows[k].spread == r3.rows[k].spread);
    CHECK(r1.rows[k].spread > 0.0);
  }

  PullbackOptions bad = o;
  bad.tau_list = {0.4, 0.6};
  CHECK_THROWS_AS(pullback_experiment(*p, cfg, {}, {x}, bad), Error);
  bad.tau_list = {1.5};
  CHECK_THROWS_AS(pullback_experiment(*p, cfg, {}, {x}, bad), Error);
}

TEST_CASE("exponent fit") {
  std::vector<double> gap, mu;
  for (int i = 0; i < 20; ++i) {
    const double m = std::pow(10.0, -1.0 - 0.2 * i);
    mu.push_back(m);
    gap.push_back(3.0 * std::pow(m, 1.6));
  }
  const auto f = fit_lojasiewicz_exponent(gap, mu);
  CHECK(!f.skipped);
  CHECK(f.slope == doctest::Approx(1.6));
  CHECK(f.varpi == doctest::Approx(1.0 - 1.0 / 1.6));
  CHECK(f.in_band());
  CHECK(fit_lojasiewicz_exponent({1e-3, 1e-4}, {1e-2, 1e-3}).skipped);
  CHECK_THROWS_AS(fit_lojasiewicz_exponent({1.0}, {}), Error);
}

TEST_CASE("equilibrium experiment on simple data") {
  auto p = make_problem(kOne, kOne, 2, 0.2);
  SchemeConfig cfg;
  cfg.dt = 0.05;
  EquilibriumOptions o;
  o.t_end = 2.0;

  const auto c = BulkSurfaceField::constant(p->num_bulk(), p->num_surface(), 0.2, 0.2);
  const auto still = equilibrium_experiment(*p, cfg, {}, c, o);
  CHECK(still.cauchy <= 1e-14);
  CHECK(still.max_increment <= 1e-12);
  CHECK(still.fit.skipped);
  CHECK(still.refined.residual <= 1e-12);

  o.t_end = 20.0;
  const auto pert = equilibrium_experiment(*p, cfg, {}, noisy(*p, 0.2, 0.05, 5), o);
  CHECK(pert.refined.residual <= 1e-10);
  CHECK(pert.cauchy <= 1e-6);
  CHECK(pert.max_increment <= 1e-4);
  CHECK(std::abs(pert.e_star - pert.e_star_window) <= 1e-6);
  REQUIRE(pert.monotone_from.has_value());

  const auto forever = VelocityPair(p->mesh(), p->ops(), stream_rotation(p->mesh(), 1.0, 1.0), 0.5, false,
                                    Envelope{EnvelopeKind::Constant, 0, 0, 1});
  CHECK_THROWS_AS(equilibrium_experiment(*p, cfg, forever, c, o), Error);
}

TEST_CASE("velocity dependence constant is stable") {
  auto p = make_problem(kOne, kOne, 2, 0.0);
  SchemeConfig cfg;
  cfg.dt = 0.01;
  const auto base = stream_rotation(p->mesh(), 1.0, 1.0);
  const auto cell = stream_cellular(p->mesh(), 1.0, 1.0, 1);
  auto family = [&](double eps) {
    return VelocityPair(p->mesh(), p->ops(), base + eps * cell, 0.5 + eps, false, default_envelope(1.0, 0.0));
  };
  DependenceOptions o;
  o.t_end = 0.5;
  o.eps = {0.2, 0.1, 0.05};
  const auto rep = velocity_dependence(*p, cfg, family, noisy(*p, 0.0, 0.5, 6), o);
  REQUIRE(rep.ratios.size() == 2);
  for (double r : rep.ratios) {
    CHECK(r >= 0.5);
    CHECK(r <= 2.0);
  }
  for (double f : rep.forcing) CHECK(f > 0.0);
  // forcing scales with eps^2
  CHECK(rep.forcing[0] / rep.forcing[1] == doctest::Approx(4.0).epsilon(1e-6));
}
