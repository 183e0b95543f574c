#include <cmath>
#include <random>

#include "doctest.h"

#include "bscch/errors.hpp"
#include "bscch/mass.hpp"
#include "bscch/stationary.hpp"

using namespace bscch;

namespace {

const ExtendedReal kZero = ExtendedReal::finite(0.0);
const ExtendedReal kOne = ExtendedReal::finite(1.0);
const ExtendedReal kInf = ExtendedReal::infinity();

std::unique_ptr<Problem> make_problem(ExtendedReal K, ExtendedReal L, double radius, int level, double m) {
  SystemParams p;
  p.K = K;
  p.L = L;
  if (L.is_infinite())
    p.mass_target = MassPair{m, m};
  else
    p.mass_target = m;
  return std::make_unique<Problem>(build_disk_mesh(radius, level), p, make_log_potential(1.0, 2.0),
                                   make_log_potential(1.0, 2.0));
}

BulkSurfaceField perturbed(const Problem& p, double c, double eps, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto f = BulkSurfaceField::constant(p.num_bulk(), p.num_surface(), c, c);
  for (int i = 0; i < f.bulk.size(); ++i) f.bulk[i] += eps * u(rng);
  for (int i = 0; i < f.surface.size(); ++i) f.surface[i] += eps * u(rng);
  if (p.params().K.is_zero())
    for (int j = 0; j < p.num_surface(); ++j) f.bulk[p.mesh().surface_nodes()[j]] = f.surface[j];
  project_mass(f, p.params(), p.ops());
  return f;
}

}  // namespace

TEST_CASE("separation width") {
  CHECK(separation_width(BulkSurfaceField::constant(4, 3, 0.2, 0.2)) == doctest::Approx(0.8));
  CHECK(separation_width(BulkSurfaceField::constant(4, 3, 0.0, 0.0)) == 1.0);
  CHECK(separation_width(BulkSurfaceField::constant(4, 3, -0.3, 0.1)) == doctest::Approx(0.7));
}

TEST_CASE("constant states") {
  const double c = 0.2;
  auto p = make_problem(kOne, kOne, 1.0, 3, c);
  const auto x = BulkSurfaceField::constant(p->num_bulk(), p->num_surface(), c, c);
  const double fp = p->bulk_potential().derivative(c);
  const auto r = stationary_residual(*p, x, {fp, fp});
  CHECK(r.norm <= 1e-12);
  // alpha = beta = 1, F = G: the integral formula reduces to F'(c)
  const auto geo = p->geometry();
  const double formula = (geo.bulk_measure * fp + geo.surface_measure * fp) / (geo.bulk_measure + geo.surface_measure);
  CHECK(std::abs(formula - fp) <= 1e-14);
  const auto fit = fit_multipliers(*p, x);
  CHECK(std::abs(fit.theta - fp) <= 1e-12);

  const auto sol = newton_solve(*p, x);
  CHECK(sol.iterations == 0);
  CHECK(sol.residual <= 1e-12);
  CHECK(std::abs(sol.multipliers.mu - fp) <= 1e-12);
  CHECK(sol.delta_star == doctest::Approx(0.8));

  CHECK_THROWS_AS(stationary_residual(*p, x, {fp, 2.0 * fp}), Error);
}

TEST_CASE("non-critical field has a residual") {
  auto p = make_problem(kOne, kOne, 1.0, 3, 0.0);
  const auto x = perturbed(*p, 0.0, 0.3, 1);
  CHECK(stationary_residual(*p, x, {}).norm > 1e-3);
  auto bad = x;
  bad.bulk[5] = 1.0;
  CHECK_THROWS_AS(stationary_residual(*p, bad, {}), SingularDomainError);
  try {
    stationary_residual(*p, bad, {});
  } catch (const SingularDomainError& e) {
    CHECK(e.node() == 5);
  }
}

TEST_CASE("perturbed start converges quadratically") {
  for (auto K : {kZero, kOne, kInf})
    for (auto L : {kZero, kOne, kInf}) {
      CAPTURE(K.to_string());
      CAPTURE(L.to_string());
      auto p = make_problem(K, L, 1.0, 3, 0.1);
      const auto guess = perturbed(*p, 0.1, 1e-3, 2);
      const auto sol = newton_solve(*p, guess);
      CHECK(sol.residual <= 1e-10);
      CHECK(sol.mass_defect <= 1e-10);
      CHECK(sol.iterations >= 1);
      CHECK(sol.quadratic_ratio < 1e4);
      const auto f = multiplier_formulas(*p, sol);
      CHECK(std::abs(f.mu - sol.multipliers.mu) <= 1e-8);
      CHECK(std::abs(f.theta - sol.multipliers.theta) <= 1e-8);
      if (!L.is_infinite()) CHECK(sol.multipliers.mu == p->params().beta * sol.multipliers.theta);
      CHECK(criticality_defect(*p, sol.phi, 20, 3) <= 1e-8);
    }
}

TEST_CASE("nontrivial equilibrium from a Cahn-Hilliard run") {
  // radius 2.5 makes the mixed state m = 0 linearly unstable; the surface field h = 1 selects a
  // radial state instead of the rotation family of split states
  SystemParams prm;
  prm.K = kOne;
  prm.L = kOne;
  prm.mass_target = 0.0;
  auto p = std::make_unique<Problem>(build_disk_mesh(2.5, 3), prm, make_log_potential(1.0, 2.0),
                                     SplitPotential(std::make_shared<LogEntropy>(1.0), SmoothPart{-2.0, -1.0}));
  SchemeConfig cfg;
  cfg.dt = 0.05;
  TimeStepper ts(*p, cfg);
  RunOptions opts;
  opts.record_every = 100;
  opts.rate_norm = false;
  const auto rec = run(ts, perturbed(*p, 0.0, 0.1, 4), 0.0, 40.0, opts);
  const auto& guess = rec.final_state.phi;
  CHECK(guess.max_abs() > 0.5);  // separated, not the constant

  const auto sol = newton_solve(*p, guess);
  CHECK(sol.residual <= 1e-10);
  CHECK(sol.iterations <= 5);
  CHECK(sol.delta_star > 0.0);
  CHECK(sol.delta_star < 0.5);
  const auto f = multiplier_formulas(*p, sol);
  CHECK(std::abs(f.theta - sol.multipliers.theta) <= 1e-8);
  CHECK(criticality_defect(*p, sol.phi, 20, 5) <= 1e-8);

  // fixed point of the flow
  SimState s;
  s.phi = sol.phi;
  const auto next = ts.step(s);
  CHECK((next.phi - sol.phi).max_abs() <= 1e-9);

  // directional derivative against finite differences of the energy
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n01;
  auto d = BulkSurfaceField::zeros(p->num_bulk(), p->num_surface());
  for (int i = 0; i < d.bulk.size(); ++i) d.bulk[i] = n01(rng);
  for (int i = 0; i < d.surface.size(); ++i) d.surface[i] = n01(rng);
  SystemParams zero = p->params();
  zero.mass_target = 0.0;
  project_mass(d, zero, p->ops());
  const double h = 1e-5;
  const double fd = (energy(*p, sol.phi + h * d).total - energy(*p, sol.phi - (h * d)).total) / (2 * h);
  CHECK(std::abs(fd) <= 1e-7 * p->ops().l2_norm(d));
}

TEST_CASE("bad guesses are rejected") {
  auto p = make_problem(kZero, kOne, 1.0, 2, 0.0);
  auto g = perturbed(*p, 0.0, 0.1, 7);
  auto off = g;
  off.bulk[p->mesh().surface_nodes()[1]] += 0.2;
  CHECK_THROWS_AS(newton_solve(*p, off), Error);
  auto heavy = g;
  heavy.bulk.array() += 0.1;
  heavy.surface.array() += 0.1;
  CHECK_THROWS_AS(newton_solve(*p, heavy), Error);
  StationaryOptions o;
  o.max_iter = 0;
  CHECK_THROWS_AS(newton_solve(*p, g, o), Error);
}
