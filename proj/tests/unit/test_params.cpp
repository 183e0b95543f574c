#include <cmath>
#include <numbers>

#include "doctest.h"

#include "bscch/errors.hpp"
#include "bscch/fem.hpp"
#include "bscch/mass.hpp"
#include "bscch/mesh.hpp"
#include "bscch/params.hpp"

using namespace bscch;
constexpr double pi = std::numbers::pi;

namespace {

SystemParams make_params(ExtendedReal K, ExtendedReal L, double alpha, double beta, MassValue m) {
  SystemParams p;
  p.K = K;
  p.L = L;
  p.alpha = alpha;
  p.beta = beta;
  p.mass_target = m;
  return p;
}

const FemOperators& disk_ops() {
  static const FemOperators ops = assemble(build_disk_mesh(1.0, 3));
  return ops;
}

}  // namespace

TEST_CASE("chi cases") {
  CHECK(chi(ExtendedReal::finite(0.0)) == 0.0);
  CHECK(chi(ExtendedReal::finite(2.0)) == 0.5);
  CHECK(chi(ExtendedReal::infinity()) == 0.0);
  for (double r : {0.3, 1.0, 7.0, 1e-8, 1e8}) CHECK(chi(ExtendedReal::finite(r)) * r == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(ExtendedReal::finite(-1.0), Error);
  CHECK_THROWS_AS(ExtendedReal::infinity().value(), Error);
}

TEST_CASE("validate admissibility") {
  const DomainGeometry g{pi, 2 * pi};
  CHECK_NOTHROW(make_params(ExtendedReal::finite(1), ExtendedReal::finite(1), 1.0, 1.0, 0.0).validate(g));
  // alpha*beta*pi + 2pi = 0 for alpha = 1, beta = -2
  auto bad = make_params(ExtendedReal::finite(1), ExtendedReal::finite(1), 1.0, -2.0, 0.0);
  try {
    bad.validate(g);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidParameter);
    CHECK(std::string(e.what()).rfind("A2", 0) == 0);
  }
  auto d1 = make_params(ExtendedReal::finite(1), ExtendedReal::finite(1), 1.0, 2.0, 0.6);
  try {
    d1.validate(g);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("D1", 0) == 0);
  }
  CHECK_THROWS(make_params(ExtendedReal::finite(1), ExtendedReal::infinity(), 1.0, 1.0, 0.0).validate(g));
  CHECK_NOTHROW(make_params(ExtendedReal::finite(1), ExtendedReal::infinity(), 1.0, 1.0, MassPair{0.1, -0.2}).validate(g));
  CHECK_THROWS(make_params(ExtendedReal::finite(1), ExtendedReal::finite(1), 1.5, 1.0, 0.0).validate(g));
}

TEST_CASE("generalized mean and mass functional") {
  const auto& ops = disk_ops();
  const auto g = ops.geometry();
  const int nb = ops.num_bulk(), ns = ops.num_surface();
  auto p = make_params(ExtendedReal::finite(1), ExtendedReal::finite(1), 1.0, 1.0, 0.0);

  CHECK(std::get<double>(generalized_mean(BulkSurfaceField::constant(nb, ns, 1, 1), p, ops)) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::get<double>(generalized_mean(BulkSurfaceField::zeros(nb, ns), p, ops)) == 0.0);

  // phi = 1, psi = 0: beta|Omega| / (beta^2|Omega| + |Gamma|), which is 1/3 when |Gamma| = 2|Omega|
  const double expected = g.bulk_measure / (g.bulk_measure + g.surface_measure);
  CHECK(std::get<double>(generalized_mean(BulkSurfaceField::constant(nb, ns, 1, 0), p, ops)) ==
        doctest::Approx(expected).epsilon(1e-13));
  CHECK(expected == doctest::Approx(1.0 / 3.0).epsilon(2e-2));

  p.beta = 2.0;
  const double total = std::get<double>(mass_functional(BulkSurfaceField::constant(nb, ns, 1, 1), p, ops));
  CHECK(total == doctest::Approx(2 * g.bulk_measure + g.surface_measure).epsilon(1e-13));

  // (beta c, c) has mean c
  const double c = 0.37;
  CHECK(std::get<double>(generalized_mean(BulkSurfaceField::constant(nb, ns, 2 * c, c), p, ops)) ==
        doctest::Approx(c).epsilon(1e-12));

  p.L = ExtendedReal::infinity();
  const auto pair = std::get<MassPair>(mass_functional(BulkSurfaceField::constant(nb, ns, 0.3, -0.4), p, ops));
  CHECK(pair.bulk == doctest::Approx(0.3 * g.bulk_measure));
  CHECK(pair.surface == doctest::Approx(-0.4 * g.surface_measure));
  CHECK_THROWS_AS(mass_functional(BulkSurfaceField::zeros(nb + 1, ns), p, ops), Error);
}

TEST_CASE("project_mass hits the target") {
  const auto& ops = disk_ops();
  const int nb = ops.num_bulk(), ns = ops.num_surface();
  auto p = make_params(ExtendedReal::finite(1), ExtendedReal::finite(0), 0.5, -0.7, 0.2);
  BulkSurfaceField f(Vector::LinSpaced(nb, -0.3, 0.4), Vector::LinSpaced(ns, 0.1, 0.2));
  project_mass(f, p, ops);
  CHECK(std::get<double>(generalized_mean(f, p, ops)) == doctest::Approx(0.2).epsilon(1e-13));
  p.L = ExtendedReal::infinity();
  p.mass_target = MassPair{-0.1, 0.25};
  project_mass(f, p, ops);
  const auto m = std::get<MassPair>(generalized_mean(f, p, ops));
  CHECK(m.bulk == doctest::Approx(-0.1).epsilon(1e-13));
  CHECK(m.surface == doctest::Approx(0.25).epsilon(1e-13));
}
