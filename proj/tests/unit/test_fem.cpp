#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "bscch/errors.hpp"
#include "bscch/fem.hpp"
#include "bscch/mesh.hpp"
#include "bscch/potentials.hpp"

using namespace bscch;
constexpr double pi = std::numbers::pi;

namespace {

const BulkSurfaceMesh& mesh4() {
  static const BulkSurfaceMesh m = build_disk_mesh(1.0, 4);
  return m;
}

const FemOperators& ops4() {
  static const FemOperators o = assemble(mesh4());
  return o;
}

double sym_defect(const SparseMatrix& a) {
  SparseMatrix d = a - SparseMatrix(a.transpose());
  return d.norm();
}

}  // namespace

TEST_CASE("operator invariants") {
  const auto& o = ops4();
  const int nb = o.num_bulk(), ns = o.num_surface();
  CHECK((o.bulk_stiffness * Vector::Ones(nb)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((o.surface_stiffness * Vector::Ones(ns)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(sym_defect(o.bulk_mass) <= 1e-14);
  CHECK(sym_defect(o.bulk_stiffness) <= 1e-12);
  CHECK(sym_defect(o.surface_mass) <= 1e-14);
  CHECK(sym_defect(o.surface_stiffness) <= 1e-12);
  CHECK(o.bulk_lumped.minCoeff() > 0.0);
  CHECK(o.surface_lumped.minCoeff() > 0.0);
  CHECK(o.bulk_lumped.sum() == doctest::Approx(mesh4().polygon_area()).epsilon(1e-13));
  CHECK(o.surface_lumped.sum() == doctest::Approx(mesh4().boundary_length()).epsilon(1e-13));
  CHECK(std::abs(o.bulk_lumped.sum() - pi) <= 5e-3);

  // semidefinite on random vectors
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (int k = 0; k < 10; ++k) {
    Vector u(nb), w(ns);
    for (int i = 0; i < nb; ++i) u[i] = n01(rng);
    for (int i = 0; i < ns; ++i) w[i] = n01(rng);
    CHECK(u.dot(o.bulk_stiffness * u) >= 0.0);
    CHECK(w.dot(o.surface_stiffness * w) >= 0.0);
    CHECK(u.dot(o.bulk_mass * u) > 0.0);
  }
}

TEST_CASE("dirichlet energy of a linear function") {
  const auto& m = mesh4();
  const auto& o = ops4();
  const Vector u = interpolate_bulk(m, [](double x, double) { return x; });
  // gradient is exactly (1,0): quadratic form equals the polygon area
  CHECK(u.dot(o.bulk_stiffness * u) == doctest::Approx(m.polygon_area()).epsilon(1e-12));
  CHECK(std::abs(u.dot(o.bulk_stiffness * u) - pi) <= 5e-3);
}

TEST_CASE("local stiffness against analytic integrals") {
  const Eigen::Vector2d a(0.1, -0.2), b(1.3, 0.4), c(0.2, 0.9);
  const Eigen::Matrix3d k = local_stiffness(a, b, c);
  // linear u = 2x - y + 1, v = -x + 3y: int grad u . grad v = area * (2*(-1) + (-1)*3)
  const double area = 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
  auto uf = [](const Eigen::Vector2d& p) { return 2 * p.x() - p.y() + 1; };
  auto vf = [](const Eigen::Vector2d& p) { return -p.x() + 3 * p.y(); };
  const Eigen::Vector3d uu(uf(a), uf(b), uf(c)), vv(vf(a), vf(b), vf(c));
  CHECK(uu.dot(k * vv) == doctest::Approx(area * -5.0).epsilon(1e-12));
}

TEST_CASE("surface stiffness equals the scaled periodic difference Laplacian") {
  // 6-node irregular cycle on the unit circle built as a fan mesh
  std::vector<Eigen::Vector2d> x{{0, 0}};
  const double ang[6] = {0.0, 0.9, 2.0, 3.1, 4.4, 5.5};
  for (double t : ang) x.emplace_back(std::cos(t), std::sin(t));
  std::vector<std::array<int, 3>> tris;
  for (int i = 0; i < 6; ++i) tris.push_back({0, 1 + i, 1 + (i + 1) % 6});
  BulkSurfaceMesh m(x, tris, {1, 2, 3, 4, 5, 6});
  m.validate();
  const auto o = assemble(m);
  Eigen::MatrixXd dense = Eigen::MatrixXd(o.surface_stiffness);
  for (int i = 0; i < 6; ++i) {
    const int ip = (i + 1) % 6, im = (i + 5) % 6;
    const double hp = (x[1 + ip] - x[1 + i]).norm(), hm = (x[1 + i] - x[1 + im]).norm();
    Eigen::VectorXd row = Eigen::VectorXd::Zero(6);
    row[i] = 1 / hp + 1 / hm;
    row[ip] -= 1 / hp;
    row[im] -= 1 / hm;
    CHECK((dense.row(i).transpose() - row).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("dirichlet energy converges at second order") {
  // u = x^2 + y^2 on the unit disk: int |grad u|^2 = int 4r^2 = 2 pi
  std::vector<double> err;
  std::vector<double> h;
  for (int level = 2; level <= 5; ++level) {
    const auto m = build_disk_mesh(1.0, level);
    const auto o = assemble(m);
    const Vector u = interpolate_bulk(m, [](double x, double y) { return x * x + y * y; });
    err.push_back(std::abs(u.dot(o.bulk_stiffness * u) - 2 * pi));
    h.push_back(m.h());
  }
  for (std::size_t i = 1; i < err.size(); ++i) {
    const double rate = std::log(err[i - 1] / err[i]) / std::log(h[i - 1] / h[i]);
    CHECK(rate > 1.8);
  }
}

TEST_CASE("integrate_nonlinear") {
  const auto& o = ops4();
  const int nb = o.num_bulk(), ns = o.num_surface();
  const auto g = o.geometry();
  auto id = [](double s) { return s; };
  CHECK(integrate_nonlinear(o, id, Vector::Constant(nb, 0.7), Domain::Bulk) ==
        doctest::Approx(0.7 * g.bulk_measure).epsilon(1e-13));
  CHECK(integrate_nonlinear(o, id, Vector::Constant(ns, 0.7), Domain::Surface) ==
        doctest::Approx(0.7 * g.surface_measure).epsilon(1e-13));
  CHECK(integrate_nonlinear(o, [](double s) { return s * s; }, Vector::Zero(nb), Domain::Bulk) == 0.0);

  const auto w = make_log_potential(1.0, 2.0);
  const double pointwise = 0.5 * (1.5 * std::log(1.5) + 0.5 * std::log(0.5)) - 0.25;
  CHECK(integrate_nonlinear(o, [&](double s) { return w.eval(s).first; }, Vector::Constant(nb, 0.5), Domain::Bulk) ==
        doctest::Approx(pointwise * g.bulk_measure).epsilon(1e-13));

  Vector bad = Vector::Zero(nb);
  bad[17] = 1.2;
  try {
    integrate_nonlinear(o, [&](double s) { return w.eval(s).first; }, bad, Domain::Bulk);
    FAIL("expected singular-domain error");
  } catch (const SingularDomainError& e) {
    CHECK(e.node() == 17);
    CHECK(e.value() == 1.2);
  }
  CHECK_THROWS_AS(integrate_nonlinear(o, id, Vector::Zero(nb + 1), Domain::Bulk), Error);
}

TEST_CASE("field helpers") {
  BulkSurfaceField f(Vector::LinSpaced(4, 0, 3), Vector::LinSpaced(2, -1, 1));
  const Vector st = f.stacked();
  CHECK(st.size() == 6);
  const auto g = BulkSurfaceField::split(st, 4);
  CHECK(g.bulk == f.bulk);
  CHECK(g.surface == f.surface);
  CHECK((f - g).max_abs() == 0.0);
  CHECK((2.0 * f).max_abs() == 6.0);
}
