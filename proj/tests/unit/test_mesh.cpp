#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"

#include "bscch/errors.hpp"
#include "bscch/mesh.hpp"

using namespace bscch;
constexpr double pi = std::numbers::pi;

TEST_CASE("coarse disk satisfies invariants") {
  const auto m = build_disk_mesh(1.0, 0);
  CHECK(m.num_triangles() == 24);
  CHECK(m.num_surface() == 12);
  CHECK_NOTHROW(m.validate());
  for (int t = 0; t < m.num_triangles(); ++t) CHECK(m.signed_area(t) > 0.0);
  for (int s : m.surface_nodes()) CHECK(m.nodes()[s].norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("refinement counts and boundary on the circle") {
  for (int level = 1; level <= 4; ++level) {
    const auto m = build_disk_mesh(2.0, level);
    CHECK(m.num_triangles() == 24 * (1 << (2 * level)));
    CHECK(m.num_surface() == 12 * (1 << level));
    for (int s : m.surface_nodes()) CHECK(std::abs(m.nodes()[s].norm() - 2.0) <= 1e-14);
    // trace bijection
    int boundary = 0;
    for (int b = 0; b < m.num_bulk(); ++b)
      if (m.trace_map()[b] >= 0) {
        ++boundary;
        CHECK(m.surface_nodes()[m.trace_map()[b]] == b);
      }
    CHECK(boundary == m.num_surface());
    CHECK(m.interior_nodes().size() + m.num_surface() == static_cast<std::size_t>(m.num_bulk()));
  }
}

TEST_CASE("area and perimeter converge") {
  const auto m4 = build_disk_mesh(1.0, 4);
  // inscribed polygon with n sides: area (n/2) sin(2pi/n), perimeter 2n sin(pi/n)
  const int n = m4.num_surface();
  CHECK(std::abs(m4.polygon_area() - 0.5 * n * std::sin(2 * pi / n)) <= 1e-12);
  CHECK(std::abs(m4.boundary_length() - 2 * n * std::sin(pi / n)) <= 1e-12);
  CHECK(std::abs(m4.polygon_area() - pi) <= 5e-3);
  CHECK(std::abs(m4.boundary_length() - 2 * pi) <= 5e-3);
  double prev = 1.0;
  for (int level = 2; level <= 4; ++level) {
    const double err = std::abs(build_disk_mesh(1.0, level).boundary_length() - 2 * pi);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("resource limit and invalid meshes") {
  CHECK_THROWS_AS(build_disk_mesh(1.0, 9), Error);
  try {
    build_disk_mesh(1.0, 9);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Resource);
  }
  CHECK_THROWS(build_disk_mesh(-1.0, 1));
  // clockwise triangle
  std::vector<Eigen::Vector2d> x{{0, 0}, {1, 0}, {0, 1}};
  BulkSurfaceMesh bad(x, {{0, 2, 1}}, {0, 1, 2});
  CHECK_THROWS_AS(bad.validate(), Error);
  BulkSurfaceMesh good(x, {{0, 1, 2}}, {0, 1, 2});
  CHECK_NOTHROW(good.validate());
  BulkSurfaceMesh open(x, {{0, 1, 2}}, {0, 1});
  CHECK_THROWS_AS(open.validate(), Error);
}

TEST_CASE("hash is deterministic and vtk has all cells") {
  const auto a = build_disk_mesh(1.0, 2), b = build_disk_mesh(1.0, 2);
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != build_disk_mesh(1.0, 3).hash());
  std::ostringstream os;
  write_vtk(a, os, {{"x", Eigen::VectorXd::Zero(a.num_bulk())}});
  const std::string s = os.str();
  CHECK(s.find("CELLS " + std::to_string(a.num_triangles() + a.num_surface())) != std::string::npos);
  CHECK(s.find("SCALARS x double 1") != std::string::npos);
}
