#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SparseCore>

#include "bscch/mesh.hpp"
#include "bscch/params.hpp"

namespace bscch {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Paired nodal coefficient vectors: bulk values over bulk nodes, surface values over the
/// boundary cycle. Used for (phi, psi), (mu, theta) and test pairs alike.
struct BulkSurfaceField {
  Vector bulk;
  Vector surface;

  BulkSurfaceField() = default;
  BulkSurfaceField(Vector b, Vector s) : bulk(std::move(b)), surface(std::move(s)) {}
  static BulkSurfaceField zeros(int nb, int ns) { return {Vector::Zero(nb), Vector::Zero(ns)}; }
  static BulkSurfaceField constant(int nb, int ns, double b, double s) {
    return {Vector::Constant(nb, b), Vector::Constant(ns, s)};
  }

  /// [bulk; surface]
  Vector stacked() const;
  static BulkSurfaceField split(const Vector& v, int nb);

  BulkSurfaceField& operator+=(const BulkSurfaceField& o);
  BulkSurfaceField& operator-=(const BulkSurfaceField& o);
  BulkSurfaceField& operator*=(double a);
  friend BulkSurfaceField operator+(BulkSurfaceField a, const BulkSurfaceField& b) { return a += b; }
  friend BulkSurfaceField operator-(BulkSurfaceField a, const BulkSurfaceField& b) { return a -= b; }
  friend BulkSurfaceField operator*(double s, BulkSurfaceField a) { return a *= s; }

  /// max over both components of |value|
  double max_abs() const;
};

/// Assembled P1 operators. Bulk forms on the triangulation, surface forms on the periodic
/// polyline; the trace operator restricts bulk vectors to boundary-cycle order.
struct FemOperators {
  SparseMatrix bulk_mass;          // consistent
  SparseMatrix bulk_stiffness;
  SparseMatrix surface_mass;       // consistent
  SparseMatrix surface_stiffness;  // discretizes -Laplace-Beltrami
  Vector bulk_lumped;              // row sums of bulk_mass
  Vector surface_lumped;           // row sums of surface_mass
  SparseMatrix trace;              // num_surface x num_bulk

  /// Per-triangle area and gradients of the three barycentric functions (rows).
  std::vector<double> tri_area;
  std::vector<Eigen::Matrix<double, 3, 2>> tri_grad;
  /// Per surface edge i (node i -> node i+1): length and unit tangent.
  std::vector<double> edge_length;
  std::vector<Eigen::Vector2d> edge_tangent;

  int num_bulk() const { return static_cast<int>(bulk_lumped.size()); }
  int num_surface() const { return static_cast<int>(surface_lumped.size()); }

  DomainGeometry geometry() const { return {bulk_lumped.sum(), surface_lumped.sum()}; }

  void check_dims(const BulkSurfaceField& f) const;

  /// Mass-lumped L2 inner product of two pairs.
  double l2_dot(const BulkSurfaceField& a, const BulkSurfaceField& b) const;
  double l2_norm(const BulkSurfaceField& a) const;
  /// sqrt(|grad|^2 + L2^2) in both components.
  double h1_norm(const BulkSurfaceField& a) const;
  /// Stacked diagonal lumped mass [bulk_lumped; surface_lumped].
  Vector lumped_stacked() const;
};

/// Deterministic assembly in triangle order. Throws Error(Assembly) naming a degenerate triangle.
FemOperators assemble(const BulkSurfaceMesh& mesh);

/// Local P1 stiffness of a single triangle (3x3), for consistency checks.
Eigen::Matrix3d local_stiffness(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                                const Eigen::Vector2d& c);

enum class Domain { Bulk, Surface };

/// Mass-lumped quadrature sum_i m_i f(v_i). A SingularDomainError from f is rethrown with the
/// node id attached.
double integrate_nonlinear(const FemOperators& ops, const std::function<double(double)>& f,
                           const Vector& values, Domain domain);

/// Interpolates a function of position at the nodes.
Vector interpolate_bulk(const BulkSurfaceMesh& mesh, const std::function<double(double, double)>& f);
Vector interpolate_surface(const BulkSurfaceMesh& mesh,
                           const std::function<double(double, double)>& f);

}  // namespace bscch
