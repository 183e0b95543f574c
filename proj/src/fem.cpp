#include "bscch/fem.hpp"

#include <cmath>
#include <sstream>

#include "bscch/errors.hpp"
#include "bscch/potentials.hpp"

namespace bscch {

Vector BulkSurfaceField::stacked() const {
  Vector v(bulk.size() + surface.size());
  v << bulk, surface;
  return v;
}

BulkSurfaceField BulkSurfaceField::split(const Vector& v, int nb) {
  return {v.head(nb), v.tail(v.size() - nb)};
}

BulkSurfaceField& BulkSurfaceField::operator+=(const BulkSurfaceField& o) {
  bulk += o.bulk;
  surface += o.surface;
  return *this;
}

BulkSurfaceField& BulkSurfaceField::operator-=(const BulkSurfaceField& o) {
  bulk -= o.bulk;
  surface -= o.surface;
  return *this;
}

BulkSurfaceField& BulkSurfaceField::operator*=(double a) {
  bulk *= a;
  surface *= a;
  return *this;
}

double BulkSurfaceField::max_abs() const {
  double m = 0.0;
  if (bulk.size() > 0) m = bulk.cwiseAbs().maxCoeff();
  if (surface.size() > 0) m = std::max(m, surface.cwiseAbs().maxCoeff());
  return m;
}

void FemOperators::check_dims(const BulkSurfaceField& f) const {
  if (f.bulk.size() != num_bulk() || f.surface.size() != num_surface()) {
    std::ostringstream os;
    os << "field dimensions (" << f.bulk.size() << ", " << f.surface.size()
       << ") do not match the mesh (" << num_bulk() << ", " << num_surface() << ")";
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

double FemOperators::l2_dot(const BulkSurfaceField& a, const BulkSurfaceField& b) const {
  check_dims(a);
  check_dims(b);
  return a.bulk.cwiseProduct(bulk_lumped).dot(b.bulk) +
         a.surface.cwiseProduct(surface_lumped).dot(b.surface);
}

double FemOperators::l2_norm(const BulkSurfaceField& a) const { return std::sqrt(l2_dot(a, a)); }

double FemOperators::h1_norm(const BulkSurfaceField& a) const {
  check_dims(a);
  const double grad = a.bulk.dot(bulk_stiffness * a.bulk) + a.surface.dot(surface_stiffness * a.surface);
  return std::sqrt(std::max(grad, 0.0) + l2_dot(a, a));
}

Vector FemOperators::lumped_stacked() const {
  Vector v(num_bulk() + num_surface());
  v << bulk_lumped, surface_lumped;
  return v;
}

Eigen::Matrix3d local_stiffness(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                                const Eigen::Vector2d& c) {
  Eigen::Matrix2d jac;
  jac.col(0) = b - a;
  jac.col(1) = c - a;
  const double det = jac.determinant();
  // gradients of barycentric coordinates: rows of [-1 -1; 1 0; 0 1] * J^{-1}
  Eigen::Matrix<double, 3, 2> ref;
  ref << -1, -1, 1, 0, 0, 1;
  const Eigen::Matrix<double, 3, 2> g = ref * jac.inverse();
  return 0.5 * std::abs(det) * g * g.transpose();
}

FemOperators assemble(const BulkSurfaceMesh& mesh) {
  FemOperators ops;
  const int nb = mesh.num_bulk(), ns = mesh.num_surface(), nt = mesh.num_triangles();
  const auto& x = mesh.nodes();
  double scale = 0.0;
  for (const auto& p : x) scale = std::max(scale, p.norm());

  std::vector<Eigen::Triplet<double>> mass, stiff;
  mass.reserve(9 * nt);
  stiff.reserve(9 * nt);
  ops.tri_area.resize(nt);
  ops.tri_grad.resize(nt);
  Eigen::Matrix<double, 3, 2> ref;
  ref << -1, -1, 1, 0, 0, 1;
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles()[t];
    Eigen::Matrix2d jac;
    jac.col(0) = x[tri[1]] - x[tri[0]];
    jac.col(1) = x[tri[2]] - x[tri[0]];
    const double area = 0.5 * jac.determinant();
    if (!(area > 1e-14 * scale * scale))
      throw Error(ErrorKind::Assembly, "degenerate triangle " + std::to_string(t));
    const Eigen::Matrix<double, 3, 2> g = ref * jac.inverse();
    ops.tri_area[t] = area;
    ops.tri_grad[t] = g;
    const Eigen::Matrix3d k = area * g * g.transpose();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        stiff.emplace_back(tri[i], tri[j], k(i, j));
        mass.emplace_back(tri[i], tri[j], area * (i == j ? 2.0 : 1.0) / 12.0);
      }
  }
  ops.bulk_mass.resize(nb, nb);
  ops.bulk_mass.setFromTriplets(mass.begin(), mass.end());
  ops.bulk_stiffness.resize(nb, nb);
  ops.bulk_stiffness.setFromTriplets(stiff.begin(), stiff.end());

  // Periodic P1 on the boundary polyline.
  std::vector<Eigen::Triplet<double>> smass, sstiff, tr;
  ops.edge_length.resize(ns);
  ops.edge_tangent.resize(ns);
  for (int i = 0; i < ns; ++i) {
    const int j = (i + 1) % ns;
    const Eigen::Vector2d e = x[mesh.surface_nodes()[j]] - x[mesh.surface_nodes()[i]];
    const double len = e.norm();
    if (!(len > 0.0)) throw Error(ErrorKind::Assembly, "zero-length surface edge " + std::to_string(i));
    ops.edge_length[i] = len;
    ops.edge_tangent[i] = e / len;
    smass.emplace_back(i, i, len / 3.0);
    smass.emplace_back(j, j, len / 3.0);
    smass.emplace_back(i, j, len / 6.0);
    smass.emplace_back(j, i, len / 6.0);
    sstiff.emplace_back(i, i, 1.0 / len);
    sstiff.emplace_back(j, j, 1.0 / len);
    sstiff.emplace_back(i, j, -1.0 / len);
    sstiff.emplace_back(j, i, -1.0 / len);
    tr.emplace_back(i, mesh.surface_nodes()[i], 1.0);
  }
  ops.surface_mass.resize(ns, ns);
  ops.surface_mass.setFromTriplets(smass.begin(), smass.end());
  ops.surface_stiffness.resize(ns, ns);
  ops.surface_stiffness.setFromTriplets(sstiff.begin(), sstiff.end());
  ops.trace.resize(ns, nb);
  ops.trace.setFromTriplets(tr.begin(), tr.end());

  ops.bulk_lumped = ops.bulk_mass * Vector::Ones(nb);
  ops.surface_lumped = ops.surface_mass * Vector::Ones(ns);
  return ops;
}

double integrate_nonlinear(const FemOperators& ops, const std::function<double(double)>& f,
                           const Vector& values, Domain domain) {
  const Vector& w = domain == Domain::Bulk ? ops.bulk_lumped : ops.surface_lumped;
  if (values.size() != w.size())
    throw Error(ErrorKind::DimensionMismatch, "nodal vector length does not match the domain");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    double fv;
    try {
      fv = f(values[i]);
    } catch (const SingularDomainError& e) {
      std::ostringstream os;
      os << e.what() << " at " << (domain == Domain::Bulk ? "bulk" : "surface") << " node " << i;
      throw SingularDomainError(os.str(), values[i], static_cast<long>(i));
    }
    if (!std::isfinite(fv)) {
      std::ostringstream os;
      os << "integrand not finite at " << (domain == Domain::Bulk ? "bulk" : "surface") << " node " << i;
      throw SingularDomainError(os.str(), values[i], static_cast<long>(i));
    }
    sum += w[i] * fv;
  }
  return sum;
}

Vector interpolate_bulk(const BulkSurfaceMesh& mesh, const std::function<double(double, double)>& f) {
  Vector v(mesh.num_bulk());
  for (int i = 0; i < mesh.num_bulk(); ++i) v[i] = f(mesh.nodes()[i].x(), mesh.nodes()[i].y());
  return v;
}

Vector interpolate_surface(const BulkSurfaceMesh& mesh,
                           const std::function<double(double, double)>& f) {
  Vector v(mesh.num_surface());
  for (int i = 0; i < mesh.num_surface(); ++i) {
    const auto& p = mesh.nodes()[mesh.surface_nodes()[i]];
    v[i] = f(p.x(), p.y());
  }
  return v;
}

}  // namespace bscch
