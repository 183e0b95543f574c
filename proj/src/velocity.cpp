#include "bscch/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bscch/errors.hpp"

namespace bscch {

const char* to_string(EnvelopeKind kind) {
  switch (kind) {
    case EnvelopeKind::Zero: return "zero";
    case EnvelopeKind::Constant: return "constant";
    case EnvelopeKind::WindowExponential: return "window-exponential";
    case EnvelopeKind::Exponential: return "exponential";
    case EnvelopeKind::Bump: return "bump";
  }
  return "unknown";
}

EnvelopeKind envelope_kind_from_string(const std::string& name) {
  for (auto k : {EnvelopeKind::Zero, EnvelopeKind::Constant, EnvelopeKind::WindowExponential,
                 EnvelopeKind::Exponential, EnvelopeKind::Bump})
    if (name == to_string(k)) return k;
  throw Error(ErrorKind::Config, "unknown envelope kind '" + name + "'");
}

double Envelope::operator()(double t) const {
  switch (kind) {
    case EnvelopeKind::Zero: return 0.0;
    case EnvelopeKind::Constant: return 1.0;
    case EnvelopeKind::WindowExponential: return t <= onset ? 1.0 : std::exp(-rate * (t - onset));
    case EnvelopeKind::Exponential: return std::exp(-rate * (t - onset));
    case EnvelopeKind::Bump: {
      const double x = 2.0 * (t - onset) / width - 1.0;
      if (!(std::abs(x) < 1.0)) return 0.0;
      return std::exp(1.0 - 1.0 / (1.0 - x * x));
    }
  }
  return 0.0;
}

bool Envelope::monotone_after(double from) const {
  switch (kind) {
    case EnvelopeKind::Zero:
    case EnvelopeKind::Constant: return true;
    case EnvelopeKind::WindowExponential:
    case EnvelopeKind::Exponential: return rate >= 0.0;
    case EnvelopeKind::Bump: return from >= onset + 0.5 * width;
  }
  return false;
}

Envelope default_envelope(double a, double t_dec) {
  return Envelope{EnvelopeKind::WindowExponential, 2.0 * a, t_dec, 1.0};
}

Vector stream_rotation(const BulkSurfaceMesh& mesh, double amplitude, double radius) {
  return interpolate_bulk(mesh, [&](double x, double y) {
    return amplitude * (1.0 - (x * x + y * y) / (radius * radius));
  });
}

Vector stream_cellular(const BulkSurfaceMesh& mesh, double amplitude, double radius, int k) {
  constexpr double pi = std::numbers::pi;
  Vector s = interpolate_bulk(mesh, [&](double x, double y) {
    return amplitude * (1.0 - (x * x + y * y) / (radius * radius)) * std::sin(k * pi * x / radius) *
           std::sin(k * pi * y / radius);
  });
  for (int b : mesh.surface_nodes()) s[b] = 0.0;
  return s;
}

namespace {

Eigen::Vector2d perp_gradient(const Eigen::Matrix<double, 3, 2>& g, const std::array<int, 3>& tri,
                              const Vector& s) {
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  for (int k = 0; k < 3; ++k) grad += s[tri[k]] * g.row(k).transpose();
  return {grad.y(), -grad.x()};
}

}  // namespace

VelocityPair::VelocityPair(const BulkSurfaceMesh& mesh, const FemOperators& ops, Vector stream,
                           double surface_amplitude, bool surface_from_bulk, Envelope envelope)
    : stream_(std::move(stream)), envelope_(envelope) {
  if (stream_.size() != mesh.num_bulk())
    throw Error(ErrorKind::DimensionMismatch, "stream function length does not match the mesh");
  if (!std::isfinite(surface_amplitude)) throw Error(ErrorKind::InvalidParameter, "surface amplitude not finite");
  // stream function must be constant on the boundary for tangency
  const double s0 = stream_[mesh.surface_nodes()[0]];
  for (int b : mesh.surface_nodes())
    if (std::abs(stream_[b] - s0) > 1e-12 * std::max(1.0, stream_.cwiseAbs().maxCoeff()))
      throw Error(ErrorKind::InvalidParameter, "stream function must be constant on the boundary");

  bulk_.resize(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) bulk_[t] = perp_gradient(ops.tri_grad[t], mesh.triangles()[t], stream_);

  const int ns = mesh.num_surface();
  surface_ = Vector::Constant(ns, surface_amplitude);
  if (surface_from_bulk) {
    std::map<std::pair<int, int>, int> owner;
    for (int t = 0; t < mesh.num_triangles(); ++t)
      for (int k = 0; k < 3; ++k) {
        const int a = mesh.triangles()[t][k], b = mesh.triangles()[t][(k + 1) % 3];
        owner[{std::min(a, b), std::max(a, b)}] = t;
      }
    for (int i = 0; i < ns; ++i) {
      const int a = mesh.surface_nodes()[i], b = mesh.surface_nodes()[(i + 1) % ns];
      const int t = owner.at({std::min(a, b), std::max(a, b)});
      surface_[i] = bulk_[t].dot(ops.edge_tangent[i]);
    }
  }

  double n2 = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) n2 += ops.tri_area[t] * bulk_[t].squaredNorm();
  for (int i = 0; i < ns; ++i) n2 += ops.edge_length[i] * surface_[i] * surface_[i];
  profile_norm_ = std::sqrt(n2);
  zero_ = envelope_.kind == EnvelopeKind::Zero || profile_norm_ == 0.0;
}

VelocitySample VelocityPair::sample(double t) const {
  VelocitySample s;
  const double g = zero_ ? 0.0 : envelope(t);
  s.zero = g == 0.0;
  s.bulk.resize(bulk_.size());
  for (std::size_t i = 0; i < bulk_.size(); ++i) s.bulk[i] = g * bulk_[i];
  s.surface = g * surface_;
  return s;
}

double VelocityPair::profile_max() const {
  double m = surface_.size() ? surface_.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& v : bulk_) m = std::max(m, v.norm());
  return m;
}

VelocityPair VelocityPair::shifted(double offset) const {
  VelocityPair p = *this;
  p.offset_ += offset;
  return p;
}

Vector weak_divergence(const BulkSurfaceMesh& mesh, const FemOperators& ops,
                       const std::vector<Eigen::Vector2d>& v) {
  Vector d = Vector::Zero(mesh.num_bulk());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int k = 0; k < 3; ++k)
      d[mesh.triangles()[t][k]] += ops.tri_area[t] * v[t].dot(ops.tri_grad[t].row(k).transpose());
  return d;
}

Vector boundary_flux(const BulkSurfaceMesh& mesh, const FemOperators& ops,
                     const std::vector<Eigen::Vector2d>& v) {
  const int ns = mesh.num_surface();
  std::map<std::pair<int, int>, int> owner;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int k = 0; k < 3; ++k) {
      const int a = mesh.triangles()[t][k], b = mesh.triangles()[t][(k + 1) % 3];
      owner[{std::min(a, b), std::max(a, b)}] = t;
    }
  Vector flux(ns);
  for (int i = 0; i < ns; ++i) {
    const int a = mesh.surface_nodes()[i], b = mesh.surface_nodes()[(i + 1) % ns];
    const int t = owner.at({std::min(a, b), std::max(a, b)});
    // outward normal of a counter-clockwise cycle
    const Eigen::Vector2d n(ops.edge_tangent[i].y(), -ops.edge_tangent[i].x());
    flux[i] = ops.edge_length[i] * v[t].dot(n);
  }
  return flux;
}

SparseMatrix convection_matrix(const BulkSurfaceMesh& mesh, const FemOperators& ops,
                               const VelocitySample& vel, ConvectionInfo* info) {
  const int nb = ops.num_bulk(), ns = ops.num_surface();
  SparseMatrix c(nb + ns, nb + ns);
  if (info) *info = ConvectionInfo{};
  if (vel.zero) return c;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * mesh.num_triangles() + 4 * ns);
  const auto& x = mesh.nodes();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const Eigen::Vector2d& v = vel.bulk[t];
    if (v.squaredNorm() == 0.0) continue;
    double h = 0.0;
    for (int k = 0; k < 3; ++k) h = std::max(h, (x[tri[(k + 1) % 3]] - x[tri[k]]).norm());
    const double peclet = 0.5 * v.norm() * h;
    // weights of the nodal values in the elementwise phi
    double w[3] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    if (peclet > 2.0) {
      // value at the most upstream vertex
      int up = 0;
      for (int k = 1; k < 3; ++k)
        if (x[tri[k]].dot(v) < x[tri[up]].dot(v)) up = k;
      for (int k = 0; k < 3; ++k) w[k] = k == up ? 1.0 : 0.0;
      if (info) ++info->upwinded;
    }
    if (info) info->max_peclet = std::max(info->max_peclet, peclet);
    for (int k = 0; k < 3; ++k) {
      const double g = ops.tri_area[t] * v.dot(ops.tri_grad[t].row(k).transpose());
      for (int l = 0; l < 3; ++l)
        if (w[l] != 0.0) trip.emplace_back(tri[k], tri[l], g * w[l]);
    }
  }
  for (int i = 0; i < ns; ++i) {
    const int j = (i + 1) % ns;
    // psi linear, w and grad_G xi constant on the edge: exact edge-mean quadrature
    const double q = 0.5 * vel.surface[i];
    if (q == 0.0) continue;
    trip.emplace_back(nb + i, nb + i, -q);
    trip.emplace_back(nb + i, nb + j, -q);
    trip.emplace_back(nb + j, nb + i, q);
    trip.emplace_back(nb + j, nb + j, q);
  }
  c.setFromTriplets(trip.begin(), trip.end());
  return c;
}

Vector convection_load(const BulkSurfaceMesh& mesh, const FemOperators& ops,
                       const VelocitySample& vel, const BulkSurfaceField& field, ConvectionInfo* info) {
  ops.check_dims(field);
  const SparseMatrix c = convection_matrix(mesh, ops, vel, info);
  if (vel.zero) return Vector::Zero(ops.num_bulk() + ops.num_surface());
  return c * field.stacked();
}

D5Report check_D5(const VelocityPair& pair, double a, double horizon) {
  const Envelope& env = pair.envelope_spec();
  const double t0 = pair.t_dec() - pair.offset();
  if (!(a >= 0.0)) throw Error(ErrorKind::InvalidParameter, "D5 rate a must be nonnegative");
  if (!(horizon > t0)) throw Error(ErrorKind::InvalidParameter, "D5 horizon must exceed T_dec");
  D5Report rep;
  rep.monotone = pair.is_zero() || env.monotone_after(pair.t_dec());
  if (pair.is_zero()) {
    rep.finite = true;
    return rep;
  }
  auto f = [&](double s) { return std::exp(a * s) * pair.l2_norm(s); };
  using boost::math::quadrature::gauss_kronrod;
  // split at the envelope kink so each panel is smooth
  double kink = env.onset - pair.offset();
  double integral = 0.0;
  if (kink > t0 && kink < horizon) {
    integral = gauss_kronrod<double, 61>::integrate(f, t0, kink, 15, 1e-14) +
               gauss_kronrod<double, 61>::integrate(f, kink, horizon, 15, 1e-14);
  } else {
    integral = gauss_kronrod<double, 61>::integrate(f, t0, horizon, 15, 1e-14);
  }
  rep.integral = integral;

  const double inf = std::numeric_limits<double>::infinity();
  switch (env.kind) {
    case EnvelopeKind::Zero: rep.tail = 0.0; break;
    case EnvelopeKind::Constant: rep.tail = inf; break;
    case EnvelopeKind::WindowExponential:
    case EnvelopeKind::Exponential:
      // int_H^inf e^{a s} |v|_0 e^{-rate (s + offset - onset)} ds
      rep.tail = env.rate > a ? f(horizon) / (env.rate - a) : inf;
      break;
    case EnvelopeKind::Bump: {
      const double end = env.onset + env.width - pair.offset();
      rep.tail = horizon >= end ? 0.0 : gauss_kronrod<double, 61>::integrate(f, horizon, end, 15, 1e-14);
      break;
    }
  }
  rep.total = rep.integral + rep.tail;
  rep.finite = std::isfinite(rep.total);
  return rep;
}

}  // namespace bscch
