#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "bscch/fem.hpp"
#include "bscch/mesh.hpp"

namespace bscch {

enum class EnvelopeKind {
  Zero,
  Constant,
  WindowExponential,  // 1 up to onset, then exp(-rate (t - onset))
  Exponential,        // exp(-rate (t - onset)) for all t
  Bump,               // smooth bump supported on (onset, onset + width)
};

const char* to_string(EnvelopeKind kind);
EnvelopeKind envelope_kind_from_string(const std::string& name);

struct Envelope {
  EnvelopeKind kind = EnvelopeKind::Zero;
  double rate = 0.0;
  double onset = 0.0;
  double width = 1.0;

  double operator()(double t) const;
  /// True when the envelope is non-increasing on [from, inf).
  bool monotone_after(double from) const;
};

/// Default envelope min(1, exp(-2a (t - T_dec))).
Envelope default_envelope(double a, double t_dec);

/// P1 stream functions vanishing on the boundary circle of radius R.
/// rotation: A (1 - r^2/R^2), giving rigid-like counter-clockwise rotation.
/// cellular: A (1 - r^2/R^2) sin(k pi x/R) sin(k pi y/R).
Vector stream_rotation(const BulkSurfaceMesh& mesh, double amplitude, double radius);
Vector stream_cellular(const BulkSurfaceMesh& mesh, double amplitude, double radius, int k);

/// Velocities at one time: elementwise-constant bulk field and per-edge tangential amplitudes
/// (w = amplitude * unit tangent of the boundary edge).
struct VelocitySample {
  std::vector<Eigen::Vector2d> bulk;
  Vector surface;
  bool zero = true;
};

/// Prescribed (v, w): v is the perpendicular gradient of a P1 stream function that is constant
/// on the boundary, w a tangential field along the polyline. Both are scaled by a scalar
/// envelope. When surface_from_bulk is set (K = 0 regime) the surface amplitude on each edge is
/// the tangential component of the bulk velocity in the adjacent triangle.
class VelocityPair {
 public:
  /// Zero velocity.
  VelocityPair() = default;
  VelocityPair(const BulkSurfaceMesh& mesh, const FemOperators& ops, Vector stream,
               double surface_amplitude, bool surface_from_bulk, Envelope envelope);

  VelocitySample sample(double t) const;
  double envelope(double t) const { return envelope_(t + offset_); }
  const Envelope& envelope_spec() const { return envelope_; }
  /// Decay onset T_dec (the envelope onset).
  double t_dec() const { return envelope_.onset; }

  /// ||(v(t), w(t))||_{L2(Omega) x L2(Gamma)}.
  double l2_norm(double t) const { return envelope(t) * profile_norm_; }
  double profile_norm() const { return profile_norm_; }
  /// max |v| over triangles and |w| over edges at envelope 1.
  double profile_max() const;
  bool is_zero() const { return zero_; }

  /// Same pair evaluated at t + offset (pullback translation).
  VelocityPair shifted(double offset) const;
  double offset() const { return offset_; }

  const std::vector<Eigen::Vector2d>& bulk_profile() const { return bulk_; }
  const Vector& surface_profile() const { return surface_; }
  const Vector& stream() const { return stream_; }

 private:
  std::vector<Eigen::Vector2d> bulk_;
  Vector surface_;
  Vector stream_;
  Envelope envelope_;
  double offset_ = 0.0;
  double profile_norm_ = 0.0;
  bool zero_ = true;
};

/// Weak divergence int v . grad q for every P1 hat function q (length num_bulk).
Vector weak_divergence(const BulkSurfaceMesh& mesh, const FemOperators& ops, const std::vector<Eigen::Vector2d>& v);
/// Flux of v through every boundary edge.
Vector boundary_flux(const BulkSurfaceMesh& mesh, const FemOperators& ops,
                     const std::vector<Eigen::Vector2d>& v);

struct ConvectionInfo {
  /// Triangles where the local Peclet number |v| h / 2 exceeded 2 and upwinding was applied.
  int upwinded = 0;
  double max_peclet = 0.0;
};

/// Matrix C with C * (phi; psi) equal to the convection load below. Bulk phi is the element mean,
/// or the upstream vertex value when the local Peclet number exceeds 2.
SparseMatrix convection_matrix(const BulkSurfaceMesh& mesh, const FemOperators& ops,
                               const VelocitySample& vel, ConvectionInfo* info = nullptr);

/// Stacked load [int phi v . grad zeta_j ; int psi w . grad_G xi_j] for all hat functions.
Vector convection_load(const BulkSurfaceMesh& mesh, const FemOperators& ops,
                       const VelocitySample& vel, const BulkSurfaceField& field,
                       ConvectionInfo* info = nullptr);

struct D5Report {
  double integral = 0.0;   // quadrature over [T_dec, horizon]
  double tail = 0.0;       // analytic tail beyond the horizon (inf if divergent)
  double total = 0.0;
  bool finite = false;
  bool monotone = false;
  bool satisfied() const { return finite && monotone; }
};

/// int_{T_dec}^inf e^{a s} ||(v(s), w(s))|| ds by Gauss-Kronrod quadrature up to the horizon
/// plus the closed-form tail of the envelope.
D5Report check_D5(const VelocityPair& pair, double a, double horizon);

}  // namespace bscch
