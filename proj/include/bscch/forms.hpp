#pragma once

#include <memory>

#include <Eigen/SparseLU>

#include "bscch/fem.hpp"
#include "bscch/params.hpp"

namespace bscch {

enum class ConstraintMode {
  AffineTrace,  // r = 0: bulk trace = a * surface, enforced by node identification
  Penalty,      // r in (0,inf): chi(r) * int_Gamma (a psi - phi)(a xi - zeta)
  Decoupled,    // r = inf
};

const char* to_string(ConstraintMode mode);

/// <(phi,psi),(zeta,xi)>_{r,a} = int grad phi.grad zeta + int grad_G psi.grad_G xi
///                              + chi(r) int_Gamma (a psi - phi)(a xi - zeta)
/// on stacked [bulk; surface] vectors, together with the prolongation from the constrained
/// (reduced) unknowns. For r = 0 the reduced unknowns are interior bulk nodes followed by the
/// surface nodes; otherwise the prolongation is the identity.
///
/// Holds a reference to the operators, which must outlive the form.
class CouplingForm {
 public:
  CouplingForm(const FemOperators& ops, ExtendedReal r, double a);

  ConstraintMode mode() const { return mode_; }
  double weight() const { return weight_; }
  double a() const { return a_; }
  ExtendedReal r() const { return r_; }
  const FemOperators& ops() const { return *ops_; }

  /// Full form matrix on stacked vectors (size nb + ns).
  const SparseMatrix& matrix() const { return full_; }
  /// Prolongation from reduced unknowns to stacked vectors.
  const SparseMatrix& prolongation() const { return prolong_; }
  /// P^T B P.
  const SparseMatrix& reduced_matrix() const { return reduced_; }
  int reduced_size() const { return static_cast<int>(prolong_.cols()); }

  double apply(const BulkSurfaceField& u, const BulkSurfaceField& v) const;
  /// sqrt(form(u,u)); throws Error(Compatibility) when u violates the affine trace constraint.
  double norm(const BulkSurfaceField& u) const;

  /// max |trace(phi) - a psi| (zero by construction for prolongated fields).
  double constraint_defect(const BulkSurfaceField& u) const;
  bool satisfies_constraint(const BulkSurfaceField& u, double tol = 1e-10) const;

  BulkSurfaceField prolong(const Vector& reduced) const;
  /// Reduced coordinates of a field satisfying the constraint (surface value is the master).
  Vector restrict(const BulkSurfaceField& u) const;

 private:
  const FemOperators* ops_;
  ExtendedReal r_;
  double a_;
  ConstraintMode mode_;
  double weight_;
  SparseMatrix full_;
  SparseMatrix prolong_;
  SparseMatrix reduced_;
};

/// Solution operator S_{L,beta}: for compatible rhs returns the unique u with zero
/// generalized mean and form_{L,beta}(u, v) = -(rhs, v) for every admissible test field v.
/// The pairing (., .) is the lumped L2 product. Mean constraints enter as Lagrange multipliers
/// (one for L < inf, two for L = inf); the saddle system is factorized once.
class EllipticSolver {
 public:
  EllipticSolver(const CouplingForm& form, double beta, bool separate_means);

  BulkSurfaceField solve(const BulkSurfaceField& rhs) const;
  double dual_norm(const BulkSurfaceField& f) const;

  /// Mean defect of a right-hand side: beta*int f_bulk + int f_surface, or the larger of the two
  /// separate integrals for L = inf.
  double compatibility_defect(const BulkSurfaceField& rhs) const;
  /// Tolerance used to reject incompatible right-hand sides.
  double compatibility_tolerance(const BulkSurfaceField& rhs) const;

  /// Projects a field onto the compatible class by subtracting multiples of (beta,1)-weighted
  /// constants (or each component's mean for L = inf).
  BulkSurfaceField make_compatible(BulkSurfaceField rhs) const;

  const CouplingForm& form() const { return *form_; }
  bool separate_means() const { return separate_; }

 private:
  const CouplingForm* form_;
  double beta_;
  bool separate_;
  int nred_;
  int nmult_;
  Eigen::SparseLU<SparseMatrix> lu_;
};

/// Builds the L-form and the solver for the chemical-potential space of the given parameters.
struct DualSpace {
  std::unique_ptr<CouplingForm> form;
  std::unique_ptr<EllipticSolver> solver;
};
DualSpace make_dual_space(const FemOperators& ops, const SystemParams& params);

struct PoincareResult {
  double lambda_min = 0.0;
  double constant = 0.0;  // 1/sqrt(lambda_min)
  int iterations = 0;
  double rq_change = 0.0;
  BulkSurfaceField eigenvector;
};

/// Smallest eigenvalue of form_{K,alpha} against the lumped L2 product on
/// {beta*int phi + int psi = 0} (and the affine trace constraint for K = 0), by inverse power
/// iteration on the constrained pencil. K = inf throws Error(UnsupportedRegime).
PoincareResult poincare_constant(const FemOperators& ops, const SystemParams& params,
                                 double tol = 1e-10, int max_iter = 2000);

}  // namespace bscch
