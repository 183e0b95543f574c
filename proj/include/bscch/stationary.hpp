#pragma once

#include <vector>

#include "bscch/fem.hpp"
#include "bscch/timestepper.hpp"

namespace bscch {

/// Constant chemical potentials. For L < inf, mu = beta * theta is structural: only theta is free.
struct Multipliers {
  double mu = 0.0;
  double theta = 0.0;
};

struct StationaryResidual {
  /// Weak residual <phi, eta>_K + (W'(phi) - multipliers, eta) against the nodal basis of the
  /// constrained space, prolongated to a field and divided by the lumped masses.
  BulkSurfaceField field;
  double norm = 0.0;  // max |field|
};

/// Throws SingularDomainError for non-interior candidates of a singular potential.
StationaryResidual stationary_residual(const Problem& problem, const BulkSurfaceField& candidate,
                                       const Multipliers& m);

/// Multipliers minimizing the mass-weighted residual for a given candidate (exact for solutions).
Multipliers fit_multipliers(const Problem& problem, const BulkSurfaceField& candidate);

struct StationaryOptions {
  double tol = 1e-10;
  int max_iter = 50;
};

struct StationarySolution {
  BulkSurfaceField phi;
  Multipliers multipliers;
  double residual = 0.0;      // stationary_residual norm
  double mass_defect = 0.0;   // relative, as relative_mass_drift against the target
  int iterations = 0;
  std::vector<double> history;  // residual per iterate, starting with the guess
  /// max of r_{k+1} / r_k^2 over the last three iterates (0 when fewer are available).
  double quadratic_ratio = 0.0;
  double delta_star = 0.0;
};

/// Damped Newton on field unknowns, multipliers and mass rows, with Armijo backtracking on the
/// residual and a fraction-to-boundary guard for singular potentials. The guess must be interior,
/// satisfy the trace constraint for K = 0 and carry the target mass.
StationarySolution newton_solve(const Problem& problem, const BulkSurfaceField& guess,
                                const StationaryOptions& opts = {});

/// 1 - max nodal |value|.
double separation_width(const BulkSurfaceField& phi);

/// Multipliers from the integral identities: for L < inf
///   theta = (alpha int F'(phi) + int G'(psi)) / (alpha beta |Omega| + |Gamma|),  mu = beta theta;
/// for L = inf the boundary flux int_Gamma d_n phi is replaced by int_Omega (F'(phi) - mu) with the
/// supplied mu (weak identity), giving
///   mu = (int F'(phi) - flux) / |Omega|,  theta = (int G'(psi) + alpha flux) / |Gamma|.
Multipliers multiplier_formulas(const Problem& problem, const StationarySolution& sol);

/// Largest |dE/ds| over random directions that preserve mass and the trace constraint, normalized
/// by the lumped L2 norm of the direction. Zero (up to rounding) at critical points.
double criticality_defect(const Problem& problem, const BulkSurfaceField& phi, int directions,
                          unsigned seed);

}  // namespace bscch
