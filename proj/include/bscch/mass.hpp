#pragma once

#include "bscch/fem.hpp"
#include "bscch/params.hpp"

namespace bscch {

/// (beta|Omega|<phi> + |Gamma|<psi>)/(beta^2|Omega| + |Gamma|) for L < inf, (<phi>, <psi>) for L = inf.
MassValue generalized_mean(const BulkSurfaceField& field, const SystemParams& params,
                           const FemOperators& ops);

/// beta*int(phi) + int(psi) for L < inf, (int(phi), int(psi)) for L = inf.
MassValue mass_functional(const BulkSurfaceField& field, const SystemParams& params,
                          const FemOperators& ops);

/// Largest relative deviation between two mass values of the same shape.
double relative_mass_drift(const MassValue& reference, const MassValue& current);

/// Shifts a field by constants so that its generalized mean equals the target: by c*(beta, 1) for
/// L < inf, by (c1, c2) for L = inf. For K = 0 defers to project_mass_on_trace.
void project_mass(BulkSurfaceField& field, const SystemParams& params, const FemOperators& ops);

/// Mass projection that preserves trace(phi) = alpha psi: shift by (alpha c, c) for L < inf; for
/// L = inf shift the surface (and boundary bulk nodes) first, then the interior bulk nodes.
void project_mass_on_trace(BulkSurfaceField& field, const SystemParams& params, const FemOperators& ops);

}  // namespace bscch
