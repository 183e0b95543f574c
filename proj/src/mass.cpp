#include "bscch/mass.hpp"

#include <algorithm>
#include <cmath>

#include "bscch/errors.hpp"

namespace bscch {

MassValue mass_functional(const BulkSurfaceField& field, const SystemParams& params,
                          const FemOperators& ops) {
  ops.check_dims(field);
  const double ib = ops.bulk_lumped.dot(field.bulk);
  const double is = ops.surface_lumped.dot(field.surface);
  if (params.L.is_infinite()) return MassPair{ib, is};
  return params.beta * ib + is;
}

MassValue generalized_mean(const BulkSurfaceField& field, const SystemParams& params,
                           const FemOperators& ops) {
  const auto g = ops.geometry();
  const MassValue total = mass_functional(field, params, ops);
  if (const auto* p = std::get_if<MassPair>(&total))
    return MassPair{p->bulk / g.bulk_measure, p->surface / g.surface_measure};
  return std::get<double>(total) / (params.beta * params.beta * g.bulk_measure + g.surface_measure);
}

double relative_mass_drift(const MassValue& reference, const MassValue& current) {
  auto rel = [](double a, double b) { return std::abs(b - a) / std::max(1.0, std::abs(a)); };
  if (reference.index() != current.index())
    throw Error(ErrorKind::DimensionMismatch, "mass values of different shape");
  if (const auto* p = std::get_if<MassPair>(&reference)) {
    const auto& q = std::get<MassPair>(current);
    return std::max(rel(p->bulk, q.bulk), rel(p->surface, q.surface));
  }
  return rel(std::get<double>(reference), std::get<double>(current));
}

void project_mass(BulkSurfaceField& field, const SystemParams& params, const FemOperators& ops) {
  if (params.K.is_zero()) {
    project_mass_on_trace(field, params, ops);
    return;
  }
  const MassValue mean = generalized_mean(field, params, ops);
  if (const auto* p = std::get_if<MassPair>(&mean)) {
    const auto& target = std::get<MassPair>(params.mass_target);
    field.bulk.array() += target.bulk - p->bulk;
    field.surface.array() += target.surface - p->surface;
    return;
  }
  // the pair (beta c, c) has generalized mean c
  const double c = std::get<double>(params.mass_target) - std::get<double>(mean);
  field.bulk.array() += params.beta * c;
  field.surface.array() += c;
}

void project_mass_on_trace(BulkSurfaceField& field, const SystemParams& params, const FemOperators& ops) {
  ops.check_dims(field);
  const auto g = ops.geometry();
  const double a = params.alpha;
  const double ib = ops.bulk_lumped.dot(field.bulk), is = ops.surface_lumped.dot(field.surface);
  if (const auto* t = std::get_if<MassPair>(&params.mass_target)) {
    // surface first, carrying the boundary bulk nodes along; then the interior nodes fix the bulk
    const double c2 = t->surface - is / g.surface_measure;
    Vector boundary = Vector::Zero(ops.num_bulk());
    for (int k = 0; k < ops.trace.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(ops.trace, k); it; ++it) boundary[it.col()] = 1.0;
    field.surface.array() += c2;
    field.bulk += a * c2 * boundary;
    const Vector interior = Vector::Ones(ops.num_bulk()) - boundary;
    const double interior_measure = ops.bulk_lumped.dot(interior);
    if (!(interior_measure > 0.0))
      throw Error(ErrorKind::Compatibility, "mass projection: mesh has no interior nodes");
    const double c1 = (t->bulk * g.bulk_measure - ops.bulk_lumped.dot(field.bulk)) / interior_measure;
    field.bulk += c1 * interior;
    return;
  }
  // (alpha c, c) keeps trace = alpha psi; A2 makes the shift well defined
  const double denom = a * params.beta * g.bulk_measure + g.surface_measure;
  const double target = std::get<double>(params.total_mass_target(g));
  const double c = (target - (params.beta * ib + is)) / denom;
  field.bulk.array() += a * c;
  field.surface.array() += c;
}

}  // namespace bscch
