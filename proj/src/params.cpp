#include "bscch/params.hpp"

#include <cmath>
#include <sstream>

#include "bscch/errors.hpp"

namespace bscch {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid_parameter";
    case ErrorKind::SingularDomain: return "singular_domain";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::Compatibility: return "compatibility";
    case ErrorKind::Assembly: return "assembly";
    case ErrorKind::Resource: return "resource";
    case ErrorKind::Nonconvergence: return "nonconvergence";
    case ErrorKind::UnsupportedRegime: return "unsupported_regime";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

ExtendedReal ExtendedReal::finite(double v) {
  if (!std::isfinite(v) || v < 0.0) {
    std::ostringstream os;
    os << "coupling constant must lie in [0, inf], got " << v;
    throw Error(ErrorKind::InvalidParameter, os.str());
  }
  return ExtendedReal(v, false);
}

double ExtendedReal::value() const {
  if (infinite_) throw Error(ErrorKind::InvalidParameter, "value() called on the infinity sentinel");
  return value_;
}

std::string ExtendedReal::to_string() const {
  if (infinite_) return "infinity";
  std::ostringstream os;
  os << value_;
  return os.str();
}

double chi(ExtendedReal r) {
  if (r.is_infinite() || r.is_zero()) return 0.0;
  return 1.0 / r.value();
}

double admissibility_tolerance(const DomainGeometry& geom) {
  return 1e-12 * (geom.bulk_measure + geom.surface_measure);
}

void SystemParams::validate(const DomainGeometry& geom) const {
  auto fail = [](const std::string& rule, const std::string& msg) {
    throw Error(ErrorKind::InvalidParameter, rule + ": " + msg);
  };
  if (!(geom.bulk_measure > 0.0) || !(geom.surface_measure > 0.0))
    fail("A1", "domain measures must be positive");
  if (!std::isfinite(alpha) || alpha < -1.0 || alpha > 1.0) fail("A2", "alpha must lie in [-1,1]");
  if (!std::isfinite(beta)) fail("A2", "beta must be finite");
  const double det = alpha * beta * geom.bulk_measure + geom.surface_measure;
  if (std::abs(det) <= admissibility_tolerance(geom))
    fail("A2", "alpha*beta*|Omega| + |Gamma| must be nonzero");

  if (L.is_infinite()) {
    const auto* pair = std::get_if<MassPair>(&mass_target);
    if (pair == nullptr) fail("D1", "L = infinity requires a mass pair (m1, m2)");
    if (!(std::abs(pair->bulk) < 1.0) || !(std::abs(pair->surface) < 1.0))
      fail("D1", "m1 and m2 must lie in (-1,1)");
  } else {
    const auto* m = std::get_if<double>(&mass_target);
    if (m == nullptr) fail("D1", "L < infinity requires a single mass value m");
    if (!(std::abs(*m) < 1.0)) fail("D1", "m must lie in (-1,1)");
    if (!(std::abs(beta * *m) < 1.0)) fail("D1", "beta*m must lie in (-1,1)");
  }
}

MassValue SystemParams::total_mass_target(const DomainGeometry& geom) const {
  if (const auto* pair = std::get_if<MassPair>(&mass_target))
    return MassPair{pair->bulk * geom.bulk_measure, pair->surface * geom.surface_measure};
  const double m = std::get<double>(mass_target);
  return m * (beta * beta * geom.bulk_measure + geom.surface_measure);
}

}  // namespace bscch
