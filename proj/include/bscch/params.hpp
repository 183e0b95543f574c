#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>

namespace bscch {

/// Value in [0, inf]. Infinity is a sentinel and never enters arithmetic.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  static ExtendedReal finite(double v);
  static constexpr ExtendedReal infinity() { return ExtendedReal(0.0, true); }

  bool is_infinite() const noexcept { return infinite_; }
  bool is_zero() const noexcept { return !infinite_ && value_ == 0.0; }
  bool is_positive_finite() const noexcept { return !infinite_ && value_ > 0.0; }
  /// Throws InvalidParameter when infinite.
  double value() const;
  std::string to_string() const;

  friend bool operator==(const ExtendedReal&, const ExtendedReal&) = default;

 private:
  constexpr ExtendedReal(double v, bool inf) : value_(v), infinite_(inf) {}
  double value_ = 0.0;
  bool infinite_ = false;
};

/// 1/r on (0, inf), 0 at r = 0 and r = inf.
double chi(ExtendedReal r);

struct DomainGeometry {
  double bulk_measure = 0.0;     // |Omega|
  double surface_measure = 0.0;  // |Gamma|
};

/// Total-mass targets. One value for L < inf, a (bulk, surface) pair for L = inf.
struct MassPair {
  double bulk = 0.0;
  double surface = 0.0;
  friend bool operator==(const MassPair&, const MassPair&) = default;
};
using MassValue = std::variant<double, MassPair>;

struct SystemParams {
  ExtendedReal K;
  ExtendedReal L;
  double alpha = 1.0;
  double beta = 1.0;
  /// Mean-value target m (L < inf) or (m1, m2) (L = inf), as constrained by D1.
  MassValue mass_target = 0.0;

  double chi_K() const { return chi(K); }
  double chi_L() const { return chi(L); }
  bool mass_pair() const { return L.is_infinite(); }

  /// Checks alpha in [-1,1], alpha*beta*|Omega| + |Gamma| != 0 and D1. Throws InvalidParameter
  /// with the violated rule name.
  void validate(const DomainGeometry& geom) const;

  /// Total-mass form of the target (beta*|Omega|*m... see mass_functional).
  MassValue total_mass_target(const DomainGeometry& geom) const;
};

/// Scale-relative rejection threshold for alpha*beta*|Omega| + |Gamma|.
double admissibility_tolerance(const DomainGeometry& geom);

}  // namespace bscch
