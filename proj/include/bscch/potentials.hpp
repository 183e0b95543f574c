#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace bscch {

/// Convex part W1 of a split potential. Singular parts live on (-1,1) with W1' -> -/+inf at -/+1;
/// regular parts live on the whole real line. All parts satisfy W1(0) = W1'(0) = 0.
///
/// The *_at_gap overloads evaluate at r = sign * (1 - gap) without forming r, so that points
/// closer to +-1 than the double spacing near 1 stay resolvable. Yosida resolvents of large
/// arguments land there.
class ConvexPart {
 public:
  virtual ~ConvexPart() = default;

  virtual bool singular() const = 0;
  /// Lower bound Theta on W1''.
  virtual double convexity_floor() const = 0;
  virtual std::string name() const = 0;

  virtual double value(double s) const = 0;
  virtual double derivative(double s) const = 0;
  virtual double second_derivative(double s) const = 0;

  virtual double value_at_gap(int sign, double gap) const { return value(sign * (1.0 - gap)); }
  virtual double derivative_at_gap(int sign, double gap) const {
    return derivative(sign * (1.0 - gap));
  }
  virtual double second_derivative_at_gap(int sign, double gap) const {
    return second_derivative(sign * (1.0 - gap));
  }
  /// W1' at gap = exp(log_gap); stays finite when the gap itself underflows.
  virtual double derivative_at_log_gap(int sign, double log_gap) const {
    return derivative_at_gap(sign, std::exp(log_gap));
  }
  /// gap * W1''; finite for the log entropy even at gap = 0.
  virtual double gap_times_second_derivative(int sign, double gap) const {
    return gap * second_derivative_at_gap(sign, gap);
  }
};

/// Flory-Huggins entropy (Theta/2)[(1+s)ln(1+s) + (1-s)ln(1-s)].
class LogEntropy final : public ConvexPart {
 public:
  explicit LogEntropy(double theta);
  bool singular() const override { return true; }
  double convexity_floor() const override { return theta_; }
  std::string name() const override { return "log"; }
  double value(double s) const override;
  double derivative(double s) const override;
  double second_derivative(double s) const override;
  double value_at_gap(int sign, double gap) const override;
  double derivative_at_gap(int sign, double gap) const override;
  double second_derivative_at_gap(int sign, double gap) const override;
  double derivative_at_log_gap(int sign, double log_gap) const override;
  double gap_times_second_derivative(int sign, double gap) const override;
  double theta() const { return theta_; }

 private:
  double theta_;
};

/// c*s^2/2 on the whole line. Test double with closed-form resolvent s/(1 + lambda*c).
class QuadraticPart final : public ConvexPart {
 public:
  explicit QuadraticPart(double c);
  bool singular() const override { return false; }
  double convexity_floor() const override { return c_; }
  std::string name() const override { return "quadratic"; }
  double value(double s) const override { return 0.5 * c_ * s * s; }
  double derivative(double s) const override { return c_ * s; }
  double second_derivative(double) const override { return c_; }

 private:
  double c_;
};

/// Result of inverting r + lambda*W1'(r) = s. `gap` is 1 - |r| for singular parts and is
/// accurate even when `value` rounds to +-1.
struct Resolvent {
  double value = 0.0;
  double gap = 1.0;
  /// ln(gap); meaningful when near_edge, where gap may underflow to 0.
  double log_gap = 0.0;
  int sign = 0;
  /// True when the root was resolved in the gap variable (|r| > 1/2 for singular parts).
  bool near_edge = false;
  /// |r + lambda*W1'(r) - s| evaluated through the gap representation.
  double residual = 0.0;
  int iterations = 0;
};

/// (I + lambda*W1')^{-1}(s) by bracketed Newton with bisection fallback.
Resolvent yosida_resolvent(const ConvexPart& part, double lambda, double s);
/// W1_lambda'(s) = (s - r)/lambda.
double yosida_derivative(const ConvexPart& part, double lambda, double s);

/// Moreau-Yosida regularization of a convex part at level lambda. Defined on all of R.
class YosidaPart final : public ConvexPart {
 public:
  YosidaPart(std::shared_ptr<const ConvexPart> base, double lambda);
  bool singular() const override { return false; }
  /// Theta/(1 + lambda*Theta), which is >= Theta/(1+Theta) for lambda <= 1.
  double convexity_floor() const override;
  std::string name() const override { return "yosida(" + base_->name() + ")"; }
  double value(double s) const override;
  double derivative(double s) const override;
  /// W1''(r)/(1 + lambda*W1''(r)) at r = resolvent(s).
  double second_derivative(double s) const override;
  double lambda() const { return lambda_; }
  const ConvexPart& base() const { return *base_; }

 private:
  std::shared_ptr<const ConvexPart> base_;
  double lambda_;
};

/// Smooth part W2(s) = curvature*s^2/2 + slope*s; W2' is Lipschitz with constant |curvature|.
struct SmoothPart {
  double curvature = 0.0;
  double slope = 0.0;
  double value(double s) const { return 0.5 * curvature * s * s + slope * s; }
  double derivative(double s) const { return curvature * s + slope; }
  double lipschitz() const { return curvature < 0 ? -curvature : curvature; }
};

/// W = W1 + W2 with W1 convex (possibly singular) and W2 smooth.
class SplitPotential {
 public:
  SplitPotential() = default;
  SplitPotential(std::shared_ptr<const ConvexPart> convex, SmoothPart smooth);

  const ConvexPart& convex() const { return *convex_; }
  std::shared_ptr<const ConvexPart> convex_ptr() const { return convex_; }
  const SmoothPart& smooth() const { return smooth_; }
  bool singular() const { return convex_->singular(); }

  /// W(s). For singular parts valid on [-1,1] (finite endpoint values); throws outside.
  double value(double s) const;
  /// W'(s). For singular parts throws SingularDomainError unless |s| < 1.
  double derivative(double s) const;
  /// (W(s), W'(s)); singular parts require |s| < 1.
  std::pair<double, double> eval(double s) const;

  /// Same smooth part, convex part replaced by its Yosida regularization.
  SplitPotential regularized(double lambda) const;

 private:
  std::shared_ptr<const ConvexPart> convex_;
  SmoothPart smooth_;
};

/// W_log(s) = (Theta/2)[(1+s)ln(1+s) + (1-s)ln(1-s)] - (Theta_c/2)s^2.
SplitPotential make_log_potential(double theta, double theta_c);
/// c*s^2/2 + smooth part; regular everywhere. Test double only.
SplitPotential make_quadratic_potential(double c, SmoothPart smooth = {});

struct DominationReport {
  /// min over samples of kappa1*|G1'(s)| + kappa2 - |F1'(alpha*s)|. Negative means violation.
  double worst_margin = 0.0;
  double worst_at = 0.0;
  /// Smallest kappa2 making the bound hold on the sample for the given kappa1.
  double admissible_kappa2 = 0.0;
  int samples = 0;
  bool satisfied() const { return worst_margin >= 0.0; }
};

/// Samples |F1'(alpha s)| <= kappa1 |G1'(s)| + kappa2. Without lambda the sample is a uniform
/// grid in (-1,1); with lambda the Yosida derivatives are used on a grid in [-3,3].
DominationReport check_domination(const ConvexPart& f, const ConvexPart& g, double alpha,
                                  std::optional<double> lambda, int sample_count, double kappa1,
                                  double kappa2);

}  // namespace bscch
