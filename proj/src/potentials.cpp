#include "bscch/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bscch/errors.hpp"

namespace bscch {

namespace {

constexpr double kEndpointClamp = 1e-15;
constexpr double kMinLogGap = -700.0;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << what << " must be positive and finite, got " << v;
    throw Error(ErrorKind::InvalidParameter, os.str());
  }
}

// x*ln(x) with the continuous extension 0 at x = 0.
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

[[noreturn]] void singular_throw(double s) {
  std::ostringstream os;
  os << "singular potential evaluated at " << s << ", outside (-1,1)";
  throw SingularDomainError(os.str(), s);
}

}  // namespace

// ---------------------------------------------------------------------------------------------

LogEntropy::LogEntropy(double theta) : theta_(theta) { require_positive(theta, "Theta"); }

double LogEntropy::value(double s) const {
  if (!(std::abs(s) <= 1.0)) singular_throw(s);
  const double a = std::max(1.0 + s, 0.0);
  const double b = std::max(1.0 - s, 0.0);
  return 0.5 * theta_ * (xlogx(a) + xlogx(b));
}

double LogEntropy::derivative(double s) const {
  if (!(std::abs(s) < 1.0)) singular_throw(s);
  const double c = std::clamp(s, -1.0 + kEndpointClamp, 1.0 - kEndpointClamp);
  return theta_ * std::atanh(c);
}

double LogEntropy::second_derivative(double s) const {
  if (!(std::abs(s) < 1.0)) singular_throw(s);
  const double c = std::clamp(s, -1.0 + kEndpointClamp, 1.0 - kEndpointClamp);
  return theta_ / ((1.0 - c) * (1.0 + c));
}

double LogEntropy::value_at_gap(int, double gap) const {
  // symmetric in s: (2-d)ln(2-d) + d ln d
  return 0.5 * theta_ * (xlogx(2.0 - gap) + xlogx(gap));
}

double LogEntropy::derivative_at_gap(int sign, double gap) const {
  return sign * 0.5 * theta_ * (std::log(2.0 - gap) - std::log(gap));
}

double LogEntropy::second_derivative_at_gap(int, double gap) const {
  return theta_ / (gap * (2.0 - gap));
}

double LogEntropy::derivative_at_log_gap(int sign, double log_gap) const {
  return sign * 0.5 * theta_ * (std::log(2.0 - std::exp(log_gap)) - log_gap);
}

double LogEntropy::gap_times_second_derivative(int, double gap) const {
  return theta_ / (2.0 - gap);
}

QuadraticPart::QuadraticPart(double c) : c_(c) { require_positive(c, "quadratic curvature"); }

// ---------------------------------------------------------------------------------------------

namespace {

Resolvent resolve_regular(const ConvexPart& part, double lambda, double s,
                          double bound = std::numeric_limits<double>::infinity()) {
  Resolvent res;
  res.sign = (s > 0) - (s < 0);
  double lo = std::max(std::min(0.0, s), -bound), hi = std::min(std::max(0.0, s), bound);
  double r = s / (1.0 + lambda * part.second_derivative(0.0));
  if (r < lo || r > hi) r = 0.5 * (lo + hi);
  const double tol = 1e-12 * (1.0 + std::abs(s));
  for (int it = 0; it < 200; ++it) {
    const double h = r + lambda * part.derivative(r) - s;
    res.iterations = it;
    if (std::abs(h) <= tol * 1e-2 || hi - lo <= std::numeric_limits<double>::epsilon() * (1 + std::abs(r)))
      break;
    if (h > 0) hi = r; else lo = r;
    const double dh = 1.0 + lambda * part.second_derivative(r);
    double next = r - h / dh;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    r = next;
  }
  res.value = r;
  res.gap = std::numeric_limits<double>::infinity();
  res.residual = std::abs(r + lambda * part.derivative(r) - s);
  return res;
}

// Singular part: write r = sign*(1 - d) and solve in t = ln d, where the residual
// h(t) = (1 - d) + lambda*|W1'(r)| - |s| is decreasing in t.
Resolvent resolve_singular(const ConvexPart& part, double lambda, double s) {
  Resolvent res;
  if (s == 0.0) {
    res.value = 0.0;
    res.gap = 1.0;
    res.sign = 0;
    return res;
  }
  const int sign = s > 0 ? 1 : -1;
  const double as = std::abs(s);
  auto h_of = [&](double t) {
    const double d = std::exp(t);
    return (1.0 - d) + lambda * sign * part.derivative_at_log_gap(sign, t) - as;
  };
  // Roots with |r| <= 1/2 are resolved in r directly, where 1 - d would lose digits.
  if (h_of(std::log(0.5)) >= 0.0) {
    Resolvent inner = resolve_regular(part, lambda, s, 0.5);
    inner.gap = 1.0 - std::abs(inner.value);
    inner.sign = sign;
    return inner;
  }
  // h -> +inf as t -> -inf; very large |s|/lambda pushes the gap below the double range,
  // which the log variable still represents.
  double t_lo = kMinLogGap, t_hi = std::log(0.5);
  while (h_of(t_lo) <= 0.0) {
    t_hi = t_lo;
    t_lo *= 2.0;
  }
  double t = 0.5 * (t_lo + t_hi);
  const double tol = 1e-12 * (1.0 + as);
  double h = h_of(t);
  int it = 0;
  for (; it < 300; ++it) {
    if (std::abs(h) <= 1e-2 * tol) break;
    if (h > 0) t_lo = t; else t_hi = t;
    if (t_hi - t_lo <= 1e-15 * (1.0 + std::abs(t))) break;
    const double d = std::exp(t);
    // dh/dt = d * dh/dd = -d - lambda*d*W1''(r)
    const double dh = -d - lambda * part.gap_times_second_derivative(sign, d);
    double next = (dh != 0.0 && std::isfinite(dh)) ? t - h / dh : 0.5 * (t_lo + t_hi);
    if (!(next > t_lo && next < t_hi)) next = 0.5 * (t_lo + t_hi);
    t = next;
    h = h_of(t);
  }
  const double d = std::exp(t);
  res.sign = sign;
  res.near_edge = true;
  res.gap = d;
  res.log_gap = t;
  res.value = sign * (1.0 - d);
  res.residual = std::abs(h);
  res.iterations = it;
  return res;
}

}  // namespace

Resolvent yosida_resolvent(const ConvexPart& part, double lambda, double s) {
  require_positive(lambda, "lambda");
  if (!std::isfinite(s)) throw Error(ErrorKind::InvalidParameter, "resolvent argument not finite");
  return part.singular() ? resolve_singular(part, lambda, s) : resolve_regular(part, lambda, s);
}

double yosida_derivative(const ConvexPart& part, double lambda, double s) {
  const Resolvent r = yosida_resolvent(part, lambda, s);
  if (r.near_edge) {
    // s - r = s - sign + sign*gap, formed without cancellation in r
    return ((s - r.sign) + r.sign * r.gap) / lambda;
  }
  return (s - r.value) / lambda;
}

// ---------------------------------------------------------------------------------------------

YosidaPart::YosidaPart(std::shared_ptr<const ConvexPart> base, double lambda)
    : base_(std::move(base)), lambda_(lambda) {
  require_positive(lambda, "lambda");
  if (!base_) throw Error(ErrorKind::InvalidParameter, "Yosida regularization of a null part");
}

double YosidaPart::convexity_floor() const {
  const double th = base_->convexity_floor();
  return th / (1.0 + lambda_ * th);
}

double YosidaPart::value(double s) const {
  const Resolvent r = yosida_resolvent(*base_, lambda_, s);
  double base_value, diff;
  if (r.near_edge) {
    base_value = base_->value_at_gap(r.sign, r.gap);
    diff = (s - r.sign) + r.sign * r.gap;
  } else {
    base_value = base_->value(r.value);
    diff = s - r.value;
  }
  return base_value + diff * diff / (2.0 * lambda_);
}

double YosidaPart::derivative(double s) const { return yosida_derivative(*base_, lambda_, s); }

double YosidaPart::second_derivative(double s) const {
  const Resolvent r = yosida_resolvent(*base_, lambda_, s);
  const double w2 = r.near_edge
                        ? base_->second_derivative_at_gap(r.sign, r.gap)
                        : base_->second_derivative(r.value);
  return 1.0 / (1.0 / w2 + lambda_);
}

// ---------------------------------------------------------------------------------------------

SplitPotential::SplitPotential(std::shared_ptr<const ConvexPart> convex, SmoothPart smooth)
    : convex_(std::move(convex)), smooth_(smooth) {
  if (!convex_) throw Error(ErrorKind::InvalidParameter, "split potential needs a convex part");
}

double SplitPotential::value(double s) const { return convex_->value(s) + smooth_.value(s); }

double SplitPotential::derivative(double s) const {
  return convex_->derivative(s) + smooth_.derivative(s);
}

std::pair<double, double> SplitPotential::eval(double s) const {
  if (convex_->singular() && !(std::abs(s) < 1.0)) singular_throw(s);
  return {value(s), derivative(s)};
}

SplitPotential SplitPotential::regularized(double lambda) const {
  return SplitPotential(std::make_shared<YosidaPart>(convex_, lambda), smooth_);
}

SplitPotential make_log_potential(double theta, double theta_c) {
  if (!std::isfinite(theta_c)) throw Error(ErrorKind::InvalidParameter, "Theta_c must be finite");
  return SplitPotential(std::make_shared<LogEntropy>(theta), SmoothPart{-theta_c, 0.0});
}

SplitPotential make_quadratic_potential(double c, SmoothPart smooth) {
  return SplitPotential(std::make_shared<QuadraticPart>(c), smooth);
}

// ---------------------------------------------------------------------------------------------

DominationReport check_domination(const ConvexPart& f, const ConvexPart& g, double alpha,
                                  std::optional<double> lambda, int sample_count, double kappa1,
                                  double kappa2) {
  if (alpha < -1.0 || alpha > 1.0) throw Error(ErrorKind::InvalidParameter, "alpha outside [-1,1]");
  if (sample_count < 2) throw Error(ErrorKind::InvalidParameter, "need at least two samples");
  DominationReport rep;
  rep.samples = sample_count;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  const double half_width = lambda ? 3.0 : 1.0;
  for (int i = 0; i < sample_count; ++i) {
    // open grid: endpoints excluded
    const double s = -half_width + 2.0 * half_width * (i + 1) / (sample_count + 1);
    double fd, gd;
    if (lambda) {
      fd = yosida_derivative(f, *lambda, alpha * s);
      gd = yosida_derivative(g, *lambda, s);
    } else {
      fd = f.derivative(alpha * s);
      gd = g.derivative(s);
    }
    const double excess = std::abs(fd) - kappa1 * std::abs(gd);
    rep.admissible_kappa2 = std::max(rep.admissible_kappa2, excess);
    const double margin = kappa2 - excess;
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_at = s;
    }
  }
  return rep;
}

}  // namespace bscch
