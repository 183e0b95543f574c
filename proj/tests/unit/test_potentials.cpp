#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "bscch/errors.hpp"
#include "bscch/potentials.hpp"

using namespace bscch;

namespace {

// Plain bisection on r + lambda*Theta*atanh(r) = s over (-1,1). Independent of the library solver.
double bisect_log_resolvent(double theta, double lambda, double s) {
  double lo = -1.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double h = mid + lambda * theta * std::atanh(mid) - s;
    if (h > 0) hi = mid; else lo = mid;
  }
  return 0.5 * (lo + hi);
}

double oracle_yosida_derivative(double theta, double lambda, double s) {
  return (s - bisect_log_resolvent(theta, lambda, s)) / lambda;
}

}  // namespace

TEST_CASE("log potential values") {
  const auto w = make_log_potential(1.0, 2.0);
  auto [v0, d0] = w.eval(0.0);
  CHECK(v0 == 0.0);
  CHECK(d0 == 0.0);
  auto [v, d] = w.eval(0.5);
  const double expected_v = 0.5 * (1.5 * std::log(1.5) + 0.5 * std::log(0.5)) - 0.25;
  CHECK(v == doctest::Approx(expected_v).epsilon(1e-14));
  CHECK(v == doctest::Approx(-0.11919).epsilon(1e-4));
  CHECK(d == doctest::Approx(0.5 * std::log(3.0) - 1.0).epsilon(1e-14));
  CHECK_THROWS_AS(w.eval(1.0), SingularDomainError);
  CHECK_THROWS_AS(w.eval(-1.5), SingularDomainError);
  // endpoint values are finite: (Theta/2) * 2 ln 2 - Theta_c/2
  CHECK(w.value(1.0) == doctest::Approx(std::log(2.0) - 1.0));
}

TEST_CASE("log entropy structure") {
  LogEntropy e(1.0);
  CHECK(e.value(0.0) == 0.0);
  CHECK(e.derivative(0.0) == 0.0);
  for (int i = 1; i < 2000; ++i) {
    const double s = -1.0 + i / 1000.0;
    CHECK(e.second_derivative(s) >= e.convexity_floor());
  }
  // W1' diverges at the endpoints; resolved through the gap form
  CHECK(e.derivative_at_gap(1, 1e-300) > 300.0);
  CHECK(e.derivative_at_gap(-1, 1e-300) < -300.0);
  CHECK(e.derivative(1 - 1e-6) > e.derivative(1 - 1e-3));
  CHECK(e.derivative(1 - 1e-6) == doctest::Approx(0.5 * std::log((2 - 1e-6) / 1e-6)).epsilon(1e-9));
}

TEST_CASE("resolvent examples") {
  LogEntropy e(1.0);
  QuadraticPart q(1.0);
  CHECK(yosida_resolvent(e, 0.3, 0.0).value == 0.0);
  CHECK(yosida_resolvent(q, 1.0, 0.0).value == 0.0);
  CHECK(yosida_resolvent(q, 1.0, 2.0).value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(yosida_derivative(q, 1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-14));

  // lambda = 0.1, s = 5: the root lies within 1e-30 of 1, so check it in the gap variable
  const auto r = yosida_resolvent(e, 0.1, 5.0);
  CHECK(r.gap > 0.0);
  CHECK(r.gap < 1.0);
  CHECK(r.sign == 1);
  const double d = r.gap;
  const double residual = (1.0 - d) + 0.1 * 0.5 * (std::log(2.0 - d) - std::log(d)) - 5.0;
  CHECK(std::abs(residual) <= 1e-12 * 6.0);
  // log-gap bisection oracle
  double lo = -700, hi = std::log(0.5);
  for (int i = 0; i < 200; ++i) {
    const double t = 0.5 * (lo + hi);
    const double g = std::exp(t);
    const double h = (1.0 - g) + 0.05 * (std::log(2.0 - g) - std::log(g)) - 5.0;
    if (h > 0) lo = t; else hi = t;
  }
  CHECK(std::log(d) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-12));

  // residual contract over a sweep
  for (double lam : {1.0, 0.1, 0.01, 1e-4}) {
    for (double s = -10.0; s <= 10.0; s += 0.173) {
      const auto rr = yosida_resolvent(e, lam, s);
      CHECK(rr.residual <= 1e-12 * (1.0 + std::abs(s)));
    }
  }
}

TEST_CASE("yosida derivative monotone on sampled pairs") {
  LogEntropy e(1.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    CHECK(yosida_derivative(e, 0.1, a) <= yosida_derivative(e, 0.1, b));
  }
}

TEST_CASE("M3 Lipschitz 1/lambda") {
  LogEntropy e(1.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (double lam : {1.0, 0.1, 0.01}) {
    for (int i = 0; i < 1000; ++i) {
      const double a = u(rng), b = u(rng);
      CHECK(std::abs(yosida_derivative(e, lam, a) - yosida_derivative(e, lam, b)) <=
            std::abs(a - b) / lam + 1e-10);
    }
  }
}

TEST_CASE("yosida derivative matches bisection oracle") {
  for (double lam : {1.0, 0.1, 0.01}) {
    for (double s = -2.9; s < 3.0; s += 0.37) {
      CHECK(yosida_derivative(LogEntropy(1.0), lam, s) ==
            doctest::Approx(oracle_yosida_derivative(1.0, lam, s)).epsilon(1e-9));
    }
  }
}

TEST_CASE("M5 regularization below the base and pointwise convergence") {
  auto base = std::make_shared<LogEntropy>(1.0);
  for (double lam : {1.0, 0.1, 0.01}) {
    YosidaPart y(base, lam);
    for (int i = 0; i <= 400; ++i) {
      const double s = -1.0 + i / 200.0;
      CHECK(y.value(s) <= base->value(s) + 1e-14);
    }
  }
  for (double s : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double lam : {0.1, 0.01, 0.001}) {
      const double err = std::abs(YosidaPart(base, lam).value(s) - base->value(s));
      CHECK(err <= prev);
      prev = err;
    }
    CHECK(std::abs(YosidaPart(base, 1e-4).value(s) - base->value(s)) <= 1e-3);
  }
}

TEST_CASE("M2 convexity floor by finite differences") {
  auto base = std::make_shared<LogEntropy>(1.0);
  const double floor = 1.0 / (1.0 + 1.0);
  for (double lam : {1.0, 0.1, 0.01}) {
    YosidaPart y(base, lam);
    CHECK(y.convexity_floor() >= floor);
    const double h = 1e-4;
    for (double s = -2.95; s < 3.0; s += 0.1) {
      const double fd = (y.derivative(s + h) - y.derivative(s - h)) / (2 * h);
      CHECK(fd >= floor - 1e-6);
      CHECK(y.second_derivative(s) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("M4 quadratic growth") {
  auto base = std::make_shared<LogEntropy>(1.0);
  // For lambda <= lbar: W1_lambda(s) >= (|s|-1)^2/(2 lambda) >= s^2/(4 lbar) - 1/(2 lbar)
  const double lbar = 0.1;
  for (double lam : {0.1, 0.05, 0.01}) {
    YosidaPart y(base, lam);
    for (double s = -10.0; s <= 10.0; s += 0.05)
      CHECK(y.value(s) >= s * s / (4 * lbar) - 1.0 / (2 * lbar) - 1e-12);
  }
}

TEST_CASE("quadratic test part closed form") {
  QuadraticPart q(1.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (double lam : {1.0, 0.5, 0.1, 0.01, 3.0}) {
    for (int i = 0; i < 200; ++i) {
      const double s = u(rng);
      CHECK(std::abs(yosida_derivative(q, lam, s) - s / (1.0 + lam)) <= 1e-12 * (1.0 + std::abs(s)));
    }
  }
}

TEST_CASE("domination checks") {
  LogEntropy f(1.0);
  auto same = check_domination(f, f, 1.0, std::nullopt, 2001, 1.0, 0.0);
  CHECK(same.satisfied());
  auto zero = check_domination(f, f, 0.0, std::nullopt, 2001, 1.0, 0.0);
  CHECK(zero.satisfied());

  // brute-force kappa2 for alpha = 0.5 on the unregularized part: |F'(s/2)| <= |G'(s)|, so 0
  auto half = check_domination(f, f, 0.5, std::nullopt, 100000, 1.0, 0.0);
  CHECK(half.satisfied());
  CHECK(half.admissible_kappa2 == 0.0);

  // regularized: brute-force kappa2 over 1e5 grid points in [-3,3] with the bisection oracle
  for (double lam : {0.1, 0.01}) {
    const int n = 100000;
    double kappa2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s = -3.0 + 6.0 * (i + 1) / (n + 1);
      kappa2 = std::max(kappa2, std::abs(oracle_yosida_derivative(1.0, lam, 0.5 * s)) -
                                    std::abs(oracle_yosida_derivative(1.0, lam, s)));
    }
    auto rep = check_domination(f, f, 0.5, lam, n, 1.0, kappa2 + 1e-9);
    CHECK(rep.satisfied());
    CHECK(rep.admissible_kappa2 == doctest::Approx(kappa2).epsilon(1e-8));
  }
}
