#include "bscch/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "bscch/errors.hpp"
#include "bscch/mass.hpp"

namespace bscch {

namespace {

// Reduced-space pieces shared by the residual, the multiplier fit and Newton.
struct Setup {
  const Problem& p;
  SparseMatrix pk, pkt;
  Vector mass;       // lumped stacked
  Vector row_scale;  // diag(P^T M P)
  Eigen::MatrixXd g;  // columns P^T M g_k, one per multiplier unknown
  int nb, ns, nk, q;

  explicit Setup(const Problem& problem) : p(problem) {
    pk = p.k_form().prolongation();
    pkt = pk.transpose();
    mass = p.ops().lumped_stacked();
    row_scale = SparseMatrix(pkt.cwiseProduct(pkt)) * mass;
    nb = p.num_bulk();
    ns = p.num_surface();
    nk = static_cast<int>(pk.cols());
    const bool pair = p.params().mass_pair();
    q = pair ? 2 : 1;
    Eigen::MatrixXd gs = Eigen::MatrixXd::Zero(nb + ns, q);
    if (pair) {
      gs.col(0).head(nb).setOnes();
      gs.col(1).tail(ns).setOnes();
    } else {
      gs.col(0).head(nb).setConstant(p.params().beta);
      gs.col(0).tail(ns).setOnes();
    }
    g = pkt * (mass.asDiagonal() * gs);
  }

  Vector unknowns_of(const Multipliers& m) const {
    Vector c(q);
    if (q == 2) {
      c << m.mu, m.theta;
    } else {
      c << m.theta;
    }
    return c;
  }
  Multipliers multipliers_of(const Vector& c) const {
    if (q == 2) return {c[0], c[1]};
    return {p.params().beta * c[0], c[0]};
  }

  // nodal W' and W'' (full potentials), throwing on non-interior values of singular parts
  void potentials(const Vector& phi, Vector& d1, Vector* d2) const {
    d1.resize(nb + ns);
    if (d2) d2->resize(nb + ns);
    for (int i = 0; i < nb + ns; ++i) {
      const SplitPotential& w = i < nb ? p.bulk_potential() : p.surface_potential();
      const double s = phi[i];
      if (w.singular() && !(std::abs(s) < 1.0))
        throw SingularDomainError("stationary residual: value outside (-1, 1)", s, i < nb ? i : i - nb);
      d1[i] = w.derivative(s);
      if (d2) (*d2)[i] = w.convex().second_derivative(s) + w.smooth().curvature;
    }
  }

  Vector field_residual(const Vector& x, const Vector& c, Vector* d2 = nullptr) const {
    const Vector phi = pk * x;
    Vector d1;
    potentials(phi, d1, d2);
    return p.k_form().reduced_matrix() * x + pkt * mass.cwiseProduct(d1) - g * c;
  }

  double scaled_max(const Vector& r) const { return r.cwiseQuotient(row_scale).cwiseAbs().maxCoeff(); }

  // mass rows: (total mass) - target, in the shape of the mass functional
  Vector mass_rows(const Vector& x) const {
    const auto field = BulkSurfaceField::split(pk * x, nb);
    const auto cur = mass_functional(field, p.params(), p.ops());
    const auto tgt = p.params().total_mass_target(p.geometry());
    Vector r(q);
    if (q == 2) {
      r << std::get<MassPair>(cur).bulk - std::get<MassPair>(tgt).bulk,
          std::get<MassPair>(cur).surface - std::get<MassPair>(tgt).surface;
    } else {
      r << std::get<double>(cur) - std::get<double>(tgt);
    }
    return r;
  }
  double mass_scale() const {
    const auto geo = p.geometry();
    return std::abs(p.params().beta) * geo.bulk_measure + geo.surface_measure;
  }

  Vector fit(const Vector& x) const {
    const Vector r0 = field_residual(x, Vector::Zero(q));
    const Vector w = row_scale.cwiseInverse();
    const Eigen::MatrixXd a = g.transpose() * w.asDiagonal() * g;
    const Vector b = g.transpose() * w.cwiseProduct(r0);
    return a.ldlt().solve(b);
  }
};

}  // namespace

StationaryResidual stationary_residual(const Problem& problem, const BulkSurfaceField& candidate,
                                       const Multipliers& m) {
  problem.ops().check_dims(candidate);
  Setup s(problem);
  if (!problem.params().L.is_infinite() &&
      std::abs(m.mu - problem.params().beta * m.theta) > 1e-14 * std::max(1.0, std::abs(m.mu)))
    throw Error(ErrorKind::InvalidParameter, "multipliers must satisfy mu = beta * theta for L < infinity");
  const Vector x = problem.k_form().restrict(candidate);
  const Vector r = s.field_residual(x, s.unknowns_of(m));
  StationaryResidual out;
  out.field = BulkSurfaceField::split(s.pk * r.cwiseQuotient(s.row_scale), s.nb);
  out.norm = s.scaled_max(r);
  return out;
}

Multipliers fit_multipliers(const Problem& problem, const BulkSurfaceField& candidate) {
  Setup s(problem);
  return s.multipliers_of(s.fit(problem.k_form().restrict(candidate)));
}

double separation_width(const BulkSurfaceField& phi) { return 1.0 - phi.max_abs(); }

StationarySolution newton_solve(const Problem& problem, const BulkSurfaceField& guess,
                                const StationaryOptions& opts) {
  const auto& ops = problem.ops();
  ops.check_dims(guess);
  const bool singular = problem.bulk_potential().singular() || problem.surface_potential().singular();
  if (singular && !(guess.max_abs() < 1.0))
    throw Error(ErrorKind::InvalidParameter, "stationary guess must be interior");
  if (problem.k_form().mode() == ConstraintMode::AffineTrace && !problem.k_form().satisfies_constraint(guess, 1e-10))
    throw Error(ErrorKind::Compatibility, "stationary guess violates the trace constraint (K = 0)");
  Setup s(problem);
  const int nk = s.nk, q = s.q;

  Vector x = problem.k_form().restrict(guess);
  if (s.mass_rows(x).cwiseAbs().maxCoeff() > 1e-9 * s.mass_scale())
    throw Error(ErrorKind::InvalidParameter, "stationary guess does not carry the target mass (rule D1)");
  Vector c = s.fit(x);

  auto total_norm = [&](const Vector& rf, const Vector& rm) {
    return std::max(s.scaled_max(rf), rm.cwiseAbs().maxCoeff() / s.mass_scale());
  };
  auto l2 = [&](const Vector& rf, const Vector& rm) {
    return std::sqrt(rf.cwiseQuotient(s.row_scale).squaredNorm() + (rm / s.mass_scale()).squaredNorm());
  };

  StationarySolution sol;
  Vector d2;
  Vector rf = s.field_residual(x, c, &d2);
  Vector rm = s.mass_rows(x);
  double rn = total_norm(rf, rm);
  sol.history.push_back(rn);
  const SparseMatrix pk2t = s.pkt.cwiseProduct(s.pkt);
  Eigen::SparseLU<SparseMatrix> lu;
  bool analyzed = false;
  int it = 0;
  while (rn > opts.tol) {
    if (it >= opts.max_iter) {
      std::ostringstream os;
      os << "stationary Newton did not converge in " << opts.max_iter << " iterations (residual " << rn << ")";
      throw Error(ErrorKind::Nonconvergence, os.str());
    }
    // [ P^T (B + diag(m W'')) P   -G ] [dx]   [-rf]
    // [        G^T                0 ] [dc] = [-rm]
    std::vector<Eigen::Triplet<double>> trip;
    const SparseMatrix& bk = problem.k_form().reduced_matrix();
    for (int k = 0; k < bk.outerSize(); ++k)
      for (SparseMatrix::InnerIterator itb(bk, k); itb; ++itb) trip.emplace_back(itb.row(), itb.col(), itb.value());
    const Vector dred = pk2t * s.mass.cwiseProduct(d2);
    for (int k = 0; k < nk; ++k) trip.emplace_back(k, k, dred[k]);
    for (int j = 0; j < q; ++j)
      for (int k = 0; k < nk; ++k)
        if (s.g(k, j) != 0.0) {
          trip.emplace_back(k, nk + j, -s.g(k, j));
          trip.emplace_back(nk + j, k, s.g(k, j));
        }
    SparseMatrix jac(nk + q, nk + q);
    jac.setFromTriplets(trip.begin(), trip.end());
    jac.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(jac);
      analyzed = true;
    }
    lu.factorize(jac);
    if (lu.info() != Eigen::Success)
      throw Error(ErrorKind::Nonconvergence, "stationary Newton: singular Jacobian");
    Vector rhs(nk + q);
    rhs << -rf, -rm;
    const Vector delta = lu.solve(rhs);
    if (!delta.allFinite()) throw Error(ErrorKind::Nonconvergence, "stationary Newton: non-finite update");

    double step = 1.0;
    if (singular) {
      const Vector phi = s.pk * x;
      const Vector dphi = s.pk * delta.head(nk);
      for (int i = 0; i < phi.size(); ++i) {
        const bool sing = i < s.nb ? problem.bulk_potential().singular() : problem.surface_potential().singular();
        if (!sing || dphi[i] == 0.0) continue;
        const double room = dphi[i] > 0 ? 1.0 - phi[i] : 1.0 + phi[i];
        step = std::min(step, 0.99 * room / std::abs(dphi[i]));
      }
    }
    const double r2 = l2(rf, rm);
    Vector xn, cn, rfn, rmn, d2n;
    for (int cuts = 0;; ++cuts) {
      xn = x + step * delta.head(nk);
      cn = c + step * delta.tail(q);
      bool ok = true;
      try {
        rfn = s.field_residual(xn, cn, &d2n);
        rmn = s.mass_rows(xn);
      } catch (const SingularDomainError&) {
        ok = false;
      }
      if (ok && (l2(rfn, rmn) <= (1.0 - 1e-4 * step) * r2 || total_norm(rfn, rmn) <= opts.tol)) break;
      if (cuts >= 50) {
        std::ostringstream os;
        os << "stationary Newton: line search failed (residual " << rn << ")";
        throw Error(ErrorKind::Nonconvergence, os.str());
      }
      step *= 0.5;
    }
    x = std::move(xn);
    c = std::move(cn);
    rf = std::move(rfn);
    rm = std::move(rmn);
    d2 = std::move(d2n);
    rn = total_norm(rf, rm);
    sol.history.push_back(rn);
    ++it;
  }

  sol.phi = BulkSurfaceField::split(s.pk * x, s.nb);
  sol.multipliers = s.multipliers_of(c);
  sol.residual = s.scaled_max(rf);
  sol.mass_defect = relative_mass_drift(problem.params().total_mass_target(problem.geometry()),
                                        mass_functional(sol.phi, problem.params(), ops));
  sol.iterations = it;
  const auto& h = sol.history;
  for (std::size_t k = h.size() >= 4 ? h.size() - 4 : 0; k + 1 < h.size(); ++k)
    if (h[k] > 0.0) sol.quadratic_ratio = std::max(sol.quadratic_ratio, h[k + 1] / (h[k] * h[k]));
  sol.delta_star = separation_width(sol.phi);
  return sol;
}

Multipliers multiplier_formulas(const Problem& problem, const StationarySolution& sol) {
  const auto& ops = problem.ops();
  const auto& prm = problem.params();
  const auto geo = problem.geometry();
  double int_f = 0.0, int_g = 0.0;
  for (int i = 0; i < ops.num_bulk(); ++i) int_f += ops.bulk_lumped[i] * problem.bulk_potential().derivative(sol.phi.bulk[i]);
  for (int j = 0; j < ops.num_surface(); ++j)
    int_g += ops.surface_lumped[j] * problem.surface_potential().derivative(sol.phi.surface[j]);
  Multipliers m;
  if (!prm.L.is_infinite()) {
    m.theta = (prm.alpha * int_f + int_g) / (prm.alpha * prm.beta * geo.bulk_measure + geo.surface_measure);
    m.mu = prm.beta * m.theta;
  } else {
    const double flux = int_f - sol.multipliers.mu * geo.bulk_measure;
    m.mu = (int_f - flux) / geo.bulk_measure;
    m.theta = (int_g + prm.alpha * flux) / geo.surface_measure;
  }
  return m;
}

double criticality_defect(const Problem& problem, const BulkSurfaceField& phi, int directions, unsigned seed) {
  const auto& ops = problem.ops();
  Setup s(problem);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  SystemParams zero = problem.params();
  if (zero.mass_pair())
    zero.mass_target = MassPair{0.0, 0.0};
  else
    zero.mass_target = 0.0;
  const Vector u = phi.stacked();
  Vector d1;
  s.potentials(u, d1, nullptr);
  const Vector grad = problem.k_form().matrix() * u + s.mass.cwiseProduct(d1);
  double worst = 0.0;
  for (int k = 0; k < directions; ++k) {
    Vector z(s.nk);
    for (int i = 0; i < s.nk; ++i) z[i] = n01(rng);
    BulkSurfaceField d = BulkSurfaceField::split(s.pk * z, s.nb);
    project_mass(d, zero, ops);
    const double nrm = ops.l2_norm(d);
    worst = std::max(worst, std::abs(grad.dot(d.stacked())) / nrm);
  }
  return worst;
}

}  // namespace bscch
