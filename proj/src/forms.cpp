#include "bscch/forms.hpp"

#include <cmath>
#include <sstream>

#include "bscch/errors.hpp"

namespace bscch {

const char* to_string(ConstraintMode mode) {
  switch (mode) {
    case ConstraintMode::AffineTrace: return "affine-trace";
    case ConstraintMode::Penalty: return "penalty";
    case ConstraintMode::Decoupled: return "decoupled";
  }
  return "unknown";
}

namespace {

SparseMatrix block_diag(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(a.nonZeros() + b.nonZeros());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < b.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(b, k); it; ++it)
      t.emplace_back(a.rows() + it.row(), a.cols() + it.col(), it.value());
  SparseMatrix m(a.rows() + b.rows(), a.cols() + b.cols());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

}  // namespace

CouplingForm::CouplingForm(const FemOperators& ops, ExtendedReal r, double a)
    : ops_(&ops), r_(r), a_(a), weight_(chi(r)) {
  if (!std::isfinite(a)) throw Error(ErrorKind::InvalidParameter, "coupling coefficient must be finite");
  mode_ = r.is_zero() ? ConstraintMode::AffineTrace
                      : (r.is_infinite() ? ConstraintMode::Decoupled : ConstraintMode::Penalty);
  const int nb = ops.num_bulk(), ns = ops.num_surface();
  full_ = block_diag(ops.bulk_stiffness, ops.surface_stiffness);
  if (mode_ == ConstraintMode::Penalty) {
    // C = [-T, aI], penalty chi * C^T M_G C
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < ops.trace.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(ops.trace, k); it; ++it) t.emplace_back(it.row(), it.col(), -it.value());
    for (int i = 0; i < ns; ++i) t.emplace_back(i, nb + i, a);
    SparseMatrix c(ns, nb + ns);
    c.setFromTriplets(t.begin(), t.end());
    SparseMatrix pen = SparseMatrix(c.transpose()) * ops.surface_mass * c;
    full_ = full_ + weight_ * pen;
  }

  std::vector<Eigen::Triplet<double>> p;
  if (mode_ == ConstraintMode::AffineTrace) {
    // mesh trace: bulk boundary node -> surface index, recovered from the trace operator
    std::vector<int> surf_of_bulk(nb, -1);
    for (int k = 0; k < ops.trace.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(ops.trace, k); it; ++it) surf_of_bulk[it.col()] = it.row();
    int nint = 0;
    std::vector<int> red(nb, -1);
    for (int b = 0; b < nb; ++b)
      if (surf_of_bulk[b] < 0) red[b] = nint++;
    for (int b = 0; b < nb; ++b) {
      if (red[b] >= 0) p.emplace_back(b, red[b], 1.0);
      else if (a != 0.0) p.emplace_back(b, nint + surf_of_bulk[b], a);
    }
    for (int i = 0; i < ns; ++i) p.emplace_back(nb + i, nint + i, 1.0);
    prolong_.resize(nb + ns, nint + ns);
  } else {
    for (int i = 0; i < nb + ns; ++i) p.emplace_back(i, i, 1.0);
    prolong_.resize(nb + ns, nb + ns);
  }
  prolong_.setFromTriplets(p.begin(), p.end());
  reduced_ = SparseMatrix(prolong_.transpose()) * full_ * prolong_;
}

double CouplingForm::apply(const BulkSurfaceField& u, const BulkSurfaceField& v) const {
  ops_->check_dims(u);
  ops_->check_dims(v);
  return u.stacked().dot(full_ * v.stacked());
}

double CouplingForm::constraint_defect(const BulkSurfaceField& u) const {
  ops_->check_dims(u);
  if (mode_ != ConstraintMode::AffineTrace) return 0.0;
  const Vector d = ops_->trace * u.bulk - a_ * u.surface;
  return d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
}

bool CouplingForm::satisfies_constraint(const BulkSurfaceField& u, double tol) const {
  return constraint_defect(u) <= tol * std::max(1.0, u.max_abs());
}

double CouplingForm::norm(const BulkSurfaceField& u) const {
  if (!satisfies_constraint(u)) {
    std::ostringstream os;
    os << "field violates the affine trace constraint (defect " << constraint_defect(u) << ")";
    throw Error(ErrorKind::Compatibility, os.str());
  }
  return std::sqrt(std::max(apply(u, u), 0.0));
}

BulkSurfaceField CouplingForm::prolong(const Vector& reduced) const {
  if (reduced.size() != prolong_.cols())
    throw Error(ErrorKind::DimensionMismatch, "reduced vector has the wrong length");
  return BulkSurfaceField::split(prolong_ * reduced, ops_->num_bulk());
}

Vector CouplingForm::restrict(const BulkSurfaceField& u) const {
  ops_->check_dims(u);
  if (mode_ != ConstraintMode::AffineTrace) return u.stacked();
  const int nint = reduced_size() - ops_->num_surface();
  Vector x(reduced_size());
  // interior rows of P are unit rows
  for (int k = 0; k < prolong_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(prolong_, k); it; ++it)
      if (it.col() < nint && it.row() < ops_->num_bulk()) x[it.col()] = u.bulk[it.row()];
  x.tail(ops_->num_surface()) = u.surface;
  return x;
}

// ---------------------------------------------------------------------------------------------

EllipticSolver::EllipticSolver(const CouplingForm& form, double beta, bool separate_means)
    : form_(&form), beta_(beta), separate_(separate_means) {
  const auto& ops = form.ops();
  const int nb = ops.num_bulk(), ns = ops.num_surface();
  nred_ = form.reduced_size();
  nmult_ = separate_ ? 2 : 1;
  // constraint columns P^T M g
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nb + ns, nmult_);
  if (separate_) {
    g.col(0).head(nb) = ops.bulk_lumped;
    g.col(1).tail(ns) = ops.surface_lumped;
  } else {
    g.col(0).head(nb) = beta * ops.bulk_lumped;
    g.col(0).tail(ns) = ops.surface_lumped;
  }
  const Eigen::MatrixXd pg = SparseMatrix(form.prolongation().transpose()) * g;

  std::vector<Eigen::Triplet<double>> t;
  const auto& a = form.reduced_matrix();
  t.reserve(a.nonZeros() + 2 * nmult_ * nred_);
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (int j = 0; j < nmult_; ++j)
    for (int i = 0; i < nred_; ++i)
      if (pg(i, j) != 0.0) {
        t.emplace_back(i, nred_ + j, pg(i, j));
        t.emplace_back(nred_ + j, i, pg(i, j));
      }
  SparseMatrix sys(nred_ + nmult_, nred_ + nmult_);
  sys.setFromTriplets(t.begin(), t.end());
  sys.makeCompressed();
  lu_.analyzePattern(sys);
  lu_.factorize(sys);
  if (lu_.info() != Eigen::Success)
    throw Error(ErrorKind::Assembly, "elliptic saddle system is singular: " + lu_.lastErrorMessage());
}

double EllipticSolver::compatibility_defect(const BulkSurfaceField& rhs) const {
  const auto& ops = form_->ops();
  ops.check_dims(rhs);
  const double ib = ops.bulk_lumped.dot(rhs.bulk), is = ops.surface_lumped.dot(rhs.surface);
  if (separate_) return std::max(std::abs(ib), std::abs(is));
  return std::abs(beta_ * ib + is);
}

double EllipticSolver::compatibility_tolerance(const BulkSurfaceField& rhs) const {
  const auto& ops = form_->ops();
  const double scale = ops.bulk_lumped.dot(rhs.bulk.cwiseAbs()) * std::max(1.0, std::abs(beta_)) +
                       ops.surface_lumped.dot(rhs.surface.cwiseAbs());
  return 1e-10 * std::max(1.0, scale);
}

BulkSurfaceField EllipticSolver::make_compatible(BulkSurfaceField rhs) const {
  const auto& ops = form_->ops();
  ops.check_dims(rhs);
  const auto g = ops.geometry();
  const double ib = ops.bulk_lumped.dot(rhs.bulk), is = ops.surface_lumped.dot(rhs.surface);
  if (separate_) {
    rhs.bulk.array() -= ib / g.bulk_measure;
    rhs.surface.array() -= is / g.surface_measure;
  } else {
    const double c = (beta_ * ib + is) / (beta_ * beta_ * g.bulk_measure + g.surface_measure);
    rhs.bulk.array() -= beta_ * c;
    rhs.surface.array() -= c;
  }
  return rhs;
}

BulkSurfaceField EllipticSolver::solve(const BulkSurfaceField& rhs) const {
  const double defect = compatibility_defect(rhs);
  if (defect > compatibility_tolerance(rhs)) {
    std::ostringstream os;
    os << "right-hand side is not in the compatible class: mean defect " << defect;
    throw Error(ErrorKind::Compatibility, os.str());
  }
  const auto& ops = form_->ops();
  const Vector mrhs = ops.lumped_stacked().cwiseProduct(rhs.stacked());
  Vector b = Vector::Zero(nred_ + nmult_);
  b.head(nred_) = -(SparseMatrix(form_->prolongation().transpose()) * mrhs);
  const Vector x = lu_.solve(b);
  return form_->prolong(x.head(nred_));
}

double EllipticSolver::dual_norm(const BulkSurfaceField& f) const {
  const BulkSurfaceField u = solve(f);
  return std::sqrt(std::max(form_->apply(u, u), 0.0));
}

DualSpace make_dual_space(const FemOperators& ops, const SystemParams& params) {
  DualSpace d;
  d.form = std::make_unique<CouplingForm>(ops, params.L, params.beta);
  d.solver = std::make_unique<EllipticSolver>(*d.form, params.beta, params.L.is_infinite());
  return d;
}

// ---------------------------------------------------------------------------------------------

PoincareResult poincare_constant(const FemOperators& ops, const SystemParams& params, double tol,
                                 int max_iter) {
  if (params.K.is_infinite())
    throw Error(ErrorKind::UnsupportedRegime, "the bulk-surface Poincare inequality needs K < infinity");
  params.validate(ops.geometry());
  CouplingForm form(ops, params.K, params.alpha);
  const SparseMatrix& p = form.prolongation();
  const SparseMatrix pt = p.transpose();
  const int n = form.reduced_size();
  const int nb = ops.num_bulk(), ns = ops.num_surface();

  Vector g(nb + ns);
  g << params.beta * ops.bulk_lumped, ops.surface_lumped;
  const Vector c = pt * g;
  const Vector mdiag = ops.lumped_stacked();
  // reduced mass P^T M P
  const SparseMatrix mred = pt * mdiag.asDiagonal() * p;

  std::vector<Eigen::Triplet<double>> t;
  const auto& a = form.reduced_matrix();
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < n; ++i)
    if (c[i] != 0.0) {
      t.emplace_back(i, n, c[i]);
      t.emplace_back(n, i, c[i]);
    }
  SparseMatrix sys(n + 1, n + 1);
  sys.setFromTriplets(t.begin(), t.end());
  sys.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(sys);
  if (lu.info() != Eigen::Success)
    throw Error(ErrorKind::Assembly, "constrained Poincare pencil is singular");

  // deterministic start: a smooth non-constant field projected onto the constraint
  Vector x(n);
  for (int i = 0; i < n; ++i) x[i] = std::cos(0.37 * i) + 0.5 * std::sin(1.3 * i);
  auto project = [&](Vector& v) {
    // remove the component along (alpha,1)-constants so that c^T v = 0
    const Vector e = form.restrict(BulkSurfaceField::constant(nb, ns, params.alpha, 1.0));
    v -= (c.dot(v) / c.dot(e)) * e;
  };
  project(x);
  double rq = 0.0, prev = std::numeric_limits<double>::infinity();
  PoincareResult res;
  Vector rhs = Vector::Zero(n + 1);
  for (int it = 1; it <= max_iter; ++it) {
    x /= std::sqrt(x.dot(mred * x));
    rhs.head(n) = mred * x;
    const Vector y = lu.solve(rhs);
    x = y.head(n);
    x /= std::sqrt(x.dot(mred * x));
    rq = x.dot(a * x);
    res.iterations = it;
    res.rq_change = std::abs(rq - prev);
    if (res.rq_change <= tol * std::max(1.0, rq)) break;
    prev = rq;
  }
  if (!(rq > 0.0)) throw Error(ErrorKind::Nonconvergence, "Poincare eigenvalue is not positive");
  res.lambda_min = rq;
  res.constant = 1.0 / std::sqrt(rq);
  res.eigenvector = form.prolong(x);
  return res;
}

}  // namespace bscch
