#include "bscch/timestepper.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "bscch/errors.hpp"
#include "bscch/mass.hpp"

namespace bscch {

const char* to_string(PotentialMode mode) {
  return mode == PotentialMode::Yosida ? "yosida" : "direct-log";
}

const char* to_string(ConvectionTreatment c) {
  return c == ConvectionTreatment::Explicit ? "explicit" : "semi-implicit";
}

void SchemeConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::InvalidParameter, "dt must be positive");
  if (!(newton_tol > 0.0)) throw Error(ErrorKind::InvalidParameter, "newton_tol must be positive");
  if (newton_max_iter < 1) throw Error(ErrorKind::InvalidParameter, "newton_max_iter must be >= 1");
  if (potential_mode == PotentialMode::Yosida && !(lambda > 0.0 && lambda <= 1.0))
    throw Error(ErrorKind::InvalidParameter, "Yosida lambda must lie in (0, 1]");
  if (max_halvings < 0) throw Error(ErrorKind::InvalidParameter, "max_halvings must be >= 0");
}

Problem::Problem(BulkSurfaceMesh mesh, SystemParams params, SplitPotential bulk_potential,
                 SplitPotential surface_potential)
    : mesh_(std::move(mesh)),
      ops_(assemble(mesh_)),
      params_(std::move(params)),
      f_(std::move(bulk_potential)),
      g_(std::move(surface_potential)) {
  params_.validate(ops_.geometry());
  k_form_ = std::make_unique<CouplingForm>(ops_, params_.K, params_.alpha);
  auto dual = make_dual_space(ops_, params_);
  l_form_ = std::move(dual.form);
  l_solver_ = std::move(dual.solver);
}

// ---------------------------------------------------------------------------------------------

EnergyBreakdown energy(const Problem& problem, const BulkSurfaceField& field, const SplitPotential& f,
                       const SplitPotential& g) {
  const auto& ops = problem.ops();
  ops.check_dims(field);
  EnergyBreakdown e;
  e.bulk_dirichlet = 0.5 * field.bulk.dot(ops.bulk_stiffness * field.bulk);
  e.surface_dirichlet = 0.5 * field.surface.dot(ops.surface_stiffness * field.surface);
  const Vector u = field.stacked();
  e.k_penalty = 0.5 * u.dot(problem.k_form().matrix() * u) - e.bulk_dirichlet - e.surface_dirichlet;
  if (problem.k_form().mode() != ConstraintMode::Penalty) e.k_penalty = 0.0;
  // the closed-interval extension of the log is finite, but energies are only taken of interior states
  auto value = [](const SplitPotential& w) {
    return [&w](double s) {
      if (w.singular() && !(std::abs(s) < 1.0))
        throw SingularDomainError("energy: singular potential at a non-interior value", s);
      return w.value(s);
    };
  };
  e.bulk_potential = integrate_nonlinear(ops, value(f), field.bulk, Domain::Bulk);
  e.surface_potential = integrate_nonlinear(ops, value(g), field.surface, Domain::Surface);
  e.total = e.bulk_dirichlet + e.surface_dirichlet + e.k_penalty + e.bulk_potential + e.surface_potential;
  return e;
}

EnergyBreakdown energy(const Problem& problem, const BulkSurfaceField& field) {
  return energy(problem, field, problem.bulk_potential(), problem.surface_potential());
}

void check_initial(const Problem& problem, const BulkSurfaceField& u, bool strict_interior) {
  const auto& ops = problem.ops();
  ops.check_dims(u);
  const double bound = u.max_abs();
  if (!std::isfinite(bound)) throw Error(ErrorKind::InvalidParameter, "initial data: non-finite values");
  const bool singular = problem.bulk_potential().singular() || problem.surface_potential().singular();
  if (singular && bound > 1.0)
    throw Error(ErrorKind::InvalidParameter, "initial data: values outside [-1, 1]");
  if (singular && strict_interior && !(bound < 1.0))
    throw Error(ErrorKind::InvalidParameter, "initial data: values must lie in (-1, 1) for the direct-log scheme");
  if (problem.k_form().mode() == ConstraintMode::AffineTrace && !problem.k_form().satisfies_constraint(u, 1e-10))
    throw Error(ErrorKind::Compatibility, "initial data: trace constraint phi|Gamma = alpha psi violated (K = 0)");
  const auto& p = problem.params();
  const double drift =
      relative_mass_drift(p.total_mass_target(problem.geometry()), mass_functional(u, p, ops));
  if (drift > 1e-9) {
    std::ostringstream os;
    os << "initial data: rule D1 violated, mass differs from the target by " << drift;
    throw Error(ErrorKind::InvalidParameter, os.str());
  }
}

// ---------------------------------------------------------------------------------------------

namespace {

using Triplet = Eigen::Triplet<double>;

void append_block(std::vector<Triplet>& trip, const SparseMatrix& m, int row0, int col0, double scale) {
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      trip.emplace_back(row0 + it.row(), col0 + it.col(), scale * it.value());
}

// Nodal W1' and W1'' of one component times the lumped masses.
void potential_terms(const ConvexPart& w1, const Vector& values, const Vector& mass, Vector& d1,
                     Vector& d2, int offset) {
  for (int i = 0; i < values.size(); ++i) {
    const double s = values[i];
    if (w1.singular() && !(std::abs(s) < 1.0))
      throw SingularDomainError("potential derivative evaluated outside (-1, 1)", s, i);
    d1[offset + i] = mass[i] * w1.derivative(s);
    d2[offset + i] = mass[i] * w1.second_derivative(s);
  }
}

}  // namespace

TimeStepper::TimeStepper(const Problem& problem, SchemeConfig cfg, VelocityPair velocity)
    : problem_(&problem), cfg_(cfg), velocity_(std::move(velocity)) {
  cfg_.validate();
  if (cfg_.potential_mode == PotentialMode::Yosida) {
    f_eff_ = problem.bulk_potential().singular() ? problem.bulk_potential().regularized(cfg_.lambda)
                                                 : problem.bulk_potential();
    g_eff_ = problem.surface_potential().singular() ? problem.surface_potential().regularized(cfg_.lambda)
                                                    : problem.surface_potential();
  } else {
    f_eff_ = problem.bulk_potential();
    g_eff_ = problem.surface_potential();
  }
  if (!velocity_.is_zero()) {
    const double vmax = velocity_.profile_max();
    cfl_warning_ = cfg_.convection == ConvectionTreatment::Explicit && cfg_.dt * vmax > problem.mesh().h();
  }
  const auto& ops = problem.ops();
  pk_ = problem.k_form().prolongation();
  pl_ = problem.l_form().prolongation();
  pkt_ = pk_.transpose();
  plt_ = pl_.transpose();
  nk_ = static_cast<int>(pk_.cols());
  nl_ = static_cast<int>(pl_.cols());
  bk_red_ = problem.k_form().reduced_matrix();
  bl_red_ = problem.l_form().reduced_matrix();
  mass_diag_ = ops.lumped_stacked();
  pk_m_pl_ = pkt_ * mass_diag_.asDiagonal() * pl_;
  row_scale_.resize(nk_ + nl_);
  row_scale_.head(nk_) = SparseMatrix(pkt_.cwiseProduct(pkt_)) * mass_diag_;
  row_scale_.tail(nl_) = SparseMatrix(plt_.cwiseProduct(plt_)) * mass_diag_;
}

void TimeStepper::build_static(double dt) {
  // Jacobian without the potential diagonal:
  //   [ -P_K^T B_K P_K      P_K^T M P_L     ]
  //   [  P_L^T M P_K     dt P_L^T B_L P_L   ]
  std::vector<Triplet> trip;
  append_block(trip, bk_red_, 0, 0, -1.0);
  for (int k = 0; k < nk_; ++k) trip.emplace_back(k, k, 0.0);
  append_block(trip, pk_m_pl_, 0, nk_, 1.0);
  append_block(trip, SparseMatrix(pk_m_pl_.transpose()), nk_, 0, 1.0);
  append_block(trip, bl_red_, nk_, nk_, dt);
  jac0_.resize(nk_ + nl_, nk_ + nl_);
  jac0_.setFromTriplets(trip.begin(), trip.end());
  jac0_.makeCompressed();
  diag_index_.assign(nk_, -1);
  for (int k = 0; k < nk_; ++k) {
    const auto* outer = jac0_.outerIndexPtr();
    const auto* inner = jac0_.innerIndexPtr();
    for (auto p = outer[k]; p < outer[k + 1]; ++p)
      if (inner[p] == k) diag_index_[k] = p;
  }
  cached_dt_ = dt;
  ldlt_analyzed_ = false;
  lu_analyzed_ = false;
  jac_has_convection_ = false;
}

double TimeStepper::convection_work(const BulkSurfaceField& phi, const BulkSurfaceField& mu, double t) const {
  if (velocity_.is_zero()) return 0.0;
  const auto& p = *problem_;
  const Vector load = convection_load(p.mesh(), p.ops(), velocity_.sample(t), phi);
  return load.dot(mu.stacked());
}

SimState TimeStepper::step(const SimState& state, StepStats* stats) {
  return step_with(state, cfg_.dt, stats);
}

SimState TimeStepper::step_adaptive(const SimState& state, StepStats* stats) {
  std::function<SimState(const SimState&, double, int, StepStats*)> attempt =
      [&](const SimState& s, double dt, int level, StepStats* st) -> SimState {
    try {
      return step_with(s, dt, st);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Nonconvergence || level >= cfg_.max_halvings) throw;
      StepStats a, b;
      const SimState mid = attempt(s, 0.5 * dt, level + 1, &a);
      SimState out = attempt(mid, 0.5 * dt, level + 1, &b);
      out.step = s.step + 1;
      if (st) {
        st->newton_iterations = a.newton_iterations + b.newton_iterations;
        st->residual = b.residual;
        st->line_search_cuts = a.line_search_cuts + b.line_search_cuts;
        st->upwinded = std::max(a.upwinded, b.upwinded);
        st->max_peclet = std::max(a.max_peclet, b.max_peclet);
        st->halvings = 1 + std::max(a.halvings, b.halvings);
      }
      return out;
    }
  };
  return attempt(state, cfg_.dt, 0, stats);
}

void TimeStepper::factorize(const SparseMatrix& jac, bool nonsymmetric) {
  use_lu_ = use_lu_ || nonsymmetric;
  if (!use_lu_) {
    if (!ldlt_analyzed_) {
      ldlt_.analyzePattern(jac);
      ldlt_analyzed_ = true;
    }
    ldlt_.factorize(jac);
    if (ldlt_.info() == Eigen::Success) return;
    // zero pivot in the unpivoted LDL^T: switch to LU for good
    use_lu_ = true;
  }
  if (!lu_analyzed_ || nonsymmetric) {
    lu_.analyzePattern(jac);
    lu_analyzed_ = true;
  }
  lu_.factorize(jac);
  if (lu_.info() != Eigen::Success) throw Error(ErrorKind::Nonconvergence, "Newton Jacobian is singular; reduce dt");
}

Vector TimeStepper::solve(const Vector& r) {
  if (!use_lu_) {
    Vector delta = ldlt_.solve(-r);
    // the unpivoted factorization can lose accuracy on the saddle system; check and fall back
    if (delta.allFinite() && (jac_ * delta + r).norm() <= 1e-8 * std::max(r.norm(), 1e-300)) return delta;
    use_lu_ = true;
    factorize(jac_, false);
  }
  return lu_.solve(-r);
}

SimState TimeStepper::step_with(const SimState& state, double dt, StepStats* stats) {
  const Problem& p = *problem_;
  const auto& ops = p.ops();
  ops.check_dims(state.phi);
  const int nb = ops.num_bulk(), ns = ops.num_surface(), n = nb + ns;
  const bool semi = cfg_.convection == ConvectionTreatment::SemiImplicit && !velocity_.is_zero();
  const bool direct = cfg_.potential_mode == PotentialMode::DirectLog;
  const bool guard = direct && (f_eff_.singular() || g_eff_.singular());

  if (dt != cached_dt_ || jac_has_convection_ != semi) build_static(dt);

  StepStats st;
  // convection at t^n
  ConvectionInfo cinfo;
  SparseMatrix conv;
  Vector conv_load = Vector::Zero(n);
  if (!velocity_.is_zero()) {
    conv = convection_matrix(p.mesh(), ops, velocity_.sample(state.time), &cinfo);
    if (!semi) conv_load = conv * state.phi.stacked();
    st.upwinded = cinfo.upwinded;
    st.max_peclet = cinfo.max_peclet;
  }
  if (semi) {
    // the convection block changes every step, so the pattern is rebuilt
    SparseMatrix cred = plt_ * conv * pk_;
    std::vector<Triplet> trip;
    append_block(trip, bk_red_, 0, 0, -1.0);
    for (int k = 0; k < nk_; ++k) trip.emplace_back(k, k, 0.0);
    append_block(trip, pk_m_pl_, 0, nk_, 1.0);
    append_block(trip, SparseMatrix(pk_m_pl_.transpose()), nk_, 0, 1.0);
    append_block(trip, cred, nk_, 0, -dt);
    append_block(trip, bl_red_, nk_, nk_, dt);
    jac0_.setZero();
    jac0_.setFromTriplets(trip.begin(), trip.end());
    jac0_.makeCompressed();
    const auto* outer = jac0_.outerIndexPtr();
    const auto* inner = jac0_.innerIndexPtr();
    for (int k = 0; k < nk_; ++k)
      for (auto q = outer[k]; q < outer[k + 1]; ++q)
        if (inner[q] == k) diag_index_[k] = q;
    lu_analyzed_ = false;
    jac_has_convection_ = true;
  }

  // explicit concave part W2'(phi^n), lumped
  Vector w2(n);
  for (int i = 0; i < nb; ++i) w2[i] = mass_diag_[i] * f_eff_.smooth().derivative(state.phi.bulk[i]);
  for (int i = 0; i < ns; ++i) w2[nb + i] = mass_diag_[nb + i] * g_eff_.smooth().derivative(state.phi.surface[i]);
  const Vector w2_red = pkt_ * w2;

  const Vector x_old = p.k_form().restrict(state.phi);
  const Vector rhs_conv = dt * (plt_ * conv_load);

  Vector d1(n), d2(n);
  auto eval_potential = [&](const Vector& phi) {
    potential_terms(f_eff_.convex(), phi.head(nb), ops.bulk_lumped, d1, d2, 0);
    potential_terms(g_eff_.convex(), phi.tail(ns), ops.surface_lumped, d1, d2, nb);
  };
  auto residual = [&](const Vector& x, const Vector& y, Vector& r) {
    const Vector phi = pk_ * x;
    eval_potential(phi);
    r.resize(nk_ + nl_);
    r.head(nk_) = pk_m_pl_ * y - bk_red_ * x - pkt_ * d1 - w2_red;
    r.tail(nl_) = pk_m_pl_.transpose() * (x - x_old) + dt * (bl_red_ * y) - rhs_conv;
    if (semi) r.tail(nl_) -= dt * (plt_ * (conv * phi));
  };
  auto scaled_norm_inf = [&](const Vector& r) { return r.cwiseQuotient(row_scale_).cwiseAbs().maxCoeff(); };
  auto scaled_norm_2 = [&](const Vector& r) { return r.cwiseQuotient(row_scale_).norm(); };

  Vector x = x_old, y = Vector::Zero(nl_), r;
  residual(x, y, r);
  double rn = scaled_norm_inf(r);
  const SparseMatrix pk2t = pkt_.cwiseProduct(pkt_);
  int corrections = -1;  // the first solve only primes mu
  bool converged = rn <= cfg_.newton_tol;
  if (converged) corrections = 0;
  // The Jacobian is factorized at phi^n and reused (chord iteration) until the contraction
  // degrades, so the step stays a function of (phi^n, t^n) alone.
  bool fresh = false;
  auto refactor = [&] {
    SparseMatrix jac = jac0_;
    const Vector dred = pk2t * d2;
    double* val = jac.valuePtr();
    for (int k = 0; k < nk_; ++k) val[diag_index_[k]] -= dred[k];
    factorize(jac, semi);
    jac_ = std::move(jac);
    fresh = true;
    ++st.factorizations;
  };
  if (!converged) refactor();
  while (!converged) {
    if (corrections >= cfg_.newton_max_iter) break;
    const Vector delta = solve(r);
    if (!delta.allFinite()) throw Error(ErrorKind::Nonconvergence, "Newton update is not finite; reduce dt");

    double s = 1.0;
    if (guard) {
      // fraction to the boundary of (-1, 1)
      const Vector phi = pk_ * x;
      const Vector dphi = pk_ * delta.head(nk_);
      const bool fb = f_eff_.singular(), gb = g_eff_.singular();
      for (int i = 0; i < n; ++i) {
        if ((i < nb && !fb) || (i >= nb && !gb) || dphi[i] == 0.0) continue;
        const double room = dphi[i] > 0 ? 1.0 - phi[i] : 1.0 + phi[i];
        s = std::min(s, 0.99 * room / std::abs(dphi[i]));
      }
    }
    const double r2 = scaled_norm_2(r);
    Vector xn, yn, rnew;
    int cuts = 0;
    bool accepted = false;
    for (;;) {
      xn = x + s * delta.head(nk_);
      yn = y + s * delta.tail(nl_);
      bool ok = true;
      try {
        residual(xn, yn, rnew);
      } catch (const SingularDomainError&) {
        ok = false;
      }
      // the priming solve is exact in mu and is always accepted when admissible
      if (ok && (corrections < 0 || scaled_norm_2(rnew) <= (1.0 - 1e-4 * s) * r2 ||
                 scaled_norm_inf(rnew) <= cfg_.newton_tol)) {
        accepted = true;
        break;
      }
      if (!fresh && cuts >= 2) break;  // stale Jacobian: refresh instead of cutting further
      if (++cuts > 40) throw Error(ErrorKind::Nonconvergence, "Newton line search failed; reduce dt");
      s *= 0.5;
    }
    st.line_search_cuts += cuts;
    if (!accepted) {
      residual(x, y, r);  // restores d2 at the current iterate
      refactor();
      continue;
    }
    const double rn_old = rn;
    x = std::move(xn);
    y = std::move(yn);
    r = std::move(rnew);
    rn = scaled_norm_inf(r);
    const bool priming = corrections < 0;
    ++corrections;
    converged = rn <= cfg_.newton_tol;
    fresh = false;
    if (!converged && !priming && rn > 0.25 * rn_old) refactor();
  }
  if (!converged) {
    std::ostringstream os;
    os << "Newton did not converge in " << cfg_.newton_max_iter << " iterations (residual " << rn
       << "); reduce dt";
    throw Error(ErrorKind::Nonconvergence, os.str());
  }
  st.newton_iterations = std::max(corrections, 0);
  st.residual = rn;
  if (stats) *stats = st;

  SimState out;
  out.time = state.time + dt;
  out.step = state.step + 1;
  out.phi = BulkSurfaceField::split(pk_ * x, nb);
  out.mu = BulkSurfaceField::split(pl_ * y, nb);
  return out;
}

// ---------------------------------------------------------------------------------------------

TrajectoryRecord run(TimeStepper& stepper, const BulkSurfaceField& initial, double tau, double t_end,
                     const RunOptions& opts) {
  const Problem& p = stepper.problem();
  const auto& cfg = stepper.config();
  if (!(t_end >= tau)) throw Error(ErrorKind::InvalidParameter, "run: t_end must not precede tau");
  if (opts.record_every < 1) throw Error(ErrorKind::InvalidParameter, "run: record_every must be >= 1");
  check_initial(p, initial, cfg.potential_mode == PotentialMode::DirectLog);

  TrajectoryRecord rec;
  rec.dt = cfg.dt;
  rec.cfl_warning = stepper.cfl_warning();
  const auto& ops = p.ops();
  const auto& f = stepper.effective_bulk();
  const auto& g = stepper.effective_surface();
  const auto& vel = stepper.velocity();

  SimState state;
  state.time = tau;
  state.phi = initial;

  double cum_d = 0.0, cum_w = 0.0, cum_v = 0.0;
  auto record = [&](const SimState& s, const BulkSurfaceField* prev, double dt, int newton) {
    TrajectorySample smp;
    smp.time = s.time;
    smp.step = s.step;
    smp.energy = energy(p, s.phi, f, g);
    smp.mass = mass_functional(s.phi, p.params(), ops);
    if (s.mu.bulk.size() > 0) smp.mu_norm = p.l_form().norm(s.mu);
    if (prev && opts.rate_norm) {
      BulkSurfaceField rate = s.phi - *prev;
      rate *= 1.0 / dt;
      smp.rate_dual = p.l_solver().dual_norm(rate);
    }
    smp.velocity_norm = vel.l2_norm(s.time);
    smp.envelope = vel.is_zero() ? 0.0 : vel.envelope(s.time);
    smp.max_abs = s.phi.max_abs();
    smp.cum_dissipation = cum_d;
    smp.cum_work = cum_w;
    smp.cum_velocity_sq = cum_v;
    smp.newton_iterations = newton;
    rec.samples.push_back(smp);
    if (opts.keep_states) rec.states.push_back(s);
  };
  record(state, nullptr, cfg.dt, 0);
  rec.max_abs = state.phi.max_abs();

  const double span = t_end - tau;
  long nsteps = static_cast<long>(std::ceil(span / cfg.dt - 1e-9));
  if (span <= 0.0) nsteps = 0;
  // Step times live on the global grid k*dt when tau is on it, so that runs restarted from an
  // aligned intermediate time reproduce the uninterrupted run bitwise.
  const double k0 = std::round(tau / cfg.dt);
  const bool aligned = std::abs(tau / cfg.dt - k0) <= 1e-9 * std::max(1.0, std::abs(k0));
  const bool end_on_grid = std::abs(span / cfg.dt - static_cast<double>(nsteps)) <= 1e-9 * std::max<double>(1.0, nsteps);
  auto grid = [&](long i) { return aligned ? (k0 + static_cast<double>(i)) * cfg.dt : tau + static_cast<double>(i) * cfg.dt; };
  for (long i = 1; i <= nsteps; ++i) {
    const double target = i == nsteps && !end_on_grid ? t_end : grid(i);
    const double dt = target - state.time;
    StepStats st;
    SimState next;
    if (std::abs(dt - cfg.dt) <= 1e-14 * std::max(1.0, std::abs(target))) {
      next = stepper.step_adaptive(state, &st);
    } else {
      // shortened final step
      SchemeConfig c2 = cfg;
      c2.dt = dt;
      TimeStepper tail(p, c2, vel);
      next = tail.step_adaptive(state, &st);
    }
    next.time = target;
    const double h = next.time - state.time;
    cum_d += h * std::pow(p.l_form().norm(next.mu), 2);
    cum_w += h * stepper.convection_work(next.phi, next.mu, next.time);
    cum_v += h * std::pow(vel.l2_norm(next.time), 2);
    rec.total_newton += st.newton_iterations;
    rec.max_newton = std::max(rec.max_newton, st.newton_iterations);
    if (st.upwinded > 0) ++rec.upwinded_steps;
    rec.max_abs = std::max(rec.max_abs, next.phi.max_abs());
    if (i % opts.record_every == 0 || i == nsteps) record(next, &state.phi, h, st.newton_iterations);
    state = std::move(next);
    if (opts.on_step) opts.on_step(state);
  }
  rec.interiority_breach = rec.max_abs > 1.0;
  rec.final_state = std::move(state);
  return rec;
}

double energy_inequality_residual(const TrajectoryRecord& record, std::size_t s_index, std::size_t t_index) {
  if (s_index > t_index || t_index >= record.samples.size())
    throw Error(ErrorKind::InvalidParameter, "energy residual: sample indices out of range");
  const auto& a = record.samples[s_index];
  const auto& b = record.samples[t_index];
  return b.energy.total + (b.cum_dissipation - a.cum_dissipation) - (b.cum_work - a.cum_work) - a.energy.total;
}

// ---------------------------------------------------------------------------------------------

namespace {

void write_vector(std::ostream& os, const char* tag, const Vector& v) {
  os << tag << ' ' << v.size() << '\n';
  for (int i = 0; i < v.size(); ++i) os << v[i] << '\n';
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw Error(ErrorKind::Io, "checkpoint: bad number '" + s + "'");
  return v;
}

Vector read_vector(std::istream& is, const char* tag) {
  std::string word;
  long count = -1;
  if (!(is >> word >> count) || word != tag || count < 0)
    throw Error(ErrorKind::Io, std::string("checkpoint: expected section '") + tag + "'");
  Vector v(count);
  for (long i = 0; i < count; ++i) {
    if (!(is >> word)) throw Error(ErrorKind::Io, std::string("checkpoint: truncated section '") + tag + "'");
    v[i] = parse_double(word);
  }
  return v;
}

}  // namespace

void save_checkpoint(const SimState& state, std::ostream& os) {
  const auto flags = os.flags();
  os << std::hexfloat;
  os << "bscch-checkpoint 1\n";
  os << "time " << state.time << '\n';
  os << "step " << state.step << '\n';
  write_vector(os, "phi", state.phi.bulk);
  write_vector(os, "psi", state.phi.surface);
  write_vector(os, "mu", state.mu.bulk);
  write_vector(os, "theta", state.mu.surface);
  os.flags(flags);
  if (!os) throw Error(ErrorKind::Io, "checkpoint: write failed");
}

SimState load_checkpoint(std::istream& is) {
  std::string magic, word;
  int version = 0;
  if (!(is >> magic >> version) || magic != "bscch-checkpoint")
    throw Error(ErrorKind::Io, "checkpoint: missing header");
  if (version != 1) throw Error(ErrorKind::Io, "checkpoint: unsupported version " + std::to_string(version));
  SimState s;
  if (!(is >> word) || word != "time" || !(is >> magic)) throw Error(ErrorKind::Io, "checkpoint: expected time");
  s.time = parse_double(magic);
  if (!(is >> word >> s.step) || word != "step") throw Error(ErrorKind::Io, "checkpoint: expected step");
  s.phi.bulk = read_vector(is, "phi");
  s.phi.surface = read_vector(is, "psi");
  s.mu.bulk = read_vector(is, "mu");
  s.mu.surface = read_vector(is, "theta");
  return s;
}

}  // namespace bscch
