#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "bscch/fem.hpp"
#include "bscch/forms.hpp"
#include "bscch/mesh.hpp"
#include "bscch/params.hpp"
#include "bscch/potentials.hpp"
#include "bscch/velocity.hpp"

namespace bscch {

enum class PotentialMode { Yosida, DirectLog };
enum class ConvectionTreatment { Explicit, SemiImplicit };

const char* to_string(PotentialMode mode);
const char* to_string(ConvectionTreatment c);

struct SchemeConfig {
  double dt = 1e-3;
  /// Convergence threshold on the mass-normalized residual (max norm).
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  PotentialMode potential_mode = PotentialMode::DirectLog;
  double lambda = 0.01;  // Yosida level
  ConvectionTreatment convection = ConvectionTreatment::Explicit;
  /// Number of times a failed step is retried with half the step size.
  int max_halvings = 4;

  void validate() const;
};

/// Everything the discrete system needs: mesh, operators, parameters, potentials.
/// Holds the mesh and operators by value; forms reference them, so the problem is pinned in memory.
class Problem {
 public:
  Problem(BulkSurfaceMesh mesh, SystemParams params, SplitPotential bulk_potential,
          SplitPotential surface_potential);
  Problem(const Problem&) = delete;
  Problem& operator=(const Problem&) = delete;

  const BulkSurfaceMesh& mesh() const { return mesh_; }
  const FemOperators& ops() const { return ops_; }
  const SystemParams& params() const { return params_; }
  const SplitPotential& bulk_potential() const { return f_; }
  const SplitPotential& surface_potential() const { return g_; }
  const CouplingForm& k_form() const { return *k_form_; }
  const CouplingForm& l_form() const { return *l_form_; }
  const EllipticSolver& l_solver() const { return *l_solver_; }
  DomainGeometry geometry() const { return ops_.geometry(); }
  int num_bulk() const { return ops_.num_bulk(); }
  int num_surface() const { return ops_.num_surface(); }

 private:
  BulkSurfaceMesh mesh_;
  FemOperators ops_;
  SystemParams params_;
  SplitPotential f_, g_;
  std::unique_ptr<CouplingForm> k_form_, l_form_;
  std::unique_ptr<EllipticSolver> l_solver_;
};

struct EnergyBreakdown {
  double bulk_dirichlet = 0.0;
  double bulk_potential = 0.0;
  double surface_dirichlet = 0.0;
  double surface_potential = 0.0;
  double k_penalty = 0.0;
  double total = 0.0;
};

/// Free energy with mass-lumped potential quadrature. The Dirichlet and penalty parts use the
/// same K-form as the scheme. Throws SingularDomainError on non-interior values.
EnergyBreakdown energy(const Problem& problem, const BulkSurfaceField& field,
                       const SplitPotential& f, const SplitPotential& g);
EnergyBreakdown energy(const Problem& problem, const BulkSurfaceField& field);

struct SimState {
  double time = 0.0;
  long step = 0;
  BulkSurfaceField phi;  // (phi, psi)
  BulkSurfaceField mu;   // (mu, theta) from the last step; empty before the first step
};

struct StepStats {
  int newton_iterations = 0;
  double residual = 0.0;
  int line_search_cuts = 0;
  int factorizations = 0;
  int upwinded = 0;
  double max_peclet = 0.0;
  int halvings = 0;
};

/// Convex-splitting backward Euler step on the monolithic (phi, mu) system:
///   (mu, eta) = <phi^{n+1}, eta>_K + (W1'(phi^{n+1}) + W2'(phi^n), eta)
///   (phi^{n+1} - phi^n, zeta) - dt (phi^n v(t^n), grad zeta) = -dt <mu, zeta>_L
/// with lumped L2 products, test functions from the K- and L-constrained spaces, and Newton on
/// the full system. The chemical potential is re-initialized by the first Newton solve from
/// mu = 0, so a step depends on (phi^n, t^n) only.
class TimeStepper {
 public:
  TimeStepper(const Problem& problem, SchemeConfig cfg, VelocityPair velocity = {});

  /// Throws Error(Nonconvergence) when Newton fails; the caller may retry with a smaller dt.
  SimState step(const SimState& state, StepStats* stats = nullptr);
  /// step() with halving on failure (up to cfg.max_halvings levels).
  SimState step_adaptive(const SimState& state, StepStats* stats = nullptr);

  const Problem& problem() const { return *problem_; }
  const SchemeConfig& config() const { return cfg_; }
  const VelocityPair& velocity() const { return velocity_; }
  const SplitPotential& effective_bulk() const { return f_eff_; }
  const SplitPotential& effective_surface() const { return g_eff_; }
  /// True when explicit convection violates dt <= h / max|v|.
  bool cfl_warning() const { return cfl_warning_; }

  /// Convection work at the state: (phi v(t), grad mu) + (psi w(t), grad_G theta).
  double convection_work(const BulkSurfaceField& phi, const BulkSurfaceField& mu, double t) const;

 private:
  SimState step_with(const SimState& state, double dt, StepStats* stats);
  void build_static(double dt);
  void factorize(const SparseMatrix& jac, bool nonsymmetric);
  /// Newton update -J^{-1} r with the current factorization.
  Vector solve(const Vector& r);

  const Problem* problem_;
  SchemeConfig cfg_;
  VelocityPair velocity_;
  SplitPotential f_eff_, g_eff_;
  bool cfl_warning_ = false;

  // cached per dt
  double cached_dt_ = -1.0;
  int nk_ = 0, nl_ = 0;
  SparseMatrix pk_, pl_, pkt_, plt_;
  SparseMatrix bk_red_, bl_red_;       // P^T B P
  SparseMatrix pk_m_pl_;               // P_K^T M P_L
  Vector mass_diag_;                   // lumped stacked
  Vector row_scale_;                   // mass normalization of residual rows
  SparseMatrix jac0_;                  // Jacobian without the potential diagonal
  std::vector<Eigen::Index> diag_index_;  // positions of (k,k), k < nk, in jac0_ storage
  SparseMatrix jac_;                      // last factorized Jacobian
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  Eigen::SparseLU<SparseMatrix> lu_;
  bool ldlt_analyzed_ = false, lu_analyzed_ = false, use_lu_ = false;
  bool jac_has_convection_ = false;
};

struct TrajectorySample {
  double time = 0.0;
  long step = 0;
  EnergyBreakdown energy;
  MassValue mass = 0.0;
  double mu_norm = 0.0;       // ||(mu, theta)||_{L,beta}
  double rate_dual = 0.0;     // ||(phi^{n+1} - phi^n)/dt||_{L,beta,*}
  double velocity_norm = 0.0;
  double envelope = 0.0;
  double max_abs = 0.0;       // max nodal |phi|, |psi|
  double cum_dissipation = 0.0;  // sum dt ||mu||_L^2 up to this sample
  double cum_work = 0.0;         // sum dt (convection work at the right endpoint)
  double cum_velocity_sq = 0.0;  // sum dt ||(v,w)||^2
  int newton_iterations = 0;
};

struct TrajectoryRecord {
  std::vector<TrajectorySample> samples;
  std::vector<SimState> states;  // stored when keep_states is set
  SimState final_state;
  double dt = 0.0;
  long total_newton = 0;
  int max_newton = 0;
  bool cfl_warning = false;
  int upwinded_steps = 0;
  double max_abs = 0.0;
  bool interiority_breach = false;
};

struct RunOptions {
  int record_every = 1;
  bool keep_states = false;
  /// Compute the dual norm of the increment at recorded samples (one extra solve each).
  bool rate_norm = true;
  /// Called after every completed step.
  std::function<void(const SimState&)> on_step;
};

/// Advances from tau to t_end in steps of cfg.dt (the last step is shortened to land on t_end).
/// When tau is a multiple of dt the step times are k*dt.
/// The initial field must be admissible: |values| <= 1, correct mass, trace constraint for K = 0.
TrajectoryRecord run(TimeStepper& stepper, const BulkSurfaceField& initial, double tau,
                     double t_end, const RunOptions& opts = {});

/// Checks admissibility of initial data for the problem. Throws Error with the violated rule.
void check_initial(const Problem& problem, const BulkSurfaceField& initial, bool strict_interior);

/// E(t) + sum dissipation dt - sum convection work dt - E(s) between two recorded samples.
double energy_inequality_residual(const TrajectoryRecord& record, std::size_t s_index,
                                  std::size_t t_index);

/// Versioned text dump with hexfloat values; load(dump(x)) == x bitwise.
void save_checkpoint(const SimState& state, std::ostream& os);
SimState load_checkpoint(std::istream& is);

}  // namespace bscch
