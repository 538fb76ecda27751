#pragma once

// Inexact matching by geodesic shooting.
//
//   J(p0, pa0) = h(x0) + g(q(1), a(1)),
//   g(q, a)    = lambda/2 sum_l sum_i |q_i^l - a . q_{T,i}^l|^2,
//
// where x0 = (q_S, p0, e, pa0), the kinetic term equals the conserved
// reduced Hamiltonian, and a acts on the target through the centered
// similarity action. Gradients differentiate the discrete integrator.

#include <string_view>
#include <vector>

#include "mslddmm/integrator.hpp"
#include "mslddmm/state.hpp"

namespace mslddmm {

struct InitialMomenta {
  MultiscaleMomentum p;
  SimMomentum pa;

  static InitialMomenta zero(const RegistrationProblem& prob);
  double squared_norm() const { return p.squared_norm() + pa.squared_norm(); }
  void axpy(double s, const InitialMomenta& rhs) {
    p.axpy(s, rhs.p);
    pa.axpy(s, rhs.pa);
  }
  double dot(const InitialMomenta& rhs) const;
};

/// (-dg/dq, -dg/da) at the endpoint.
struct EndpointCostate {
  MultiscaleMomentum p;
  SimMomentum pa;
};

/// Target transformed by a1 with the problem's fixed target centers.
MultiscaleConfiguration transformed_target(const SimElement& a1,
                                           const RegistrationProblem& prob);

double endpoint_cost(const MultiscaleConfiguration& q1, const SimElement& a1,
                     const RegistrationProblem& prob);

/// p(1) = -lambda (q(1) - a.q_T), p_rho(1) = -sum <p_i, R (q_T,i - c)>,
/// p_R(1) = -rho sum p_i (q_T,i - c)^T, p_tau(1) = -sum p_i.
EndpointCostate endpoint_costate(const MultiscaleConfiguration& q1,
                                 const SimElement& a1,
                                 const RegistrationProblem& prob);

struct ShootingSetup {
  int steps = 50;
  Scheme scheme = Scheme::kRk4;
};

/// Initial phase point for the given momenta. With Sim+ disabled the group
/// block stays at rest whatever pa holds.
PhasePoint initial_state(const RegistrationProblem& prob,
                         const InitialMomenta& m0);

struct ObjectiveValue {
  double total = 0.0;
  double kinetic = 0.0;
  double data = 0.0;
};

ObjectiveValue objective(const RegistrationProblem& prob,
                         const InitialMomenta& m0, const ShootingSetup& setup);

struct ObjectiveAndGradient {
  ObjectiveValue value;
  InitialMomenta gradient;
  Trajectory trajectory;
};

/// Exact gradient of the discrete objective. The Sim+ block of the gradient
/// is zero when the problem has Sim+ disabled.
ObjectiveAndGradient objective_and_gradient(const RegistrationProblem& prob,
                                            const InitialMomenta& m0,
                                            const ShootingSetup& setup);

InitialMomenta gradient(const RegistrationProblem& prob,
                        const InitialMomenta& m0, const ShootingSetup& setup);

enum class StepPolicy {
  kFixed,           // every line search starts from initial_step
  kGrow,            // start from twice the last accepted step
  kBarzilaiBorwein, // start from the BB1 step length
};

std::string_view to_string(StepPolicy policy) noexcept;
/// "fixed", "grow" or "bb"; kConfig otherwise.
StepPolicy parse_step_policy(std::string_view name);

struct OptimizerOptions {
  ShootingSetup setup;
  int max_iters = 500;
  double grad_tol = 1e-8;
  double armijo_c = 1e-4;
  double initial_step = 1.0;
  int max_halvings = 40;
  StepPolicy step_policy = StepPolicy::kBarzilaiBorwein;
  /// After convergence, fix the component of p_R(0) that the dynamics do
  /// not see (symmetric part in the rotation frame) so the full-matrix
  /// endpoint condition on p_R holds.
  bool complete_normal_momentum = true;
  /// Largest |H(x(t)) - H(x(0))| tolerated on an accepted iterate's
  /// trajectory; beyond it the run stops with kEnergyDrift.
  double energy_drift_tol = 1e-6;
};

enum class MatchStatus { kConverged, kMaxIterations, kStagnated, kEnergyDrift };
std::string_view to_string(MatchStatus status) noexcept;

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double kinetic = 0.0;
  double data = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  int halvings = 0;
};

/// Residuals of the endpoint conditions on the final trajectory, as max
/// absolute coordinate differences between shot momenta and the costate.
struct TransversalityReport {
  double landmarks = 0.0;
  double p_rho = 0.0;
  double p_R = 0.0;
  double p_tau = 0.0;
  /// p_R residual restricted to directions tangent to SO(d) at R(1).
  double p_R_tangential = 0.0;
  /// Alternative reading of the p_rho formula as a d x d matrix
  /// -sum p_i (R (q_T,i - c))^T; its trace is the scalar reading.
  Matrix p_rho_matrix_reading;

  double max_residual(bool sim_enabled) const;
};

TransversalityReport transversality(const RegistrationProblem& prob,
                                    const Trajectory& traj);

/// max_k |h(x_k) - h(x_0)|
double energy_drift(const ScaleConfig& cfg, const Trajectory& traj);

struct MatchResult {
  InitialMomenta momenta;
  Trajectory trajectory;
  std::vector<IterationRecord> history;
  MatchStatus status = MatchStatus::kMaxIterations;
  double initial_data = 0.0;
  double final_data = 0.0;
  double final_grad_norm = 0.0;
  /// Max energy drift over all accepted trajectories.
  double max_energy_drift = 0.0;
  /// Objective change caused by the normal-momentum completion.
  double completion_objective_shift = 0.0;
  TransversalityReport transversality;
};

/// Gradient descent with Armijo backtracking from `start` (zero momenta when
/// omitted). Divergent trial points count as failed Armijo tests.
MatchResult optimize(const RegistrationProblem& prob,
                     const OptimizerOptions& opts);
MatchResult optimize(const RegistrationProblem& prob,
                     const OptimizerOptions& opts, InitialMomenta start);

struct MultiStartResult {
  MatchResult best;
  std::size_t best_start = 0;
  /// Per start, in input order.
  std::vector<MatchStatus> statuses;
  std::vector<double> objectives;
};

/// Independent optimize() runs, at most `threads` at a time. The best run has
/// the lowest final objective among converged runs (among all runs if none
/// converged); ties go to the earlier start, so the choice does not depend
/// on `threads`. kContract if `starts` is empty.
MultiStartResult optimize_multistart(const RegistrationProblem& prob,
                                     const OptimizerOptions& opts,
                                     const std::vector<InitialMomenta>& starts,
                                     unsigned threads = 1);

}  // namespace mslddmm
