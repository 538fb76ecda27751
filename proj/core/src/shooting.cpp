#include "mslddmm/shooting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>

#include "mslddmm/error.hpp"

namespace mslddmm {

namespace {

// Relative rounding level of a computed objective value; empirically the
// shooting map reproduces J to a few 1e-15 relative.
constexpr double kObjectiveRoundoff = 1e-14;

Matrix skew_part(const Matrix& m) { return 0.5 * (m - m.transpose()); }
Matrix sym_part(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void require_problem_shape(const RegistrationProblem& prob,
                           const MultiscaleConfiguration& q1) {
  if (!q1.same_shape(prob.target)) {
    throw Error(ErrorCode::kShape, "endpoint configuration has wrong shape");
  }
}

}  // namespace

InitialMomenta InitialMomenta::zero(const RegistrationProblem& prob) {
  return {MultiscaleMomentum::zeros_like(prob.source),
          SimMomentum::zero(prob.cfg.dim)};
}

double InitialMomenta::dot(const InitialMomenta& rhs) const {
  return p.dot(rhs.p) + pa.p_rho * rhs.pa.p_rho +
         pa.p_R.cwiseProduct(rhs.pa.p_R).sum() + pa.p_tau.dot(rhs.pa.p_tau);
}

MultiscaleConfiguration transformed_target(const SimElement& a1,
                                           const RegistrationProblem& prob) {
  return sim_act(a1, prob.target, prob.target_centers);
}

double endpoint_cost(const MultiscaleConfiguration& q1, const SimElement& a1,
                     const RegistrationProblem& prob) {
  require_problem_shape(prob, q1);
  const MultiscaleConfiguration moved = transformed_target(a1, prob);
  double sum = 0.0;
  for (std::size_t l = 0; l < q1.num_scales(); ++l) {
    sum += (q1.scale(l) - moved.scale(l)).squaredNorm();
  }
  return 0.5 * prob.data_weight * sum;
}

EndpointCostate endpoint_costate(const MultiscaleConfiguration& q1,
                                 const SimElement& a1,
                                 const RegistrationProblem& prob) {
  require_problem_shape(prob, q1);
  const int d = prob.cfg.dim;
  const MultiscaleConfiguration moved = transformed_target(a1, prob);
  EndpointCostate out{MultiscaleMomentum::zeros_like(q1), SimMomentum::zero(d)};
  Matrix outer = Matrix::Zero(d, d);
  for (std::size_t l = 0; l < q1.num_scales(); ++l) {
    out.p.scale(l) = -prob.data_weight * (q1.scale(l) - moved.scale(l));
    for (Index i = 0; i < q1.count(l); ++i) {
      const Vector centered = prob.target.point(l, i) - prob.target_centers[l];
      const auto pi = out.p.point(l, i);
      out.pa.p_rho -= pi.dot(a1.R * centered);
      outer.noalias() += pi * centered.transpose();
      out.pa.p_tau -= pi;
    }
  }
  out.pa.p_R = -a1.rho * outer;
  return out;
}

PhasePoint initial_state(const RegistrationProblem& prob,
                         const InitialMomenta& m0) {
  const SimMomentum pa = prob.sim_enabled ? m0.pa : SimMomentum::zero(prob.cfg.dim);
  return PhasePoint::with_momenta(prob.source, m0.p, pa);
}

ObjectiveValue objective(const RegistrationProblem& prob,
                         const InitialMomenta& m0, const ShootingSetup& setup) {
  const PhasePoint x0 = initial_state(prob, m0);
  const Trajectory traj = shoot(prob.cfg, x0, setup.steps, setup.scheme);
  ObjectiveValue v;
  v.kinetic = reduced_hamiltonian(prob.cfg, x0);
  v.data = endpoint_cost(traj.final().q, traj.final().a, prob);
  v.total = v.kinetic + v.data;
  return v;
}

ObjectiveAndGradient objective_and_gradient(const RegistrationProblem& prob,
                                            const InitialMomenta& m0,
                                            const ShootingSetup& setup) {
  const PhasePoint x0 = initial_state(prob, m0);
  ObjectiveAndGradient out{{}, InitialMomenta::zero(prob),
                           shoot(prob.cfg, x0, setup.steps, setup.scheme)};
  const PhasePoint& x1 = out.trajectory.final();
  out.value.kinetic = reduced_hamiltonian(prob.cfg, x0);
  out.value.data = endpoint_cost(x1.q, x1.a, prob);
  out.value.total = out.value.kinetic + out.value.data;

  // dg/dx at the endpoint; the costate is -dg.
  const EndpointCostate costate = endpoint_costate(x1.q, x1.a, prob);
  PhasePoint terminal = PhasePoint::zeros_like(x1);
  terminal.q = MultiscaleConfiguration::zeros_like(x1.q);
  for (std::size_t l = 0; l < x1.q.num_scales(); ++l) {
    terminal.q.scale(l) = -costate.p.scale(l);
  }
  if (prob.sim_enabled) {
    terminal.a.rho = -costate.pa.p_rho;
    terminal.a.R = -costate.pa.p_R;
    terminal.a.tau = -costate.pa.p_tau;
  }
  const PhasePoint lambda0 =
      adjoint_sweep(prob.cfg, out.trajectory, terminal, setup.scheme);

  // d h(x0) / d(p0, pa0) is the (dq, da) block of the Hamiltonian field.
  const PhasePoint field = phase_rhs(prob.cfg, x0);
  for (std::size_t l = 0; l < x0.p.num_scales(); ++l) {
    out.gradient.p.scale(l) = lambda0.p.scale(l) + field.q.scale(l);
  }
  if (prob.sim_enabled) {
    out.gradient.pa.p_rho = lambda0.pa.p_rho + field.a.rho;
    out.gradient.pa.p_R = lambda0.pa.p_R + field.a.R;
    out.gradient.pa.p_tau = lambda0.pa.p_tau + field.a.tau;
  }
  return out;
}

InitialMomenta gradient(const RegistrationProblem& prob,
                        const InitialMomenta& m0, const ShootingSetup& setup) {
  return objective_and_gradient(prob, m0, setup).gradient;
}

std::string_view to_string(StepPolicy policy) noexcept {
  switch (policy) {
    case StepPolicy::kFixed: return "fixed";
    case StepPolicy::kGrow: return "grow";
    case StepPolicy::kBarzilaiBorwein: return "bb";
  }
  return "bb";
}

StepPolicy parse_step_policy(std::string_view name) {
  if (name == "fixed") return StepPolicy::kFixed;
  if (name == "grow") return StepPolicy::kGrow;
  if (name == "bb") return StepPolicy::kBarzilaiBorwein;
  throw Error(ErrorCode::kConfig, "unknown step policy '" + std::string(name) + "'");
}

std::string_view to_string(MatchStatus status) noexcept {
  switch (status) {
    case MatchStatus::kConverged: return "converged";
    case MatchStatus::kMaxIterations: return "max_iterations";
    case MatchStatus::kStagnated: return "stagnated";
    case MatchStatus::kEnergyDrift: return "energy_drift";
  }
  return "unknown";
}

double TransversalityReport::max_residual(bool sim_enabled) const {
  if (!sim_enabled) return landmarks;
  return std::max({landmarks, p_rho, p_R, p_tau});
}

TransversalityReport transversality(const RegistrationProblem& prob,
                                    const Trajectory& traj) {
  const PhasePoint& x1 = traj.final();
  const EndpointCostate c = endpoint_costate(x1.q, x1.a, prob);
  TransversalityReport r;
  for (std::size_t l = 0; l < x1.p.num_scales(); ++l) {
    if (x1.p.count(l) == 0) continue;
    r.landmarks = std::max(
        r.landmarks, (x1.p.scale(l) - c.p.scale(l)).cwiseAbs().maxCoeff());
  }
  r.p_rho = std::abs(x1.pa.p_rho - c.pa.p_rho);
  const Matrix dR = x1.pa.p_R - c.pa.p_R;
  r.p_R = dR.cwiseAbs().maxCoeff();
  r.p_R_tangential = skew_part(dR * x1.a.R.transpose()).cwiseAbs().maxCoeff();
  r.p_tau = (x1.pa.p_tau - c.pa.p_tau).cwiseAbs().maxCoeff();

  const int d = prob.cfg.dim;
  r.p_rho_matrix_reading = Matrix::Zero(d, d);
  for (std::size_t l = 0; l < x1.q.num_scales(); ++l) {
    for (Index i = 0; i < x1.q.count(l); ++i) {
      const Vector centered = prob.target.point(l, i) - prob.target_centers[l];
      r.p_rho_matrix_reading.noalias() -=
          c.p.point(l, i) * (x1.a.R * centered).transpose();
    }
  }
  return r;
}

double energy_drift(const ScaleConfig& cfg, const Trajectory& traj) {
  const double h0 = reduced_hamiltonian(cfg, traj.initial());
  double drift = 0.0;
  for (const PhasePoint& x : traj.samples) {
    drift = std::max(drift, std::abs(reduced_hamiltonian(cfg, x) - h0));
  }
  return drift;
}

MatchResult optimize(const RegistrationProblem& prob,
                     const OptimizerOptions& opts) {
  return optimize(prob, opts, InitialMomenta::zero(prob));
}

MatchResult optimize(const RegistrationProblem& prob,
                     const OptimizerOptions& opts, InitialMomenta start) {
  if (opts.max_iters < 0 || !(opts.grad_tol >= 0.0) || !(opts.armijo_c > 0.0) ||
      !(opts.armijo_c < 1.0) || !(opts.initial_step > 0.0) ||
      opts.max_halvings < 0 || !(opts.energy_drift_tol > 0.0)) {
    throw Error(ErrorCode::kConfig, "invalid optimizer options");
  }
  if (!prob.sim_enabled) start.pa = SimMomentum::zero(prob.cfg.dim);

  MatchResult result;
  InitialMomenta x = std::move(start);
  ObjectiveAndGradient cur = objective_and_gradient(prob, x, opts.setup);
  result.initial_data = endpoint_cost(prob.source, SimElement::identity(prob.cfg.dim), prob);
  result.max_energy_drift = energy_drift(prob.cfg, cur.trajectory);

  double grad_norm = std::sqrt(cur.gradient.squared_norm());
  result.history.push_back({0, cur.value.total, cur.value.kinetic,
                            cur.value.data, grad_norm, 0.0, 0});

  double last_step = opts.initial_step;
  double bb_step = opts.initial_step;
  result.status = MatchStatus::kMaxIterations;
  for (int iter = 1;; ++iter) {
    if (grad_norm <= opts.grad_tol) {
      result.status = MatchStatus::kConverged;
      break;
    }
    if (iter > opts.max_iters) break;

    double step = opts.initial_step;
    if (opts.step_policy == StepPolicy::kGrow) step = 2.0 * last_step;
    if (opts.step_policy == StepPolicy::kBarzilaiBorwein) step = bb_step;

    const double g2 = grad_norm * grad_norm;
    // Below this predicted decrease the computed objective cannot resolve
    // the Armijo test and the directional derivative takes over.
    const double noise_floor =
        kObjectiveRoundoff * (std::abs(cur.value.kinetic) + std::abs(cur.value.data));
    bool accepted = false;
    int halvings = 0;
    InitialMomenta trial = x;
    std::optional<ObjectiveAndGradient> next;
    for (; halvings <= opts.max_halvings; ++halvings, step *= 0.5) {
      trial = x;
      trial.axpy(-step, cur.gradient);
      double value = std::numeric_limits<double>::infinity();
      try {
        value = objective(prob, trial, opts.setup).total;
      } catch (const DivergenceError&) {
      }
      if (!std::isfinite(value)) continue;
      if (value <= cur.value.total - opts.armijo_c * step * g2) {
        accepted = true;
        break;
      }
      if (opts.armijo_c * step * g2 <= noise_floor &&
          value <= cur.value.total + noise_floor) {
        // Approximate Armijo: phi'(t) <= (2c - 1) phi'(0) with
        // phi(t) = J(x - t g), phi'(t) = -<g(t), g>; phi itself is trusted
        // only up to the roundoff floor.
        ObjectiveAndGradient probe = objective_and_gradient(prob, trial, opts.setup);
        if (probe.gradient.dot(cur.gradient) >= -(1.0 - 2.0 * opts.armijo_c) * g2) {
          next = std::move(probe);
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      result.status = MatchStatus::kStagnated;
      break;
    }

    if (!next) next = objective_and_gradient(prob, trial, opts.setup);
    const double drift = energy_drift(prob.cfg, next->trajectory);
    result.max_energy_drift = std::max(result.max_energy_drift, drift);

    // BB1 step from s = x_{k+1} - x_k = -step g_k and y = g_{k+1} - g_k.
    InitialMomenta y = next->gradient;
    y.axpy(-1.0, cur.gradient);
    const double sy = -step * cur.gradient.dot(y);
    const double ss = step * step * g2;
    bb_step = sy > 0.0 ? ss / sy : 2.0 * step;
    bb_step = std::clamp(bb_step, 1e-12, 1e12);
    last_step = step;

    x = std::move(trial);
    cur = std::move(*next);
    grad_norm = std::sqrt(cur.gradient.squared_norm());
    result.history.push_back({iter, cur.value.total, cur.value.kinetic,
                              cur.value.data, grad_norm, step, halvings});
    if (drift > opts.energy_drift_tol) {
      result.status = MatchStatus::kEnergyDrift;
      break;
    }
  }

  result.final_grad_norm = grad_norm;
  if (prob.sim_enabled && opts.complete_normal_momentum &&
      result.status == MatchStatus::kConverged) {
    // p_R(t) = R(t) p_R(0) along the flow, and only skew(p_R R^T) drives it:
    // pick sym(p_R(0)) so that R(1) p_R(0) equals the endpoint costate.
    const PhasePoint& x1 = cur.trajectory.final();
    const EndpointCostate c = endpoint_costate(x1.q, x1.a, prob);
    InitialMomenta completed = x;
    completed.pa.p_R = skew_part(x.pa.p_R) + sym_part(x1.a.R.transpose() * c.pa.p_R);
    ObjectiveAndGradient redo = objective_and_gradient(prob, completed, opts.setup);
    result.completion_objective_shift = redo.value.total - cur.value.total;
    x = std::move(completed);
    cur = std::move(redo);
  }

  result.final_data = cur.value.data;
  result.transversality = transversality(prob, cur.trajectory);
  result.momenta = std::move(x);
  result.trajectory = std::move(cur.trajectory);
  return result;
}

MultiStartResult optimize_multistart(const RegistrationProblem& prob,
                                     const OptimizerOptions& opts,
                                     const std::vector<InitialMomenta>& starts,
                                     unsigned threads) {
  if (starts.empty()) throw Error(ErrorCode::kContract, "multi-start needs at least one start");
  std::vector<std::optional<MatchResult>> runs(starts.size());
  std::vector<std::exception_ptr> errors(starts.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < starts.size(); i = next++) {
      try {
        runs[i] = optimize(prob, opts, starts[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1u), starts.size());
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  MultiStartResult out;
  const auto final_objective = [](const MatchResult& r) { return r.history.back().objective; };
  bool best_converged = false;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const MatchResult& r = *runs[i];
    out.statuses.push_back(r.status);
    out.objectives.push_back(final_objective(r));
    const bool converged = r.status == MatchStatus::kConverged;
    const bool better = i == 0 || (converged && !best_converged) ||
                        (converged == best_converged &&
                         final_objective(r) < out.objectives[out.best_start]);
    if (better) {
      out.best_start = i;
      best_converged = converged;
    }
  }
  out.best = std::move(*runs[out.best_start]);
  return out;
}

}  // namespace mslddmm
