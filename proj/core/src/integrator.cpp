#include "mslddmm/integrator.hpp"

#include <string>

#include "mslddmm/error.hpp"

namespace mslddmm {

std::string_view to_string(Scheme scheme) noexcept {
  return scheme == Scheme::kEuler ? "euler" : "rk4";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "euler") return Scheme::kEuler;
  if (name == "rk4") return Scheme::kRk4;
  throw Error(ErrorCode::kConfig,
              "unknown integration scheme '" + std::string(name) + "'");
}

const std::vector<double>& stage_weights(Scheme scheme) {
  static const std::vector<double> euler{1.0};
  static const std::vector<double> rk4{1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0,
                                       1.0 / 6.0};
  return scheme == Scheme::kEuler ? euler : rk4;
}

const std::vector<double>& stage_offsets(Scheme scheme) {
  static const std::vector<double> euler{0.0};
  static const std::vector<double> rk4{0.0, 0.5, 0.5, 1.0};
  return scheme == Scheme::kEuler ? euler : rk4;
}

StepStages compute_stages(const ScaleConfig& cfg, const PhasePoint& x,
                          double h, Scheme scheme) {
  const std::vector<double>& offsets = stage_offsets(scheme);
  StepStages st;
  st.inputs.reserve(offsets.size());
  st.slopes.reserve(offsets.size());
  for (std::size_t s = 0; s < offsets.size(); ++s) {
    PhasePoint y = x;
    if (s > 0) y.axpy(offsets[s] * h, st.slopes[s - 1]);
    st.slopes.push_back(phase_rhs(cfg, y));
    st.inputs.push_back(std::move(y));
  }
  return st;
}

Trajectory shoot(const ScaleConfig& cfg, const PhasePoint& x0, int steps,
                 Scheme scheme, const ShootOptions& opts) {
  if (steps < 1) {
    throw Error(ErrorCode::kContract, "shoot needs at least one step");
  }
  if (!x0.all_finite()) {
    throw DivergenceError(0, "initial state is not finite");
  }
  Trajectory traj;
  traj.steps = steps;
  traj.scheme = scheme;
  traj.duration = opts.duration;
  traj.projected = opts.project_rotation;
  traj.samples.reserve(static_cast<std::size_t>(steps) + 1);
  traj.samples.push_back(x0);

  const double h = traj.dt();
  const std::vector<double>& weights = stage_weights(scheme);
  for (int n = 0; n < steps; ++n) {
    const PhasePoint& x = traj.samples.back();
    const StepStages st = compute_stages(cfg, x, h, scheme);
    PhasePoint next = x;
    for (std::size_t s = 0; s < weights.size(); ++s) {
      next.axpy(weights[s] * h, st.slopes[s]);
    }
    if (opts.project_rotation) next.a.R = project_rotation(next.a.R);
    if (!next.all_finite()) {
      throw DivergenceError(static_cast<std::size_t>(n) + 1,
                            "geodesic shooting produced a non-finite state");
    }
    traj.samples.push_back(std::move(next));
  }
  return traj;
}

std::vector<std::vector<Matrix>> variational_transport(
    const ScaleConfig& cfg, const Trajectory& traj, std::size_t ell,
    const std::vector<Matrix>& J0) {
  const PhasePoint& x0 = traj.initial();
  const Index n = x0.q.count(ell);
  const int d = cfg.dim;
  if (static_cast<Index>(J0.size()) != n) {
    throw Error(ErrorCode::kShape, "need one initial matrix per landmark");
  }
  // Pack the per-landmark matrices side by side: d x (d * n).
  Matrix J(d, d * n);
  for (Index i = 0; i < n; ++i) {
    if (J0[i].rows() != d || J0[i].cols() != d) {
      throw Error(ErrorCode::kShape, "initial matrices must be d x d");
    }
    J.middleCols(i * d, d) = J0[i];
  }
  auto unpack = [&](const Matrix& packed) {
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) out.push_back(packed.middleCols(i * d, d));
    return out;
  };

  std::vector<std::vector<Matrix>> result;
  result.reserve(traj.samples.size());
  result.push_back(unpack(J));
  const double h = traj.dt();
  for (int step = 0; step < traj.steps; ++step) {
    const StepStages st = compute_stages(cfg, traj.samples[step], h,
                                         traj.scheme);
    J = advance_aux(traj.scheme, h, st.inputs, J,
                    [&](const PhasePoint& y, const Matrix& Js) {
                      const ControlField field = bands_from(y.q, y.p);
                      Matrix dJ(d, d * n);
                      for (Index i = 0; i < n; ++i) {
                        dJ.middleCols(i * d, d) =
                            velocity_jacobian(cfg, field, ell, y.q.point(ell, i)) *
                            Js.middleCols(i * d, d);
                      }
                      return dJ;
                    });
    if (!J.allFinite()) {
      throw DivergenceError(static_cast<std::size_t>(step) + 1,
                            "variational transport produced a non-finite state");
    }
    result.push_back(unpack(J));
  }
  return result;
}

PhasePoint adjoint_sweep(const ScaleConfig& cfg, const Trajectory& traj,
                         const PhasePoint& terminal_costate,
                         std::optional<Scheme> expected) {
  if (expected && *expected != traj.scheme) {
    throw Error(ErrorCode::kContract,
                "adjoint sweep scheme does not match the trajectory");
  }
  if (traj.projected) {
    throw Error(ErrorCode::kContract,
                "adjoint sweep needs an unprojected trajectory");
  }
  const double h = traj.dt();
  PhasePoint lambda = terminal_costate;
  for (int n = traj.steps - 1; n >= 0; --n) {
    const PhasePoint& x = traj.samples[static_cast<std::size_t>(n)];
    if (traj.scheme == Scheme::kEuler) {
      lambda.axpy(h, phase_rhs_vjp(cfg, x, lambda));
      continue;
    }
    const StepStages st = compute_stages(cfg, x, h, traj.scheme);
    // x' = x + h/6 k1 + h/3 k2 + h/3 k3 + h/6 k4,
    // k1 = f(x), k2 = f(x + h/2 k1), k3 = f(x + h/2 k2), k4 = f(x + h k3).
    PhasePoint result = lambda;
    const PhasePoint l4 = phase_rhs_vjp(cfg, st.inputs[3], (h / 6.0) * lambda);
    result.axpy(1.0, l4);
    PhasePoint c3 = (h / 3.0) * lambda;
    c3.axpy(h, l4);
    const PhasePoint l3 = phase_rhs_vjp(cfg, st.inputs[2], c3);
    result.axpy(1.0, l3);
    PhasePoint c2 = (h / 3.0) * lambda;
    c2.axpy(0.5 * h, l3);
    const PhasePoint l2 = phase_rhs_vjp(cfg, st.inputs[1], c2);
    result.axpy(1.0, l2);
    PhasePoint c1 = (h / 6.0) * lambda;
    c1.axpy(0.5 * h, l2);
    result.axpy(1.0, phase_rhs_vjp(cfg, st.inputs[0], c1));
    lambda = std::move(result);
  }
  return lambda;
}

}  // namespace mslddmm
