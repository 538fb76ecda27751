#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "mslddmm/hamiltonian.hpp"

namespace mslddmm {

enum class Scheme { kEuler, kRk4 };

std::string_view to_string(Scheme scheme) noexcept;
/// "euler" or "rk4"; kConfig otherwise.
Scheme parse_scheme(std::string_view name);

struct ShootOptions {
  /// Integration horizon; negative values integrate backwards in time.
  double duration = 1.0;
  /// Replace R by its polar factor after every step. Breaks the exactness of
  /// adjoint_sweep, which refuses such trajectories.
  bool project_rotation = false;
};

/// Dense record of a fixed-step solve: samples[k] is the state at
/// t_k = k * duration / steps, samples[0] the initial condition.
struct Trajectory {
  std::vector<PhasePoint> samples;
  int steps = 0;
  Scheme scheme = Scheme::kRk4;
  double duration = 1.0;
  bool projected = false;

  double dt() const noexcept { return duration / steps; }
  const PhasePoint& initial() const { return samples.front(); }
  const PhasePoint& final() const { return samples.back(); }
};

/// Stage inputs Y_s and slopes f(Y_s) of one explicit step from x.
struct StepStages {
  std::vector<PhasePoint> inputs;
  std::vector<PhasePoint> slopes;
};

StepStages compute_stages(const ScaleConfig& cfg, const PhasePoint& x,
                          double h, Scheme scheme);

/// Stage weights b_s and input offsets c_s (Y_s = x + c_s h k_{s-1}).
const std::vector<double>& stage_weights(Scheme scheme);
const std::vector<double>& stage_offsets(Scheme scheme);

/// Throws kContract if steps < 1 and DivergenceError on a non-finite sample.
Trajectory shoot(const ScaleConfig& cfg, const PhasePoint& x0, int steps,
                 Scheme scheme = Scheme::kRk4, const ShootOptions& opts = {});

/// Advances an auxiliary state z alongside one step of the phase flow.
/// `slope(stage_state, z_stage)` returns dz/dt; the stage states are those of
/// the phase step, so the pair (x, z) is integrated as one coupled system.
template <class Aux, class Slope>
Aux advance_aux(Scheme scheme, double h, const std::vector<PhasePoint>& stages,
                const Aux& z, Slope&& slope) {
  const std::vector<double>& offsets = stage_offsets(scheme);
  const std::vector<double>& weights = stage_weights(scheme);
  std::vector<Aux> k;
  k.reserve(stages.size());
  for (std::size_t s = 0; s < stages.size(); ++s) {
    Aux zs = z;
    if (s > 0) zs += (offsets[s] * h) * k[s - 1];
    k.push_back(slope(stages[s], zs));
  }
  Aux next = z;
  for (std::size_t s = 0; s < k.size(); ++s) next += (weights[s] * h) * k[s];
  return next;
}

/// Flow Jacobians J_i(t_k) of the scale-ell velocity at the scale-ell
/// landmarks: dJ_i/dt = du^ell(q_i^ell(t)) J_i, J_i(0) = J0[i]. Indexed
/// [step][landmark].
std::vector<std::vector<Matrix>> variational_transport(
    const ScaleConfig& cfg, const Trajectory& traj, std::size_t ell,
    const std::vector<Matrix>& J0);

/// Reverse-mode derivative of the discrete flow map x_0 -> x_N: returns
/// (d x_N / d x_0)^T terminal_costate. If `expected` is given and differs
/// from the trajectory's scheme, throws kContract.
PhasePoint adjoint_sweep(const ScaleConfig& cfg, const Trajectory& traj,
                         const PhasePoint& terminal_costate,
                         std::optional<Scheme> expected = std::nullopt);

}  // namespace mslddmm
