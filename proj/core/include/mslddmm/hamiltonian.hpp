#pragma once

// Joint Hamiltonian of the multiscale landmark system and the Sim+ block.
//
// With bands mu_k = sum_{m >= k} sum_i delta_{q_i^m}^{p_i^m}, the reduced
// landmark Hamiltonian is h = 1/2 sum_k <mu_k, K^k mu_k>. Equivalently, two
// landmarks i (scale m_i) and j (scale m_j) interact through the summed
// kernel sum_{k <= min(m_i, m_j)} K^k, which is what phase_rhs evaluates.

#include "mslddmm/kernels.hpp"
#include "mslddmm/simgroup.hpp"
#include "mslddmm/state.hpp"

namespace mslddmm {

/// Joint state (q, p, a, p_a). Tangent and cotangent vectors use the same
/// layout.
struct PhasePoint {
  MultiscaleConfiguration q;
  MultiscaleMomentum p;
  SimElement a;
  SimMomentum pa;

  /// (q, p, e, 0)
  static PhasePoint at_rest(const MultiscaleConfiguration& q);
  static PhasePoint with_momenta(const MultiscaleConfiguration& q,
                                 const MultiscaleMomentum& p,
                                 const SimMomentum& pa);
  /// All-zero vector with the shape of `shape`.
  static PhasePoint zeros_like(const PhasePoint& shape);

  int dim() const noexcept { return q.dim(); }
  bool all_finite() const noexcept;
  void axpy(double s, const PhasePoint& rhs);
  double dot(const PhasePoint& rhs) const;
};

PhasePoint operator+(PhasePoint x, const PhasePoint& y);
PhasePoint operator*(double s, PhasePoint x);

/// Flat coordinates: q scales, p scales, rho, R (column-major), tau, p_rho,
/// p_R, p_tau.
Vector flatten(const PhasePoint& x);
PhasePoint unflatten(const Eigen::Ref<const Vector>& flat,
                     const PhasePoint& shape);

/// sum_l sum_i <p_i^l, u^l(q_i^l)> - |A u|^2 / 2 for the control generated
/// by `bands`.
double h_landmarks(const ScaleConfig& cfg, const MultiscaleConfiguration& q,
                   const MultiscaleMomentum& p, const ControlField& bands);

/// Landmark part of the reduced Hamiltonian, 1/2 rkhs_energy(bands_from(q,p)).
double landmark_energy(const ScaleConfig& cfg, const MultiscaleConfiguration& q,
                       const MultiscaleMomentum& p);

/// Landmark part plus the Sim+ part at their optimal controls.
double reduced_hamiltonian(const ScaleConfig& cfg, const PhasePoint& x);

/// Hamiltonian vector field (dq, dp, da, dpa).
PhasePoint phase_rhs(const ScaleConfig& cfg, const PhasePoint& x);

/// lambda^T (d phase_rhs / dx), the transposed linearization applied to a
/// cotangent vector.
PhasePoint phase_rhs_vjp(const ScaleConfig& cfg, const PhasePoint& x,
                         const PhasePoint& lambda);

/// Compares the two finest-scale velocity formulas (all momentum on the
/// finest scale vs. the band construction) at every landmark position.
/// Requires p to vanish on all but the finest scale (kContract otherwise).
/// Returns the max discrepancy.
double finest_scale_reduction_check(const ScaleConfig& cfg,
                                    const MultiscaleConfiguration& q,
                                    const MultiscaleMomentum& p);

}  // namespace mslddmm
