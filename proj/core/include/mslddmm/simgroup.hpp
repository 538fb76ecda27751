#pragma once

// Orientation-preserving similarity group Sim+(R^d) = R+* x SO(d) x R^d.
//
// Group elements and their momenta are held in extended matrix coordinates:
// R and p_R are unconstrained d x d matrices, so the Hamiltonian flow is
// integrated exactly as written and orthogonality of R is only monitored.

#include <utility>
#include <vector>

#include "mslddmm/kernels.hpp"
#include "mslddmm/state.hpp"

namespace mslddmm {

/// a = (rho, R, tau). Also used for tangent vectors da in the same
/// coordinates.
struct SimElement {
  double rho = 1.0;
  Matrix R;
  Vector tau;

  static SimElement identity(int dim);
  static SimElement zero_tangent(int dim);
  /// Validating constructor: rho > 0, |R^T R - I|_F <= 1e-8, det R > 0.
  static SimElement checked(double rho, Matrix R, Vector tau);

  int dim() const noexcept { return static_cast<int>(tau.size()); }
  bool all_finite() const noexcept {
    return std::isfinite(rho) && R.allFinite() && tau.allFinite();
  }
  void axpy(double s, const SimElement& rhs) {
    rho += s * rhs.rho;
    R += s * rhs.R;
    tau += s * rhs.tau;
  }
};

/// p_a = (p_rho, p_R, p_tau).
struct SimMomentum {
  double p_rho = 0.0;
  Matrix p_R;
  Vector p_tau;

  static SimMomentum zero(int dim);

  int dim() const noexcept { return static_cast<int>(p_tau.size()); }
  bool all_finite() const noexcept {
    return std::isfinite(p_rho) && p_R.allFinite() && p_tau.allFinite();
  }
  void axpy(double s, const SimMomentum& rhs) {
    p_rho += s * rhs.p_rho;
    p_R += s * rhs.p_R;
    p_tau += s * rhs.p_tau;
  }
  double squared_norm() const noexcept {
    return p_rho * p_rho + p_R.squaredNorm() + p_tau.squaredNorm();
  }
};

/// s = (alpha, r, sigma) with r skew-symmetric.
struct SimAlgebra {
  double alpha = 0.0;
  Matrix r;
  Vector sigma;
};

inline constexpr double kOrthogonalityTolerance = 1e-8;

SimElement sim_compose(const SimElement& a, const SimElement& b);
SimElement sim_inverse(const SimElement& a);

/// rho R (x - center) + center + tau
Vector sim_act_point(const SimElement& a, const Eigen::Ref<const Vector>& x,
                     const Eigen::Ref<const Vector>& center);

/// Centered action on every scale; `centers` holds one point per scale.
MultiscaleConfiguration sim_act(const SimElement& a,
                                const MultiscaleConfiguration& q,
                                const std::vector<Vector>& centers);

double sim_metric(const SimAlgebra& s1, const SimAlgebra& s2);

/// (p_rho | alpha rho) + (p_R | r R) + (p_tau | sigma) - |s|^2 / 2
double sim_hamiltonian(const SimElement& a, const SimMomentum& pa,
                       const SimAlgebra& s);

/// Maximizer of sim_hamiltonian over s:
///   alpha = rho p_rho, r = (p_R R^T - R p_R^T) / 2, sigma = p_tau.
SimAlgebra sim_optimal_control(const SimElement& a, const SimMomentum& pa);

/// sim_hamiltonian evaluated at the optimal control, = |s*|^2 / 2.
double sim_reduced_hamiltonian(const SimElement& a, const SimMomentum& pa);

struct SimRhs {
  SimElement da;
  SimMomentum dpa;
};

SimRhs sim_rhs(const SimElement& a, const SimMomentum& pa);

/// Vector-Jacobian product of sim_rhs: returns (lambda^T d rhs/da,
/// lambda^T d rhs/dpa) for the cotangent lambda = (ca, cpa).
std::pair<SimElement, SimMomentum> sim_rhs_vjp(const SimElement& a,
                                               const SimMomentum& pa,
                                               const SimElement& ca,
                                               const SimMomentum& cpa);

/// Matrix exponential exp(t r) of a skew matrix: planar rotation for d = 2,
/// Rodrigues for d = 3, scaling-and-squaring Taylor otherwise.
/// Throws kContract if r is not skew within 1e-12 (relative to |r|).
Matrix so_exponential(const Matrix& r, double t = 1.0);

/// Exact flow of sim_rhs from the neutral element.
std::pair<SimElement, SimMomentum> sim_closed_form(const SimMomentum& pa0,
                                                   double t);

/// Quantities conserved along sim_rhs: rho p_rho, R^T p_R and p_tau.
struct SimInvariants {
  double rho_p_rho = 0.0;
  Matrix Rt_pR;
  Vector p_tau;
};
SimInvariants sim_invariants(const SimElement& a, const SimMomentum& pa);

/// |R^T R - I|_F
double orthogonality_defect(const Matrix& R);

/// Nearest rotation in Frobenius norm (polar factor via SVD).
Matrix project_rotation(const Matrix& R);

}  // namespace mslddmm
