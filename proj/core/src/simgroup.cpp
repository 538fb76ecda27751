#include "mslddmm/simgroup.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "mslddmm/error.hpp"
#include "mslddmm/fault.hpp"

namespace mslddmm {

namespace {

void require_same_dim(int a, int b) {
  if (a != b) {
    throw Error(ErrorCode::kShape, "similarity elements of different dimension");
  }
}

Matrix skew_part(const Matrix& m) {
  Matrix s = m - m.transpose();
  s *= 0.5;
  return s;
}

}  // namespace

SimElement SimElement::identity(int dim) {
  return {1.0, Matrix::Identity(dim, dim), Vector::Zero(dim)};
}

SimElement SimElement::zero_tangent(int dim) {
  return {0.0, Matrix::Zero(dim, dim), Vector::Zero(dim)};
}

SimElement SimElement::checked(double rho, Matrix R, Vector tau) {
  const Index d = tau.size();
  if (R.rows() != d || R.cols() != d) {
    throw Error(ErrorCode::kShape, "rotation block must be d x d");
  }
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw Error(ErrorCode::kContract, "similarity scale rho must be > 0");
  }
  if (orthogonality_defect(R) > kOrthogonalityTolerance) {
    throw Error(ErrorCode::kContract, "rotation block is not orthogonal");
  }
  if (!(R.determinant() > 0.0)) {
    throw Error(ErrorCode::kContract, "rotation block must have det > 0");
  }
  return {rho, std::move(R), std::move(tau)};
}

SimMomentum SimMomentum::zero(int dim) {
  return {0.0, Matrix::Zero(dim, dim), Vector::Zero(dim)};
}

SimElement sim_compose(const SimElement& a, const SimElement& b) {
  require_same_dim(a.dim(), b.dim());
  return {a.rho * b.rho, a.R * b.R, a.tau + b.tau};
}

SimElement sim_inverse(const SimElement& a) {
  return {1.0 / a.rho, a.R.transpose(), -a.tau};
}

Vector sim_act_point(const SimElement& a, const Eigen::Ref<const Vector>& x,
                     const Eigen::Ref<const Vector>& center) {
  return a.rho * (a.R * (x - center)) + center + a.tau;
}

MultiscaleConfiguration sim_act(const SimElement& a,
                                const MultiscaleConfiguration& q,
                                const std::vector<Vector>& centers) {
  if (centers.size() != q.num_scales()) {
    throw Error(ErrorCode::kShape, "need one center per scale");
  }
  require_same_dim(a.dim(), q.dim());
  MultiscaleConfiguration out = q;
  for (std::size_t l = 0; l < q.num_scales(); ++l) {
    Matrix& pts = out.scale(l);
    const Vector shift = centers[l] + a.tau;
    for (Index i = 0; i < pts.cols(); ++i) {
      pts.col(i) = a.rho * (a.R * (q.point(l, i) - centers[l])) + shift;
    }
  }
  return out;
}

double sim_metric(const SimAlgebra& s1, const SimAlgebra& s2) {
  require_same_dim(static_cast<int>(s1.sigma.size()),
                   static_cast<int>(s2.sigma.size()));
  return s1.alpha * s2.alpha + (s1.r.transpose() * s2.r).trace() +
         s1.sigma.dot(s2.sigma);
}

double sim_hamiltonian(const SimElement& a, const SimMomentum& pa,
                       const SimAlgebra& s) {
  const double pairing = pa.p_rho * s.alpha * a.rho +
                         pa.p_R.cwiseProduct(s.r * a.R).sum() +
                         pa.p_tau.dot(s.sigma);
  return pairing - 0.5 * sim_metric(s, s);
}

SimAlgebra sim_optimal_control(const SimElement& a, const SimMomentum& pa) {
  require_same_dim(a.dim(), pa.dim());
  return {a.rho * pa.p_rho, skew_part(pa.p_R * a.R.transpose()), pa.p_tau};
}

double sim_reduced_hamiltonian(const SimElement& a, const SimMomentum& pa) {
  const SimAlgebra s = sim_optimal_control(a, pa);
  return 0.5 * sim_metric(s, s);
}

SimRhs sim_rhs(const SimElement& a, const SimMomentum& pa) {
  const SimAlgebra s = sim_optimal_control(a, pa);
  SimRhs out;
  out.da.rho = s.alpha * a.rho;
  out.da.R = s.r * a.R;
  out.da.tau = s.sigma;
  out.dpa.p_rho = -s.alpha * pa.p_rho;
  out.dpa.p_R = -s.r.transpose() * pa.p_R;
  out.dpa.p_tau = Vector::Zero(pa.dim());
  switch (active_fault()) {
    case Fault::kFlipRotationMomentum: out.dpa.p_R *= -1.0; break;
    case Fault::kFlipScaleMomentum: out.dpa.p_rho *= -1.0; break;
    default: break;
  }
  return out;
}

std::pair<SimElement, SimMomentum> sim_rhs_vjp(const SimElement& a,
                                               const SimMomentum& pa,
                                               const SimElement& ca,
                                               const SimMomentum& cpa) {
  // rhs = (rho^2 p_rho, r R, p_tau, -rho p_rho^2, -r^T p_R, 0),
  // r = skew(p_R R^T).
  const double rho = a.rho;
  const double prho = pa.p_rho;
  const Matrix r = skew_part(pa.p_R * a.R.transpose());
  // Sensitivity of the pairing with respect to r, projected to skew matrices.
  // -r^T p_R is paired with C_pR: <C_pR, -r^T p_R> = <-p_R C_pR^T, r>.
  const Matrix W = ca.R * a.R.transpose() - pa.p_R * cpa.p_R.transpose();
  const Matrix omega = skew_part(W);

  SimElement ga = SimElement::zero_tangent(a.dim());
  SimMomentum gpa = SimMomentum::zero(a.dim());
  ga.rho = 2.0 * ca.rho * rho * prho - cpa.p_rho * prho * prho;
  gpa.p_rho = ca.rho * rho * rho - 2.0 * cpa.p_rho * rho * prho;
  // Through r = skew(p_R R^T): d<omega, p_R R^T> = <omega R, dp_R> +
  // <omega^T p_R, dR>.
  ga.R = r.transpose() * ca.R + omega.transpose() * pa.p_R;
  gpa.p_R = -r * cpa.p_R + omega * a.R;
  gpa.p_tau = ca.tau;
  return {std::move(ga), std::move(gpa)};
}

Matrix so_exponential(const Matrix& r, double t) {
  const Index d = r.rows();
  if (r.cols() != d) {
    throw Error(ErrorCode::kShape, "so_exponential needs a square matrix");
  }
  const double asym = (r + r.transpose()).norm();
  if (asym > 1e-12 * std::max(1.0, r.norm())) {
    throw Error(ErrorCode::kContract,
                "so_exponential input is not skew-symmetric");
  }
  if (d == 1) {
    return Matrix::Identity(1, 1);
  }
  if (d == 2) {
    const double theta = t * r(1, 0);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Matrix out(2, 2);
    out << c, -s, s, c;
    return out;
  }
  if (d == 3) {
    const Eigen::Vector3d w(r(2, 1), r(0, 2), r(1, 0));
    const double theta = t * w.norm();
    Matrix K = t * r;
    Matrix out = Matrix::Identity(3, 3);
    if (theta < 1e-8) {
      // Taylor of sin(x)/x and (1-cos x)/x^2 beyond double precision here.
      out += K + 0.5 * K * K;
      return out;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    out += a * K + b * (K * K);
    return out;
  }
  // Scaling and squaring with a truncated Taylor series.
  Matrix A = t * r;
  const double norm = A.lpNorm<Eigen::Infinity>();
  int squarings = 0;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    A /= std::ldexp(1.0, squarings);
  }
  Matrix out = Matrix::Identity(d, d);
  Matrix term = Matrix::Identity(d, d);
  for (int k = 1; k <= 30; ++k) {
    term = term * A / static_cast<double>(k);
    out += term;
    if (term.lpNorm<Eigen::Infinity>() < 1e-18) break;
  }
  for (int i = 0; i < squarings; ++i) out = out * out;
  return out;
}

std::pair<SimElement, SimMomentum> sim_closed_form(const SimMomentum& pa0,
                                                   double t) {
  const int d = pa0.dim();
  const SimAlgebra s = sim_optimal_control(SimElement::identity(d), pa0);
  const Matrix rot = so_exponential(s.r, t);
  SimElement a{std::exp(s.alpha * t), rot, s.sigma * t};
  SimMomentum pa{pa0.p_rho * std::exp(-s.alpha * t), rot * pa0.p_R, pa0.p_tau};
  return {std::move(a), std::move(pa)};
}

SimInvariants sim_invariants(const SimElement& a, const SimMomentum& pa) {
  return {a.rho * pa.p_rho, a.R.transpose() * pa.p_R, pa.p_tau};
}

double orthogonality_defect(const Matrix& R) {
  return (R.transpose() * R - Matrix::Identity(R.rows(), R.cols())).norm();
}

Matrix project_rotation(const Matrix& R) {
  Eigen::JacobiSVD<Matrix> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix U = svd.matrixU();
  const Matrix& V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) {
    U.col(U.cols() - 1) *= -1.0;
  }
  return U * V.transpose();
}

}  // namespace mslddmm
