#pragma once

// Multiscale Gaussian RKHS machinery.
//
// Scale k (0-based here, coarse to fine) owns the scalar Gaussian kernel
//   K^k(x, y) = exp(-|x - y|^2 / (2 sigma_k^2)) * Id
// with sigma_0 > sigma_1 > ... > sigma_{L-1}. A band field mu_k is a finite
// sum of vector-weighted Diracs; K^k mu_k is the velocity component v^k and
// the scale-l velocity is u^l = sum_{k <= l} K^k mu_k.

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace mslddmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct ScaleConfig {
  int dim = 2;
  std::vector<double> sigmas;

  /// Validating factory. Throws Error(kConfig) unless dim >= 1, at least one
  /// scale, every width positive and the widths strictly decreasing.
  static ScaleConfig make(int dim, std::vector<double> sigmas);

  void validate() const;
  std::size_t num_scales() const noexcept { return sigmas.size(); }
  double sigma(std::size_t k) const;
};

/// Weighted Dirac sum: column j of `locations` carries weight column j of
/// `weights`. Both are dim x size.
struct BandField {
  Matrix locations;
  Matrix weights;

  static BandField empty(int dim) { return {Matrix(dim, 0), Matrix(dim, 0)}; }
  Index size() const noexcept { return locations.cols(); }
  int dim() const noexcept { return static_cast<int>(locations.rows()); }
};

/// One band per scale. Band k is smoothed by K^k.
struct ControlField {
  std::vector<BandField> bands;
};

inline double gaussian(double squared_distance, double sigma) noexcept {
  return std::exp(-squared_distance / (2.0 * sigma * sigma));
}

Vector kernel_eval(const ScaleConfig& cfg, std::size_t k, const BandField& mu,
                   const Eigen::Ref<const Vector>& x);

/// Spatial Jacobian d/dx of kernel_eval, a dim x dim matrix.
Matrix kernel_jacobian(const ScaleConfig& cfg, std::size_t k,
                       const BandField& mu, const Eigen::Ref<const Vector>& x);

/// u^ell(x) = sum_{k <= ell} K^k bands[k] evaluated at x.
Vector velocity_at(const ScaleConfig& cfg, const ControlField& field,
                   std::size_t ell, const Eigen::Ref<const Vector>& x);

/// Jacobian of velocity_at with respect to x.
Matrix velocity_jacobian(const ScaleConfig& cfg, const ControlField& field,
                         std::size_t ell, const Eigen::Ref<const Vector>& x);

/// sum_k <mu_k, K^k mu_k>, i.e. |A u|^2 for u generated by the bands.
double rkhs_energy(const ScaleConfig& cfg, const ControlField& field);

}  // namespace mslddmm
