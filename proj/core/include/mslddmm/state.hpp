#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mslddmm/error.hpp"
#include "mslddmm/kernels.hpp"

namespace mslddmm {

struct PositionTag {};
struct CovectorTag {};

/// Per-scale stack of dim x n_ell point matrices (one column per landmark).
/// Tagged so that positions and momenta cannot be mixed up by accident.
template <class Tag>
class ScaleStack {
 public:
  ScaleStack() = default;
  explicit ScaleStack(std::vector<Matrix> scales) : scales_(std::move(scales)) {
    for (const Matrix& m : scales_) {
      if (!scales_.empty() && m.rows() != scales_.front().rows()) {
        throw Error(ErrorCode::kShape, "all scales must share one dimension");
      }
    }
  }

  /// Zero stack with the same shape as `other` (any tag).
  template <class OtherTag>
  static ScaleStack zeros_like(const ScaleStack<OtherTag>& other) {
    std::vector<Matrix> scales;
    scales.reserve(other.num_scales());
    for (std::size_t l = 0; l < other.num_scales(); ++l) {
      scales.push_back(Matrix::Zero(other.dim(), other.count(l)));
    }
    return ScaleStack(std::move(scales));
  }

  std::size_t num_scales() const noexcept { return scales_.size(); }
  int dim() const noexcept {
    return scales_.empty() ? 0 : static_cast<int>(scales_.front().rows());
  }
  Index count(std::size_t ell) const { return scale(ell).cols(); }
  Index total_count() const noexcept {
    Index n = 0;
    for (const Matrix& m : scales_) n += m.cols();
    return n;
  }

  const Matrix& scale(std::size_t ell) const {
    check_scale(ell);
    return scales_[ell];
  }
  Matrix& scale(std::size_t ell) {
    check_scale(ell);
    return scales_[ell];
  }
  const std::vector<Matrix>& scales() const noexcept { return scales_; }

  auto point(std::size_t ell, Index i) const { return scale(ell).col(i); }
  auto point(std::size_t ell, Index i) { return scale(ell).col(i); }

  template <class OtherTag>
  bool same_shape(const ScaleStack<OtherTag>& other) const noexcept {
    if (num_scales() != other.num_scales()) return false;
    for (std::size_t l = 0; l < num_scales(); ++l) {
      if (scales_[l].rows() != other.scales()[l].rows() ||
          scales_[l].cols() != other.scales()[l].cols()) {
        return false;
      }
    }
    return true;
  }

  ScaleStack& operator+=(const ScaleStack& rhs) {
    require_same_shape(rhs);
    for (std::size_t l = 0; l < scales_.size(); ++l) scales_[l] += rhs.scales_[l];
    return *this;
  }
  ScaleStack& operator-=(const ScaleStack& rhs) {
    require_same_shape(rhs);
    for (std::size_t l = 0; l < scales_.size(); ++l) scales_[l] -= rhs.scales_[l];
    return *this;
  }
  ScaleStack& operator*=(double s) {
    for (Matrix& m : scales_) m *= s;
    return *this;
  }
  /// this += s * rhs
  void axpy(double s, const ScaleStack& rhs) {
    require_same_shape(rhs);
    for (std::size_t l = 0; l < scales_.size(); ++l) scales_[l] += s * rhs.scales_[l];
  }

  double squared_norm() const noexcept {
    double s = 0.0;
    for (const Matrix& m : scales_) s += m.squaredNorm();
    return s;
  }
  double dot(const ScaleStack& rhs) const {
    require_same_shape(rhs);
    double s = 0.0;
    for (std::size_t l = 0; l < scales_.size(); ++l) {
      s += scales_[l].cwiseProduct(rhs.scales_[l]).sum();
    }
    return s;
  }
  bool all_finite() const noexcept {
    for (const Matrix& m : scales_) {
      if (!m.allFinite()) return false;
    }
    return true;
  }

  friend bool operator==(const ScaleStack& a, const ScaleStack& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t l = 0; l < a.scales_.size(); ++l) {
      if (a.scales_[l] != b.scales_[l]) return false;
    }
    return true;
  }

 private:
  void check_scale(std::size_t ell) const {
    if (ell >= scales_.size()) {
      throw Error(ErrorCode::kIndex, "scale index " + std::to_string(ell) +
                                         " out of range");
    }
  }
  void require_same_shape(const ScaleStack& rhs) const {
    if (!same_shape(rhs)) {
      throw Error(ErrorCode::kShape, "scale stacks have different shapes");
    }
  }

  std::vector<Matrix> scales_;
};

template <class Tag>
ScaleStack<Tag> operator+(ScaleStack<Tag> a, const ScaleStack<Tag>& b) {
  a += b;
  return a;
}
template <class Tag>
ScaleStack<Tag> operator-(ScaleStack<Tag> a, const ScaleStack<Tag>& b) {
  a -= b;
  return a;
}
template <class Tag>
ScaleStack<Tag> operator*(double s, ScaleStack<Tag> a) {
  a *= s;
  return a;
}

using MultiscaleConfiguration = ScaleStack<PositionTag>;
using MultiscaleMomentum = ScaleStack<CovectorTag>;

/// Throws kShape unless n_ell <= n_{ell+1} for every scale.
void require_nested(const MultiscaleConfiguration& q);

/// Band k collects (q_i^m, p_i^m) for every m >= k. Atoms are ordered by
/// scale, then by landmark index.
ControlField bands_from(const MultiscaleConfiguration& q,
                        const MultiscaleMomentum& p);

/// Arithmetic mean of the scale-ell points; kDegenerate on an empty scale.
Vector center_of_mass(const MultiscaleConfiguration& q, std::size_t ell);
std::vector<Vector> centers_of_mass(const MultiscaleConfiguration& q);

struct RegistrationProblem {
  MultiscaleConfiguration source;
  MultiscaleConfiguration target;
  ScaleConfig cfg;
  double data_weight = 1.0;
  bool sim_enabled = false;
  /// Per-scale centers of the target, fixed once at construction.
  std::vector<Vector> target_centers;

  /// Validates shapes (kShape), nesting (kShape), the kernel configuration
  /// (kConfig) and data_weight > 0 (kConfig), then computes target centers.
  static RegistrationProblem make(MultiscaleConfiguration source,
                                  MultiscaleConfiguration target,
                                  ScaleConfig cfg, double data_weight = 1.0,
                                  bool sim_enabled = false);
};

}  // namespace mslddmm
