#pragma once

// Central finite differences and the mismatch measure used to compare them
// against analytic derivatives.

#include <algorithm>
#include <cmath>

#include "mslddmm/error.hpp"
#include "mslddmm/kernels.hpp"

namespace mslddmm {

/// Gradient of a scalar function by central differences with per-coordinate
/// step rel_step * max(1, |x_i|).
template <class F>
Vector central_gradient(F&& f, const Vector& x, double rel_step = 1e-5) {
  Vector grad(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// Jacobian (rows: outputs) of a vector function by central differences.
template <class F>
Matrix central_jacobian(F&& f, const Vector& x, double rel_step = 1e-5) {
  Vector probe = x;
  Matrix jac;
  for (Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + h;
    const Vector up = f(probe);
    probe[i] = x[i] - h;
    const Vector down = f(probe);
    probe[i] = x[i];
    if (i == 0) jac.resize(up.size(), x.size());
    jac.col(i) = (up - down) / (2.0 * h);
  }
  return jac;
}

/// max_i |a_i - b_i| / max(|b_i|, floor * |b|_inf), with b the reference.
/// Coordinates far below the reference scale are compared relative to that
/// scale rather than to themselves. Zero when both vanish identically.
inline double relative_mismatch(const Eigen::Ref<const Vector>& a,
                                const Eigen::Ref<const Vector>& b,
                                double floor = 1e-3) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kShape, "compared vectors differ in length");
  }
  const double scale = b.size() > 0 ? b.lpNorm<Eigen::Infinity>() : 0.0;
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double diff = std::abs(a[i] - b[i]);
    if (diff == 0.0) continue;
    const double ref = std::max(std::abs(b[i]), floor * scale);
    worst = std::max(worst, ref > 0.0 ? diff / ref : INFINITY);
  }
  return worst;
}

}  // namespace mslddmm
