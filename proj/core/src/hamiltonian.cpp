#include "mslddmm/hamiltonian.hpp"

#include <vector>

#include "mslddmm/error.hpp"
#include "mslddmm/fault.hpp"

namespace mslddmm {

namespace {

// Landmarks of all scales laid side by side.
struct FlatLandmarks {
  Matrix q;
  Matrix p;
  std::vector<int> scale;
};

FlatLandmarks flatten_landmarks(const MultiscaleConfiguration& q,
                                const MultiscaleMomentum& p) {
  if (!q.same_shape(p)) {
    throw Error(ErrorCode::kShape, "configuration and momentum shapes differ");
  }
  FlatLandmarks flat;
  const Index n = q.total_count();
  flat.q.resize(q.dim(), n);
  flat.p.resize(q.dim(), n);
  flat.scale.reserve(static_cast<std::size_t>(n));
  Index col = 0;
  for (std::size_t l = 0; l < q.num_scales(); ++l) {
    const Index nl = q.count(l);
    flat.q.middleCols(col, nl) = q.scale(l);
    flat.p.middleCols(col, nl) = p.scale(l);
    for (Index i = 0; i < nl; ++i) flat.scale.push_back(static_cast<int>(l));
    col += nl;
  }
  return flat;
}

template <class Tag>
void scatter(const Matrix& flat, ScaleStack<Tag>& out) {
  Index col = 0;
  for (std::size_t l = 0; l < out.num_scales(); ++l) {
    const Index nl = out.count(l);
    out.scale(l) = flat.middleCols(col, nl);
    col += nl;
  }
}

// Summed kernel sum_{k <= top} G_k(r2) and its first two derivatives with
// respect to r2.
struct PairKernel {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

PairKernel pair_kernel(const ScaleConfig& cfg, int top, double r2) {
  PairKernel out;
  for (int k = 0; k <= top; ++k) {
    const double inv = 1.0 / (2.0 * cfg.sigmas[k] * cfg.sigmas[k]);
    const double g = std::exp(-r2 * inv);
    out.value += g;
    out.d1 -= g * inv;
    out.d2 += g * inv * inv;
  }
  return out;
}

void require_cfg(const ScaleConfig& cfg, const MultiscaleConfiguration& q) {
  if (q.num_scales() != cfg.num_scales() || q.dim() != cfg.dim) {
    throw Error(ErrorCode::kShape, "state does not match the scale config");
  }
}

}  // namespace

PhasePoint PhasePoint::at_rest(const MultiscaleConfiguration& q) {
  return {q, MultiscaleMomentum::zeros_like(q), SimElement::identity(q.dim()),
          SimMomentum::zero(q.dim())};
}

PhasePoint PhasePoint::with_momenta(const MultiscaleConfiguration& q,
                                    const MultiscaleMomentum& p,
                                    const SimMomentum& pa) {
  if (!q.same_shape(p)) {
    throw Error(ErrorCode::kShape, "configuration and momentum shapes differ");
  }
  if (pa.dim() != q.dim()) {
    throw Error(ErrorCode::kShape, "similarity momentum has wrong dimension");
  }
  return {q, p, SimElement::identity(q.dim()), pa};
}

PhasePoint PhasePoint::zeros_like(const PhasePoint& shape) {
  const int d = shape.dim();
  return {MultiscaleConfiguration::zeros_like(shape.q),
          MultiscaleMomentum::zeros_like(shape.p), SimElement::zero_tangent(d),
          SimMomentum::zero(d)};
}

bool PhasePoint::all_finite() const noexcept {
  return q.all_finite() && p.all_finite() && a.all_finite() &&
         pa.all_finite();
}

void PhasePoint::axpy(double s, const PhasePoint& rhs) {
  q.axpy(s, rhs.q);
  p.axpy(s, rhs.p);
  a.axpy(s, rhs.a);
  pa.axpy(s, rhs.pa);
}

double PhasePoint::dot(const PhasePoint& rhs) const {
  return q.dot(rhs.q) + p.dot(rhs.p) + a.rho * rhs.a.rho +
         a.R.cwiseProduct(rhs.a.R).sum() + a.tau.dot(rhs.a.tau) +
         pa.p_rho * rhs.pa.p_rho + pa.p_R.cwiseProduct(rhs.pa.p_R).sum() +
         pa.p_tau.dot(rhs.pa.p_tau);
}

PhasePoint operator+(PhasePoint x, const PhasePoint& y) {
  x.axpy(1.0, y);
  return x;
}

PhasePoint operator*(double s, PhasePoint x) {
  x.q *= s;
  x.p *= s;
  x.a.rho *= s;
  x.a.R *= s;
  x.a.tau *= s;
  x.pa.p_rho *= s;
  x.pa.p_R *= s;
  x.pa.p_tau *= s;
  return x;
}

Vector flatten(const PhasePoint& x) {
  const Index d = x.dim();
  const Index n = x.q.total_count() * d;
  const Index sim = 1 + d * d + d;
  Vector flat(2 * n + 2 * sim);
  Index pos = 0;
  auto put_stack = [&](const auto& stack) {
    for (const Matrix& m : stack.scales()) {
      flat.segment(pos, m.size()) = m.reshaped();
      pos += m.size();
    }
  };
  put_stack(x.q);
  put_stack(x.p);
  flat(pos++) = x.a.rho;
  flat.segment(pos, d * d) = x.a.R.reshaped();
  pos += d * d;
  flat.segment(pos, d) = x.a.tau;
  pos += d;
  flat(pos++) = x.pa.p_rho;
  flat.segment(pos, d * d) = x.pa.p_R.reshaped();
  pos += d * d;
  flat.segment(pos, d) = x.pa.p_tau;
  return flat;
}

PhasePoint unflatten(const Eigen::Ref<const Vector>& flat,
                     const PhasePoint& shape) {
  PhasePoint x = shape;
  const Index d = shape.dim();
  if (flat.size() != flatten(shape).size()) {
    throw Error(ErrorCode::kShape, "flat vector has the wrong length");
  }
  Index pos = 0;
  auto get_stack = [&](auto& stack) {
    for (std::size_t l = 0; l < stack.num_scales(); ++l) {
      Matrix& m = stack.scale(l);
      m.reshaped() = flat.segment(pos, m.size());
      pos += m.size();
    }
  };
  get_stack(x.q);
  get_stack(x.p);
  x.a.rho = flat(pos++);
  x.a.R.reshaped() = flat.segment(pos, d * d);
  pos += d * d;
  x.a.tau = flat.segment(pos, d);
  pos += d;
  x.pa.p_rho = flat(pos++);
  x.pa.p_R.reshaped() = flat.segment(pos, d * d);
  pos += d * d;
  x.pa.p_tau = flat.segment(pos, d);
  return x;
}

double h_landmarks(const ScaleConfig& cfg, const MultiscaleConfiguration& q,
                   const MultiscaleMomentum& p, const ControlField& bands) {
  if (!q.same_shape(p)) {
    throw Error(ErrorCode::kShape, "configuration and momentum shapes differ");
  }
  require_cfg(cfg, q);
  double pairing = 0.0;
  for (std::size_t l = 0; l < q.num_scales(); ++l) {
    for (Index i = 0; i < q.count(l); ++i) {
      pairing += p.point(l, i).dot(velocity_at(cfg, bands, l, q.point(l, i)));
    }
  }
  return pairing - 0.5 * rkhs_energy(cfg, bands);
}

double landmark_energy(const ScaleConfig& cfg, const MultiscaleConfiguration& q,
                       const MultiscaleMomentum& p) {
  require_cfg(cfg, q);
  return 0.5 * rkhs_energy(cfg, bands_from(q, p));
}

double reduced_hamiltonian(const ScaleConfig& cfg, const PhasePoint& x) {
  return landmark_energy(cfg, x.q, x.p) + sim_reduced_hamiltonian(x.a, x.pa);
}

PhasePoint phase_rhs(const ScaleConfig& cfg, const PhasePoint& x) {
  require_cfg(cfg, x.q);
  const FlatLandmarks lm = flatten_landmarks(x.q, x.p);
  const Index n = lm.q.cols();
  const int d = cfg.dim;
  Matrix dq = Matrix::Zero(d, n);
  Matrix dp = Matrix::Zero(d, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const int top = std::min(lm.scale[i], lm.scale[j]);
      if (i == j) {
        dq.col(i) += pair_kernel(cfg, top, 0.0).value * lm.p.col(j);
        continue;
      }
      const auto delta = lm.q.col(i) - lm.q.col(j);
      const PairKernel k = pair_kernel(cfg, top, delta.squaredNorm());
      dq.col(i) += k.value * lm.p.col(j);
      const double pp = lm.p.col(i).dot(lm.p.col(j));
      dp.col(i) -= (2.0 * k.d1 * pp) * delta;
    }
  }
  if (active_fault() == Fault::kFlipLandmarkMomentum) dp *= -1.0;

  PhasePoint out = PhasePoint::zeros_like(x);
  scatter(dq, out.q);
  scatter(dp, out.p);
  SimRhs sim = sim_rhs(x.a, x.pa);
  out.a = std::move(sim.da);
  out.pa = std::move(sim.dpa);
  return out;
}

PhasePoint phase_rhs_vjp(const ScaleConfig& cfg, const PhasePoint& x,
                         const PhasePoint& lambda) {
  require_cfg(cfg, x.q);
  const FlatLandmarks lm = flatten_landmarks(x.q, x.p);
  const FlatLandmarks cot = flatten_landmarks(lambda.q, lambda.p);
  const Index n = lm.q.cols();
  const int d = cfg.dim;
  const Matrix& a = cot.q;  // cotangent of dq
  const Matrix& b = cot.p;  // cotangent of dp

  // S = sum_ij [ K_ij <a_i, p_j> - 2 K'_ij <p_i, p_j> <b_i, delta_ij> ]
  Matrix gq = Matrix::Zero(d, n);
  Matrix gp = Matrix::Zero(d, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const int top = std::min(lm.scale[i], lm.scale[j]);
      if (i == j) {
        gp.col(i) += pair_kernel(cfg, top, 0.0).value * a.col(i);
        continue;
      }
      const Vector delta = lm.q.col(i) - lm.q.col(j);
      const PairKernel k = pair_kernel(cfg, top, delta.squaredNorm());
      const double ap = a.col(i).dot(lm.p.col(j));
      const double pp = lm.p.col(i).dot(lm.p.col(j));
      const double bd = b.col(i).dot(delta);

      gp.col(j) += k.value * a.col(i);
      gp.col(i) -= (2.0 * k.d1 * bd) * lm.p.col(j);
      gp.col(j) -= (2.0 * k.d1 * bd) * lm.p.col(i);

      // Gradient of the pair term with respect to delta_ij.
      const Vector g = (2.0 * k.d1 * ap - 4.0 * pp * k.d2 * bd) * delta -
                       (2.0 * pp * k.d1) * b.col(i);
      gq.col(i) += g;
      gq.col(j) -= g;
    }
  }
  PhasePoint out = PhasePoint::zeros_like(x);
  scatter(gq, out.q);
  scatter(gp, out.p);
  auto [ga, gpa] = sim_rhs_vjp(x.a, x.pa, lambda.a, lambda.pa);
  out.a = std::move(ga);
  out.pa = std::move(gpa);
  return out;
}

double finest_scale_reduction_check(const ScaleConfig& cfg,
                                    const MultiscaleConfiguration& q,
                                    const MultiscaleMomentum& p) {
  require_cfg(cfg, q);
  if (!q.same_shape(p)) {
    throw Error(ErrorCode::kShape, "configuration and momentum shapes differ");
  }
  const std::size_t finest = q.num_scales() - 1;
  for (std::size_t l = 0; l < finest; ++l) {
    if (p.scale(l).squaredNorm() != 0.0) {
      throw Error(ErrorCode::kContract,
                  "reduction check needs zero momenta below the finest scale");
    }
  }
  const ControlField bands = bands_from(q, p);
  const BandField finest_only{q.scale(finest), p.scale(finest)};
  double worst = 0.0;
  for (std::size_t l = 0; l < q.num_scales(); ++l) {
    for (Index i = 0; i < q.count(l); ++i) {
      const Vector x = q.point(l, i);
      const Vector banded = velocity_at(cfg, bands, finest, x);
      Vector direct = Vector::Zero(cfg.dim);
      for (std::size_t k = 0; k <= finest; ++k) {
        direct += kernel_eval(cfg, k, finest_only, x);
      }
      worst = std::max(worst, (banded - direct).lpNorm<Eigen::Infinity>());
    }
  }
  return worst;
}

}  // namespace mslddmm
