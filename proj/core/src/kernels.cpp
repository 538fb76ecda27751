#include "mslddmm/kernels.hpp"

#include <cmath>
#include <string>

#include "mslddmm/error.hpp"

namespace mslddmm {

namespace {

void require_scale(const ScaleConfig& cfg, std::size_t k) {
  if (k >= cfg.num_scales()) {
    throw Error(ErrorCode::kIndex, "scale index " + std::to_string(k) +
                                       " out of range [0, " +
                                       std::to_string(cfg.num_scales()) + ")");
  }
}

void require_point(const ScaleConfig& cfg, const BandField& mu, Index rows) {
  if (rows != cfg.dim || (mu.size() > 0 && mu.dim() != cfg.dim) ||
      mu.weights.cols() != mu.locations.cols()) {
    throw Error(ErrorCode::kShape, "band field or point has wrong dimension");
  }
}

}  // namespace

ScaleConfig ScaleConfig::make(int dim, std::vector<double> sigmas) {
  ScaleConfig cfg{dim, std::move(sigmas)};
  cfg.validate();
  return cfg;
}

void ScaleConfig::validate() const {
  if (dim < 1) {
    throw Error(ErrorCode::kConfig, "spatial dimension must be >= 1");
  }
  if (sigmas.empty()) {
    throw Error(ErrorCode::kConfig, "at least one kernel scale is required");
  }
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    if (!(sigmas[k] > 0.0) || !std::isfinite(sigmas[k])) {
      throw Error(ErrorCode::kConfig,
                  "kernel width sigma[" + std::to_string(k) + "] must be > 0");
    }
    if (k > 0 && !(sigmas[k] < sigmas[k - 1])) {
      throw Error(ErrorCode::kConfig,
                  "kernel widths must be strictly decreasing (coarse to fine); "
                  "sigma[" + std::to_string(k) + "] >= sigma[" +
                      std::to_string(k - 1) + "]");
    }
  }
}

double ScaleConfig::sigma(std::size_t k) const {
  require_scale(*this, k);
  return sigmas[k];
}

Vector kernel_eval(const ScaleConfig& cfg, std::size_t k, const BandField& mu,
                   const Eigen::Ref<const Vector>& x) {
  require_scale(cfg, k);
  require_point(cfg, mu, x.rows());
  const double sigma = cfg.sigmas[k];
  Vector out = Vector::Zero(cfg.dim);
  for (Index j = 0; j < mu.size(); ++j) {
    const double w = gaussian((x - mu.locations.col(j)).squaredNorm(), sigma);
    out.noalias() += w * mu.weights.col(j);
  }
  return out;
}

Matrix kernel_jacobian(const ScaleConfig& cfg, std::size_t k,
                       const BandField& mu, const Eigen::Ref<const Vector>& x) {
  require_scale(cfg, k);
  require_point(cfg, mu, x.rows());
  const double sigma = cfg.sigmas[k];
  const double inv_s2 = 1.0 / (sigma * sigma);
  Matrix out = Matrix::Zero(cfg.dim, cfg.dim);
  for (Index j = 0; j < mu.size(); ++j) {
    const auto delta = x - mu.locations.col(j);
    const double g = gaussian(delta.squaredNorm(), sigma);
    out.noalias() -= (g * inv_s2) * mu.weights.col(j) * delta.transpose();
  }
  return out;
}

Vector velocity_at(const ScaleConfig& cfg, const ControlField& field,
                   std::size_t ell, const Eigen::Ref<const Vector>& x) {
  require_scale(cfg, ell);
  if (field.bands.size() != cfg.num_scales()) {
    throw Error(ErrorCode::kShape, "control field has wrong number of bands");
  }
  Vector out = Vector::Zero(cfg.dim);
  for (std::size_t k = 0; k <= ell; ++k) {
    out += kernel_eval(cfg, k, field.bands[k], x);
  }
  return out;
}

Matrix velocity_jacobian(const ScaleConfig& cfg, const ControlField& field,
                         std::size_t ell, const Eigen::Ref<const Vector>& x) {
  require_scale(cfg, ell);
  if (field.bands.size() != cfg.num_scales()) {
    throw Error(ErrorCode::kShape, "control field has wrong number of bands");
  }
  Matrix out = Matrix::Zero(cfg.dim, cfg.dim);
  for (std::size_t k = 0; k <= ell; ++k) {
    out += kernel_jacobian(cfg, k, field.bands[k], x);
  }
  return out;
}

double rkhs_energy(const ScaleConfig& cfg, const ControlField& field) {
  if (field.bands.size() != cfg.num_scales()) {
    throw Error(ErrorCode::kShape, "control field has wrong number of bands");
  }
  double energy = 0.0;
  for (std::size_t k = 0; k < field.bands.size(); ++k) {
    const BandField& mu = field.bands[k];
    const double sigma = cfg.sigmas[k];
    for (Index a = 0; a < mu.size(); ++a) {
      energy += mu.weights.col(a).squaredNorm();
      for (Index b = a + 1; b < mu.size(); ++b) {
        const double g = gaussian(
            (mu.locations.col(a) - mu.locations.col(b)).squaredNorm(), sigma);
        energy += 2.0 * g * mu.weights.col(a).dot(mu.weights.col(b));
      }
    }
  }
  return energy;
}

}  // namespace mslddmm
