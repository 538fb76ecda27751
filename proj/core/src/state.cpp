#include "mslddmm/state.hpp"

#include <cmath>

namespace mslddmm {

void require_nested(const MultiscaleConfiguration& q) {
  for (std::size_t l = 0; l + 1 < q.num_scales(); ++l) {
    if (q.count(l) > q.count(l + 1)) {
      throw Error(ErrorCode::kShape,
                  "landmark counts must be non-decreasing from coarse to fine; "
                  "scale " + std::to_string(l) + " has " +
                      std::to_string(q.count(l)) + " points, scale " +
                      std::to_string(l + 1) + " has " +
                      std::to_string(q.count(l + 1)));
    }
  }
}

ControlField bands_from(const MultiscaleConfiguration& q,
                        const MultiscaleMomentum& p) {
  if (!q.same_shape(p)) {
    throw Error(ErrorCode::kShape, "configuration and momentum shapes differ");
  }
  const std::size_t num_scales = q.num_scales();
  const int d = q.dim();
  ControlField field;
  field.bands.resize(num_scales);

  // Atoms of band k are the atoms of band k+1 preceded by scale k's own.
  for (std::size_t k = 0; k < num_scales; ++k) {
    Index atoms = 0;
    for (std::size_t m = k; m < num_scales; ++m) atoms += q.count(m);
    BandField& band = field.bands[k];
    band.locations.resize(d, atoms);
    band.weights.resize(d, atoms);
    Index col = 0;
    for (std::size_t m = k; m < num_scales; ++m) {
      const Index n = q.count(m);
      band.locations.middleCols(col, n) = q.scale(m);
      band.weights.middleCols(col, n) = p.scale(m);
      col += n;
    }
  }
  return field;
}

Vector center_of_mass(const MultiscaleConfiguration& q, std::size_t ell) {
  const Matrix& pts = q.scale(ell);
  if (pts.cols() == 0) {
    throw Error(ErrorCode::kDegenerate,
                "center of mass of empty scale " + std::to_string(ell));
  }
  return pts.rowwise().sum() / static_cast<double>(pts.cols());
}

std::vector<Vector> centers_of_mass(const MultiscaleConfiguration& q) {
  std::vector<Vector> centers;
  centers.reserve(q.num_scales());
  for (std::size_t l = 0; l < q.num_scales(); ++l) {
    centers.push_back(center_of_mass(q, l));
  }
  return centers;
}

RegistrationProblem RegistrationProblem::make(MultiscaleConfiguration source,
                                              MultiscaleConfiguration target,
                                              ScaleConfig cfg,
                                              double data_weight,
                                              bool sim_enabled) {
  if (source.num_scales() != target.num_scales()) {
    throw Error(ErrorCode::kShape,
                "source has " + std::to_string(source.num_scales()) +
                    " scales, target has " +
                    std::to_string(target.num_scales()));
  }
  if (!source.same_shape(target)) {
    throw Error(ErrorCode::kShape,
                "source and target landmark counts or dimensions differ");
  }
  if (source.num_scales() != cfg.num_scales()) {
    throw Error(ErrorCode::kShape,
                "problem has " + std::to_string(source.num_scales()) +
                    " scales but " + std::to_string(cfg.num_scales()) +
                    " kernel widths were configured");
  }
  if (source.dim() != cfg.dim) {
    throw Error(ErrorCode::kShape, "landmark dimension does not match config");
  }
  cfg.validate();
  require_nested(source);
  if (!(data_weight > 0.0) || !std::isfinite(data_weight)) {
    throw Error(ErrorCode::kConfig, "data_weight must be a positive number");
  }
  RegistrationProblem prob;
  prob.target_centers = centers_of_mass(target);
  prob.source = std::move(source);
  prob.target = std::move(target);
  prob.cfg = std::move(cfg);
  prob.data_weight = data_weight;
  prob.sim_enabled = sim_enabled;
  return prob;
}

}  // namespace mslddmm
