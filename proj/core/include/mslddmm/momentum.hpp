#pragma once

// Momentum-map diagnostics: passive probes carried by the lifted flow, the
// pointwise transport identity J_i(t)^T p_i(t) = p_i(0), and lift uniqueness
// across momentum-preserving re-representations of the landmark set.

#include <cstddef>
#include <vector>

#include "mslddmm/integrator.hpp"

namespace mslddmm {

/// Zero-momentum points slaved to the scale-`scale` velocity field.
struct ProbeSet {
  std::size_t scale = 0;
  Matrix points;  // dim x count
};

/// positions[k] is the dim x count probe matrix at step k.
struct ProbePaths {
  std::vector<Matrix> positions;
};

/// Integrates dx/dt = u^scale(x) with the stage states of `traj`, so probes
/// and landmarks form one coupled discrete system. `threads` bounds the
/// number of workers evaluating probe velocities.
ProbePaths advect_probes(const ScaleConfig& cfg, const Trajectory& traj,
                         const ProbeSet& probes, unsigned threads = 1);

/// |J_i(1)^T p_i(1) - p_i(0)| for each scale-ell landmark, with J_i(0) = Id.
std::vector<double> momentum_transport_residual(const ScaleConfig& cfg,
                                                const Trajectory& traj,
                                                std::size_t ell);

/// Replace landmark `index` of `scale` by copies at the same position whose
/// momenta are fractions[c] * p. The first copy keeps the original slot,
/// the rest are appended to the scale.
struct LandmarkSplit {
  std::size_t scale = 0;
  Index index = 0;
  std::vector<double> fractions{1.0};
};

/// Applies the splits in order. kContract if some fractions do not sum to 1
/// (within 1e-12), kShape if the result breaks landmark-count nesting.
std::pair<MultiscaleConfiguration, MultiscaleMomentum> split_landmarks(
    const MultiscaleConfiguration& q, const MultiscaleMomentum& p,
    const std::vector<LandmarkSplit>& splits);

/// Shoots both representations (Sim+ block at rest), advects the same
/// probes in both and returns the max probe discrepancy at the final time.
double lift_uniqueness_check(const ScaleConfig& cfg,
                             const MultiscaleConfiguration& q,
                             const MultiscaleMomentum& p,
                             const std::vector<LandmarkSplit>& splits,
                             const ProbeSet& probes, int steps = 100,
                             Scheme scheme = Scheme::kRk4);

/// Regular grid of probes: lower/upper corners and per-axis counts.
ProbeSet make_probe_grid(std::size_t scale, const Vector& lower,
                         const Vector& upper,
                         const std::vector<int>& resolution);

}  // namespace mslddmm
