#include "mslddmm/momentum.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mslddmm/error.hpp"

namespace mslddmm {

namespace {

void evaluate_velocities(const ScaleConfig& cfg, const ControlField& field,
                         std::size_t scale, const Matrix& points, Matrix& out,
                         Index begin, Index end) {
  for (Index j = begin; j < end; ++j) {
    out.col(j) = velocity_at(cfg, field, scale, points.col(j));
  }
}

}  // namespace

ProbePaths advect_probes(const ScaleConfig& cfg, const Trajectory& traj,
                         const ProbeSet& probes, unsigned threads) {
  if (probes.scale >= cfg.num_scales()) {
    throw Error(ErrorCode::kIndex, "probe scale out of range");
  }
  if (probes.points.rows() != cfg.dim) {
    throw Error(ErrorCode::kShape, "probe points have the wrong dimension");
  }
  const Index count = probes.points.cols();
  const unsigned workers =
      count > 1 ? static_cast<unsigned>(std::min<Index>(std::max(threads, 1u), count))
                : 1u;

  ProbePaths paths;
  paths.positions.reserve(traj.samples.size());
  paths.positions.push_back(probes.points);
  const double h = traj.dt();
  Matrix z = probes.points;
  for (int step = 0; step < traj.steps; ++step) {
    const StepStages st =
        compute_stages(cfg, traj.samples[static_cast<std::size_t>(step)], h,
                       traj.scheme);
    z = advance_aux(
        traj.scheme, h, st.inputs, z,
        [&](const PhasePoint& y, const Matrix& zs) {
          const ControlField field = bands_from(y.q, y.p);
          Matrix v(cfg.dim, count);
          if (workers == 1) {
            evaluate_velocities(cfg, field, probes.scale, zs, v, 0, count);
            return v;
          }
          // Disjoint column ranges; each column is computed identically
          // regardless of the partition.
          std::vector<std::jthread> pool;
          const Index chunk = (count + workers - 1) / workers;
          for (unsigned w = 0; w < workers; ++w) {
            const Index begin = std::min<Index>(count, w * chunk);
            const Index end = std::min<Index>(count, begin + chunk);
            pool.emplace_back([&, begin, end] {
              evaluate_velocities(cfg, field, probes.scale, zs, v, begin, end);
            });
          }
          pool.clear();
          return v;
        });
    if (!z.allFinite()) {
      throw DivergenceError(static_cast<std::size_t>(step) + 1,
                            "probe advection produced a non-finite state");
    }
    paths.positions.push_back(z);
  }
  return paths;
}

std::vector<double> momentum_transport_residual(const ScaleConfig& cfg,
                                                const Trajectory& traj,
                                                std::size_t ell) {
  const Index n = traj.initial().q.count(ell);
  const std::vector<Matrix> identity(static_cast<std::size_t>(n),
                                     Matrix::Identity(cfg.dim, cfg.dim));
  const auto jac = variational_transport(cfg, traj, ell, identity);
  const PhasePoint& first = traj.initial();
  const PhasePoint& last = traj.final();
  std::vector<double> residual;
  residual.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Vector transported =
        jac.back()[static_cast<std::size_t>(i)].transpose() * last.p.point(ell, i);
    residual.push_back((transported - first.p.point(ell, i)).norm());
  }
  return residual;
}

std::pair<MultiscaleConfiguration, MultiscaleMomentum> split_landmarks(
    const MultiscaleConfiguration& q, const MultiscaleMomentum& p,
    const std::vector<LandmarkSplit>& splits) {
  if (!q.same_shape(p)) {
    throw Error(ErrorCode::kShape, "configuration and momentum shapes differ");
  }
  MultiscaleConfiguration q_out = q;
  MultiscaleMomentum p_out = p;
  for (const LandmarkSplit& split : splits) {
    if (split.fractions.empty()) {
      throw Error(ErrorCode::kContract, "a split needs at least one fraction");
    }
    double total = 0.0;
    for (double f : split.fractions) total += f;
    if (std::abs(total - 1.0) > 1e-12) {
      throw Error(ErrorCode::kContract, "split fractions must sum to 1");
    }
    Matrix& qs = q_out.scale(split.scale);
    Matrix& ps = p_out.scale(split.scale);
    if (split.index < 0 || split.index >= qs.cols()) {
      throw Error(ErrorCode::kIndex, "split landmark index out of range");
    }
    const Vector position = qs.col(split.index);
    const Vector momentum = ps.col(split.index);
    const Index extra = static_cast<Index>(split.fractions.size()) - 1;
    const Index old = qs.cols();
    qs.conservativeResize(Eigen::NoChange, old + extra);
    ps.conservativeResize(Eigen::NoChange, old + extra);
    ps.col(split.index) = split.fractions[0] * momentum;
    for (Index c = 0; c < extra; ++c) {
      qs.col(old + c) = position;
      ps.col(old + c) = split.fractions[static_cast<std::size_t>(c) + 1] * momentum;
    }
  }
  require_nested(q_out);
  return {std::move(q_out), std::move(p_out)};
}

double lift_uniqueness_check(const ScaleConfig& cfg,
                             const MultiscaleConfiguration& q,
                             const MultiscaleMomentum& p,
                             const std::vector<LandmarkSplit>& splits,
                             const ProbeSet& probes, int steps, Scheme scheme) {
  const auto [q_split, p_split] = split_landmarks(q, p, splits);
  const SimMomentum rest = SimMomentum::zero(cfg.dim);
  const Trajectory original =
      shoot(cfg, PhasePoint::with_momenta(q, p, rest), steps, scheme);
  const Trajectory split =
      shoot(cfg, PhasePoint::with_momenta(q_split, p_split, rest), steps, scheme);
  const Matrix end_a = advect_probes(cfg, original, probes).positions.back();
  const Matrix end_b = advect_probes(cfg, split, probes).positions.back();
  return (end_a - end_b).cwiseAbs().maxCoeff();
}

ProbeSet make_probe_grid(std::size_t scale, const Vector& lower,
                         const Vector& upper,
                         const std::vector<int>& resolution) {
  const Index d = lower.size();
  if (upper.size() != d || static_cast<Index>(resolution.size()) != d) {
    throw Error(ErrorCode::kShape, "probe grid bounds and resolution disagree");
  }
  Index total = 1;
  for (Index a = 0; a < d; ++a) {
    if (resolution[a] < 1) {
      throw Error(ErrorCode::kConfig, "probe grid resolution must be >= 1");
    }
    if (!(lower(a) <= upper(a))) {
      throw Error(ErrorCode::kConfig, "probe grid bounds are not ordered");
    }
    total *= resolution[a];
  }
  ProbeSet set{scale, Matrix(d, total)};
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  for (Index c = 0; c < total; ++c) {
    for (Index a = 0; a < d; ++a) {
      const int n = resolution[a];
      const double frac = n == 1 ? 0.0 : static_cast<double>(idx[a]) / (n - 1);
      set.points(a, c) = lower(a) + frac * (upper(a) - lower(a));
    }
    for (Index a = 0; a < d; ++a) {
      if (++idx[a] < resolution[a]) break;
      idx[a] = 0;
    }
  }
  return set;
}

}  // namespace mslddmm
