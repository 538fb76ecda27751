#pragma once

// Problem and configuration files, result bundles and plot tables.
//
// Points file (JSON, scales coarse to fine, one [x, y, ...] per landmark):
//   {"dim": 2, "source": [[[0, 0], ...], ...], "target": [...]}
// Config file (JSON, every key optional except "sigmas"):
//   {"sigmas": [2, 1], "integrator": {"scheme": "rk4", "steps": 50, ...},
//    "optimizer": {...}, "data_weight": 1, "sim_enabled": true,
//    "probe_grid": {"lower": [...], "upper": [...], "resolution": [...],
//                   "scale": 0},
//    "output_dir": "out", "seed": 0, "threads": 1}
//
// Malformed text and wrongly typed fields raise kParse naming the line and
// column or the field path; unknown keys raise kParse as well.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mslddmm/momentum.hpp"
#include "mslddmm/shooting.hpp"

namespace mslddmm {

struct IntegratorConfig {
  Scheme scheme = Scheme::kRk4;
  int steps = 50;
  bool project_rotation = false;
};

struct OptimizerConfig {
  int max_iters = 500;
  double grad_tol = 1e-8;
  double armijo_c = 1e-4;
  double initial_step = 1.0;
  int max_halvings = 40;
  StepPolicy step_policy = StepPolicy::kBarzilaiBorwein;
  bool complete_normal_momentum = true;
  double energy_drift_tol = 1e-6;
  /// Start 0 is zero momenta; the others are N(0, start_spread^2) draws
  /// from the run seed.
  int starts = 1;
  double start_spread = 0.1;
};

struct ProbeGridConfig {
  std::size_t scale = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> resolution;
};

struct RunConfig {
  std::vector<double> sigmas;
  IntegratorConfig integrator;
  OptimizerConfig optimizer;
  double data_weight = 1.0;
  bool sim_enabled = true;
  std::optional<ProbeGridConfig> probe_grid;
  std::string output_dir = "out";
  /// Draws the random optimizer starts; nothing else is random.
  std::uint64_t seed = 0;
  unsigned threads = 1;

  /// kConfig unless sigmas are positive and strictly decreasing, steps >= 1,
  /// data_weight > 0, optimizer constants are admissible, threads >= 1 and
  /// probe bounds are ordered with positive resolutions.
  void validate() const;
  OptimizerOptions optimizer_options() const;
  ShootingSetup setup() const { return {integrator.steps, integrator.scheme}; }
};

struct PointSet {
  int dim = 2;
  MultiscaleConfiguration source;
  MultiscaleConfiguration target;
};

RunConfig parse_config(std::string_view text);
PointSet parse_points(std::string_view text);

/// Reads a whole file; kConfig if it cannot be opened.
std::string read_file(const std::filesystem::path& path);
/// Writes a whole file, creating parent directories; kConfig on failure.
void write_file(const std::filesystem::path& path, std::string_view content);

/// Problem for the given points under the config's kernels, weight and Sim+
/// switch. kShape if the sigma count differs from the number of scales or
/// the source and target disagree.
RegistrationProblem make_problem(const PointSet& points, const RunConfig& config);

struct LoadedProblem {
  PointSet points;
  RegistrationProblem problem;
  RunConfig config;
};

/// Initial momenta for each configured optimizer start.
std::vector<InitialMomenta> initial_guesses(const RegistrationProblem& prob,
                                            const RunConfig& config);

LoadedProblem load_problem(const std::filesystem::path& points_file,
                           const std::filesystem::path& config_file);

/// Canonical text forms; parse(serialize(x)) == x and doubles use the
/// shortest representation that reads back to the same bits.
std::string serialize_config(const RunConfig& config);
std::string serialize_points(const PointSet& points);

/// {"p": [[[...], ...], ...]} with the scale layout of `shape`.
std::string serialize_landmark_momenta(const MultiscaleMomentum& p);
MultiscaleMomentum parse_landmark_momenta(std::string_view text,
                                          const MultiscaleConfiguration& shape);
/// {"p_rho": x, "p_R": [[row], ...], "p_tau": [...]}
std::string serialize_sim_momentum(const SimMomentum& pa);
SimMomentum parse_sim_momentum(std::string_view text, int dim);

/// "xmin:xmax:nx,ymin:ymax:ny[@scale]", one range per dimension.
ProbeGridConfig parse_grid_spec(std::string_view spec);
ProbeSet make_probe_set(const ProbeGridConfig& grid, int dim,
                        std::size_t num_scales);

// Flat tables, comma separated with a header row; doubles printed with 17
// significant digits.

/// step, t, scale, index, q_0.., p_0..
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// step, t, rho, R_ij (row-major), tau_.., p_rho, p_R_ij, p_tau_.., energy
void write_sim_trajectory_csv(std::ostream& out, const ScaleConfig& cfg,
                              const Trajectory& traj);
/// step, t, scale, index, y_0..: the target carried by the Sim+ path.
void write_target_trajectory_csv(std::ostream& out, const RegistrationProblem& prob,
                                 const Trajectory& traj);
/// iteration, objective, kinetic, data, grad_norm, step, halvings
void write_history_csv(std::ostream& out, const std::vector<IterationRecord>& history);
/// step, t, probe, x_0..
void write_probes_csv(std::ostream& out, const Trajectory& traj,
                      const ProbePaths& paths);

/// Drift of the conserved quantities along one trajectory.
struct TrajectoryDiagnostics {
  double energy_drift = 0.0;
  double relative_energy_drift = 0.0;
  double rho_p_rho_drift = 0.0;
  double Rt_pR_drift = 0.0;
  double p_tau_drift = 0.0;
  double orthogonality_defect = 0.0;
  /// max over scales and landmarks of |J(1)^T p(1) - p(0)|
  double momentum_transport = 0.0;
};

TrajectoryDiagnostics diagnose(const ScaleConfig& cfg, const Trajectory& traj);

/// report.json for `match`.
std::string match_report(const RegistrationProblem& prob, const RunConfig& config,
                         const MatchResult& result);
/// Same, plus the status and final objective of every start.
std::string match_report(const RegistrationProblem& prob, const RunConfig& config,
                         const MultiStartResult& result);
/// report.json for `shoot` and `probe`.
std::string shoot_report(const RegistrationProblem& prob, const RunConfig& config,
                         const Trajectory& traj);

}  // namespace mslddmm
