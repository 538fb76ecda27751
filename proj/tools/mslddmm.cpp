// mslddmm: multiscale landmark registration with a similarity-group target.
//
//   mslddmm match <points> <config> -o <dir>
//   mslddmm shoot <points> <config> --p0 <file> [--pa0 <file>] -o <dir>
//   mslddmm probe <points> <config> --p0 <file> --grid <spec> -o <dir>
//   mslddmm check [--filter <suite>] [--seed <n>]
//
// Exit codes: 0 ok, 1 invariant failure, 2 shape error, 3 config error,
// 4 optimizer stopped without converging, 5 divergence.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mslddmm/checks.hpp"
#include "mslddmm/error.hpp"
#include "mslddmm/fault.hpp"
#include "mslddmm/io.hpp"
#include "mslddmm/momentum.hpp"
#include "mslddmm/shooting.hpp"

namespace fs = std::filesystem;
using namespace mslddmm;

namespace {

constexpr int kExitInvariant = 1;
constexpr int kExitConfig = 3;
constexpr int kExitNotConverged = 4;

/// Command-line values that override the config file, one per config key.
struct Overrides {
  std::optional<std::vector<double>> sigmas;
  std::optional<std::string> scheme;
  std::optional<int> steps;
  std::optional<bool> project_rotation;
  std::optional<int> max_iters;
  std::optional<double> grad_tol;
  std::optional<double> armijo_c;
  std::optional<double> initial_step;
  std::optional<int> max_halvings;
  std::optional<std::string> step_policy;
  std::optional<bool> complete_normal_momentum;
  std::optional<double> energy_drift_tol;
  std::optional<int> starts;
  std::optional<double> start_spread;
  std::optional<double> data_weight;
  std::optional<bool> sim_enabled;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> grid;

  void apply(RunConfig& c) const {
    if (sigmas) c.sigmas = *sigmas;
    if (scheme) c.integrator.scheme = parse_scheme(*scheme);
    if (steps) c.integrator.steps = *steps;
    if (project_rotation) c.integrator.project_rotation = *project_rotation;
    if (max_iters) c.optimizer.max_iters = *max_iters;
    if (grad_tol) c.optimizer.grad_tol = *grad_tol;
    if (armijo_c) c.optimizer.armijo_c = *armijo_c;
    if (initial_step) c.optimizer.initial_step = *initial_step;
    if (max_halvings) c.optimizer.max_halvings = *max_halvings;
    if (step_policy) c.optimizer.step_policy = parse_step_policy(*step_policy);
    if (complete_normal_momentum) c.optimizer.complete_normal_momentum = *complete_normal_momentum;
    if (energy_drift_tol) c.optimizer.energy_drift_tol = *energy_drift_tol;
    if (starts) c.optimizer.starts = *starts;
    if (start_spread) c.optimizer.start_spread = *start_spread;
    if (data_weight) c.data_weight = *data_weight;
    if (sim_enabled) c.sim_enabled = *sim_enabled;
    if (output_dir) c.output_dir = *output_dir;
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    if (grid) c.probe_grid = parse_grid_spec(*grid);
    c.validate();
  }
};

struct Inputs {
  std::string points;
  std::string config;
  std::string p0;
  std::string pa0;
};

void add_problem_options(CLI::App* cmd, Inputs& in, Overrides& o) {
  cmd->add_option("points", in.points, "Landmark file (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("config", in.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--output_dir", o.output_dir, "Directory for the result bundle");
  cmd->add_option("--sigmas", o.sigmas, "Kernel widths, coarse to fine")->delimiter(',');
  cmd->add_option("--integrator.scheme", o.scheme, "euler or rk4");
  cmd->add_option("--integrator.steps", o.steps, "Time steps on [0, 1]");
  cmd->add_option("--integrator.project_rotation", o.project_rotation,
                  "Project R onto SO(d) after every step");
  cmd->add_option("--optimizer.max_iters", o.max_iters);
  cmd->add_option("--optimizer.grad_tol", o.grad_tol);
  cmd->add_option("--optimizer.armijo_c", o.armijo_c);
  cmd->add_option("--optimizer.initial_step", o.initial_step);
  cmd->add_option("--optimizer.max_halvings", o.max_halvings);
  cmd->add_option("--optimizer.step_policy", o.step_policy, "fixed, grow or bb");
  cmd->add_option("--optimizer.complete_normal_momentum", o.complete_normal_momentum);
  cmd->add_option("--optimizer.energy_drift_tol", o.energy_drift_tol,
                  "Stop with exit 1 once an accepted trajectory drifts further in energy");
  cmd->add_option("--optimizer.starts", o.starts, "Optimizer runs; all but the first start at random momenta");
  cmd->add_option("--optimizer.start_spread", o.start_spread, "Spread of the random starting momenta");
  cmd->add_option("--data_weight", o.data_weight, "Weight of the endpoint term");
  cmd->add_option("--sim_enabled", o.sim_enabled, "Let the similarity group act on the target");
  cmd->add_option("--seed", o.seed);
  cmd->add_option("--threads", o.threads, "Worker bound for probe advection and optimizer starts");
}

LoadedProblem load(const Inputs& in, const Overrides& o) {
  LoadedProblem loaded{parse_points(read_file(in.points)), {}, parse_config(read_file(in.config))};
  o.apply(loaded.config);
  loaded.problem = make_problem(loaded.points, loaded.config);
  return loaded;
}

InitialMomenta load_momenta(const Inputs& in, const RegistrationProblem& prob) {
  InitialMomenta m = InitialMomenta::zero(prob);
  m.p = parse_landmark_momenta(read_file(in.p0), prob.source);
  if (!in.pa0.empty()) m.pa = parse_sim_momentum(read_file(in.pa0), prob.cfg.dim);
  return m;
}

template <class Writer>
void write_table(const fs::path& path, Writer&& writer) {
  std::ostringstream out;
  writer(out);
  write_file(path, out.str());
}

void write_trajectory_tables(const fs::path& dir, const RegistrationProblem& prob,
                             const Trajectory& traj) {
  write_table(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, traj); });
  write_table(dir / "sim_trajectory.csv",
              [&](std::ostream& o) { write_sim_trajectory_csv(o, prob.cfg, traj); });
  write_table(dir / "target_trajectory.csv",
              [&](std::ostream& o) { write_target_trajectory_csv(o, prob, traj); });
}

void write_probes(const fs::path& dir, const LoadedProblem& lp, const Trajectory& traj) {
  const ProbeSet probes = make_probe_set(*lp.config.probe_grid, lp.problem.cfg.dim,
                                         lp.problem.cfg.num_scales());
  const ProbePaths paths = advect_probes(lp.problem.cfg, traj, probes, lp.config.threads);
  write_table(dir / "probes.csv", [&](std::ostream& o) { write_probes_csv(o, traj, paths); });
}

int run_match(const Inputs& in, const Overrides& o) {
  const LoadedProblem lp = load(in, o);
  const fs::path dir = lp.config.output_dir;
  const MultiStartResult runs = optimize_multistart(
      lp.problem, lp.config.optimizer_options(), initial_guesses(lp.problem, lp.config),
      lp.config.threads);
  const MatchResult& result = runs.best;

  write_file(dir / "config.json", serialize_config(lp.config));
  write_file(dir / "p0.json", serialize_landmark_momenta(result.momenta.p));
  write_file(dir / "pa0.json", serialize_sim_momentum(result.momenta.pa));
  write_table(dir / "history.csv", [&](std::ostream& os) { write_history_csv(os, result.history); });
  write_trajectory_tables(dir, lp.problem, result.trajectory);
  if (lp.config.probe_grid) write_probes(dir, lp, result.trajectory);
  write_file(dir / "report.json", match_report(lp.problem, lp.config, runs));

  std::printf("%s after %d iterations: data %.6g -> %.6g, |grad| %.3g\n",
              std::string(to_string(result.status)).c_str(),
              result.history.back().iteration, result.initial_data, result.final_data,
              result.final_grad_norm);
  if (result.status == MatchStatus::kEnergyDrift) return kExitInvariant;
  return result.status == MatchStatus::kConverged ? 0 : kExitNotConverged;
}

Trajectory shoot_from(const Inputs& in, const LoadedProblem& lp) {
  const InitialMomenta m0 = load_momenta(in, lp.problem);
  return shoot(lp.problem.cfg, initial_state(lp.problem, m0), lp.config.integrator.steps,
               lp.config.integrator.scheme,
               ShootOptions{1.0, lp.config.integrator.project_rotation});
}

int run_shoot(const Inputs& in, const Overrides& o) {
  const LoadedProblem lp = load(in, o);
  const fs::path dir = lp.config.output_dir;
  const Trajectory traj = shoot_from(in, lp);
  write_file(dir / "config.json", serialize_config(lp.config));
  write_trajectory_tables(dir, lp.problem, traj);
  if (lp.config.probe_grid) write_probes(dir, lp, traj);
  write_file(dir / "report.json", shoot_report(lp.problem, lp.config, traj));
  return 0;
}

int run_probe(const Inputs& in, const Overrides& o) {
  const LoadedProblem lp = load(in, o);
  if (!lp.config.probe_grid) {
    throw Error(ErrorCode::kConfig, "probe needs --grid or a probe_grid entry in the config");
  }
  const fs::path dir = lp.config.output_dir;
  const Trajectory traj = shoot_from(in, lp);
  write_file(dir / "config.json", serialize_config(lp.config));
  write_table(dir / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, traj); });
  write_probes(dir, lp, traj);
  write_file(dir / "report.json", shoot_report(lp.problem, lp.config, traj));
  return 0;
}

int run_check(const CheckOptions& opts, const std::string& fault_name) {
  Fault fault = Fault::kNone;
  if (!parse_fault(fault_name, fault)) {
    throw Error(ErrorCode::kConfig, "unknown fault '" + fault_name + "'");
  }
  const ScopedFault scoped(fault);
  const std::vector<CheckResult> results = run_checks(opts);
  int failed = 0;
  for (const CheckResult& r : results) {
    std::puts(format_check(r).c_str());
    if (!r.passed) ++failed;
  }
  std::printf("%zu checks, %d failed (seed %llu)\n", results.size(), failed,
              static_cast<unsigned long long>(opts.seed));
  return failed == 0 ? 0 : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale diffeomorphic landmark registration"};
  app.require_subcommand(1);

  Inputs in;
  Overrides o;
  CLI::App* match = app.add_subcommand("match", "Optimize initial momenta and write the result bundle");
  add_problem_options(match, in, o);
  CLI::App* shoot_cmd = app.add_subcommand("shoot", "Integrate the geodesic from given momenta");
  add_problem_options(shoot_cmd, in, o);
  shoot_cmd->add_option("--p0", in.p0, "Landmark momenta (JSON)")->required()->check(CLI::ExistingFile);
  shoot_cmd->add_option("--pa0", in.pa0, "Similarity momenta (JSON)")->check(CLI::ExistingFile);
  CLI::App* probe = app.add_subcommand("probe", "Advect a probe grid along the geodesic");
  add_problem_options(probe, in, o);
  probe->add_option("--p0", in.p0, "Landmark momenta (JSON)")->required()->check(CLI::ExistingFile);
  probe->add_option("--pa0", in.pa0, "Similarity momenta (JSON)")->check(CLI::ExistingFile);
  probe->add_option("--grid", o.grid, "lo:hi:n per axis, comma separated, optional @scale");

  CheckOptions check_opts;
  std::string fault = "none";
  std::string filter;
  CLI::App* check = app.add_subcommand("check", "Run the invariant suites");
  check->add_option("--filter", filter, "Run one suite only");
  check->add_option("--seed", check_opts.seed, "Instance seed");
  check->add_option("--threads", check_opts.threads, "Worker bound for probe advection");
  check->add_option("--inject-fault", fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*match) return run_match(in, o);
    if (*shoot_cmd) return run_shoot(in, o);
    if (*probe) return run_probe(in, o);
    if (!filter.empty()) check_opts.filter = filter;
    return run_check(check_opts, fault);
  } catch (const Error& e) {
    std::fprintf(stderr, "mslddmm: %s: %s\n", std::string(to_string(e.code())).c_str(),
                 e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mslddmm: %s\n", e.what());
    return kExitConfig;
  }
}
