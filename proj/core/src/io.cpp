#include "mslddmm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "mslddmm/checks.hpp"
#include "mslddmm/error.hpp"

namespace mslddmm {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void parse_fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kParse, where + ": " + what);
}

Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorCode::kParse, std::string(what) + ":" + std::to_string(line) + ":" +
                                       std::to_string(col) + ": malformed JSON");
  }
}

void require_object(const Json& j, const std::string& path,
                    std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) parse_fail(path, "expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (std::string_view key : allowed) known = known || item.key() == key;
    if (!known) parse_fail(path + "." + item.key(), "unknown key");
  }
}

double read_double(const Json& j, const std::string& path) {
  if (!j.is_number()) parse_fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) parse_fail(path, "expected a finite number");
  return v;
}

long long read_integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) parse_fail(path, "expected an integer");
  return j.get<long long>();
}

bool read_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) parse_fail(path, "expected true or false");
  return j.get<bool>();
}

std::string read_string(const Json& j, const std::string& path) {
  if (!j.is_string()) parse_fail(path, "expected a string");
  return j.get<std::string>();
}

const Json& read_array(const Json& j, const std::string& path) {
  if (!j.is_array()) parse_fail(path, "expected an array");
  return j;
}

std::vector<double> read_doubles(const Json& j, const std::string& path) {
  std::vector<double> out;
  for (std::size_t i = 0; i < read_array(j, path).size(); ++i) {
    out.push_back(read_double(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

/// dim x n matrix from [[x, y, ...], ...].
Matrix read_points(const Json& j, int dim, const std::string& path) {
  read_array(j, path);
  Matrix m(dim, static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = path + "[" + std::to_string(i) + "]";
    const std::vector<double> v = read_doubles(j[i], at);
    if (static_cast<int>(v.size()) != dim) {
      throw Error(ErrorCode::kShape, at + ": expected " + std::to_string(dim) +
                                         " coordinates, got " + std::to_string(v.size()));
    }
    for (int a = 0; a < dim; ++a) m(a, static_cast<Index>(i)) = v[static_cast<std::size_t>(a)];
  }
  return m;
}

std::vector<Matrix> read_scales(const Json& j, int dim, const std::string& path) {
  std::vector<Matrix> scales;
  for (std::size_t l = 0; l < read_array(j, path).size(); ++l) {
    scales.push_back(read_points(j[l], dim, path + "[" + std::to_string(l) + "]"));
  }
  return scales;
}

Json points_json(const Matrix& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.cols(); ++i) {
    Json p = Json::array();
    for (Index a = 0; a < m.rows(); ++a) p.push_back(m(a, i));
    out.push_back(std::move(p));
  }
  return out;
}

Json scales_json(const std::vector<Matrix>& scales) {
  Json out = Json::array();
  for (const Matrix& m : scales) out.push_back(points_json(m));
  return out;
}

Json matrix_rows_json(const Matrix& m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void put(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

void put_row(std::ostream& out, const Eigen::Ref<const Vector>& v) {
  for (Index i = 0; i < v.size(); ++i) {
    out << ',';
    put(out, v[i]);
  }
}

void put_header(std::ostream& out, std::string_view prefix, Index count) {
  for (Index i = 0; i < count; ++i) out << ',' << prefix << '_' << i;
}

void put_matrix_header(std::ostream& out, std::string_view prefix, int dim) {
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) out << ',' << prefix << '_' << r << c;
  }
}

void put_matrix_row_major(std::ostream& out, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      out << ',';
      put(out, m(r, c));
    }
  }
}

double sample_time(const Trajectory& traj, std::size_t k) {
  return static_cast<double>(k) * traj.dt();
}

}  // namespace

void RunConfig::validate() const {
  ScaleConfig{1, sigmas}.validate();
  if (integrator.steps < 1) {
    throw Error(ErrorCode::kConfig, "integrator.steps must be >= 1");
  }
  if (!(data_weight > 0.0)) {
    throw Error(ErrorCode::kConfig, "data_weight must be > 0");
  }
  if (optimizer.max_iters < 0) {
    throw Error(ErrorCode::kConfig, "optimizer.max_iters must be >= 0");
  }
  if (!(optimizer.grad_tol >= 0.0)) {
    throw Error(ErrorCode::kConfig, "optimizer.grad_tol must be >= 0");
  }
  if (!(optimizer.armijo_c > 0.0 && optimizer.armijo_c < 1.0)) {
    throw Error(ErrorCode::kConfig, "optimizer.armijo_c must lie in (0, 1)");
  }
  if (!(optimizer.initial_step > 0.0)) {
    throw Error(ErrorCode::kConfig, "optimizer.initial_step must be > 0");
  }
  if (optimizer.max_halvings < 0) {
    throw Error(ErrorCode::kConfig, "optimizer.max_halvings must be >= 0");
  }
  if (!(optimizer.energy_drift_tol > 0.0)) {
    throw Error(ErrorCode::kConfig, "optimizer.energy_drift_tol must be > 0");
  }
  if (optimizer.starts < 1) throw Error(ErrorCode::kConfig, "optimizer.starts must be >= 1");
  if (!(optimizer.start_spread > 0.0)) {
    throw Error(ErrorCode::kConfig, "optimizer.start_spread must be > 0");
  }
  if (threads < 1) throw Error(ErrorCode::kConfig, "threads must be >= 1");
  if (probe_grid) {
    const ProbeGridConfig& g = *probe_grid;
    if (g.lower.size() != g.upper.size() || g.lower.size() != g.resolution.size() ||
        g.lower.empty()) {
      throw Error(ErrorCode::kConfig,
                  "probe_grid lower, upper and resolution must have one entry per axis");
    }
    for (std::size_t a = 0; a < g.lower.size(); ++a) {
      if (!(g.lower[a] <= g.upper[a])) {
        throw Error(ErrorCode::kConfig, "probe_grid bounds are not ordered on axis " +
                                            std::to_string(a));
      }
      if (g.resolution[a] < 1) {
        throw Error(ErrorCode::kConfig, "probe_grid resolution must be >= 1");
      }
    }
  }
}

OptimizerOptions RunConfig::optimizer_options() const {
  OptimizerOptions o;
  o.setup = setup();
  o.max_iters = optimizer.max_iters;
  o.grad_tol = optimizer.grad_tol;
  o.armijo_c = optimizer.armijo_c;
  o.initial_step = optimizer.initial_step;
  o.max_halvings = optimizer.max_halvings;
  o.step_policy = optimizer.step_policy;
  o.complete_normal_momentum = optimizer.complete_normal_momentum;
  o.energy_drift_tol = optimizer.energy_drift_tol;
  return o;
}

RunConfig parse_config(std::string_view text) {
  const Json j = parse_json(text, "config");
  require_object(j, "config",
                 {"sigmas", "integrator", "optimizer", "data_weight", "sim_enabled",
                  "probe_grid", "output_dir", "seed", "threads"});
  RunConfig c;
  if (!j.contains("sigmas")) parse_fail("config.sigmas", "missing");
  c.sigmas = read_doubles(j["sigmas"], "config.sigmas");
  if (j.contains("integrator")) {
    const Json& s = j["integrator"];
    require_object(s, "config.integrator", {"scheme", "steps", "project_rotation"});
    if (s.contains("scheme")) {
      c.integrator.scheme = parse_scheme(read_string(s["scheme"], "config.integrator.scheme"));
    }
    if (s.contains("steps")) {
      c.integrator.steps = static_cast<int>(read_integer(s["steps"], "config.integrator.steps"));
    }
    if (s.contains("project_rotation")) {
      c.integrator.project_rotation =
          read_bool(s["project_rotation"], "config.integrator.project_rotation");
    }
  }
  if (j.contains("optimizer")) {
    const Json& s = j["optimizer"];
    require_object(s, "config.optimizer",
                   {"max_iters", "grad_tol", "armijo_c", "initial_step", "max_halvings",
                    "step_policy", "complete_normal_momentum", "energy_drift_tol", "starts",
                    "start_spread"});
    OptimizerConfig& o = c.optimizer;
    if (s.contains("max_iters")) {
      o.max_iters = static_cast<int>(read_integer(s["max_iters"], "config.optimizer.max_iters"));
    }
    if (s.contains("grad_tol")) o.grad_tol = read_double(s["grad_tol"], "config.optimizer.grad_tol");
    if (s.contains("armijo_c")) o.armijo_c = read_double(s["armijo_c"], "config.optimizer.armijo_c");
    if (s.contains("initial_step")) {
      o.initial_step = read_double(s["initial_step"], "config.optimizer.initial_step");
    }
    if (s.contains("max_halvings")) {
      o.max_halvings =
          static_cast<int>(read_integer(s["max_halvings"], "config.optimizer.max_halvings"));
    }
    if (s.contains("step_policy")) {
      o.step_policy = parse_step_policy(read_string(s["step_policy"], "config.optimizer.step_policy"));
    }
    if (s.contains("complete_normal_momentum")) {
      o.complete_normal_momentum = read_bool(s["complete_normal_momentum"],
                                             "config.optimizer.complete_normal_momentum");
    }
    if (s.contains("energy_drift_tol")) {
      o.energy_drift_tol = read_double(s["energy_drift_tol"], "config.optimizer.energy_drift_tol");
    }
    if (s.contains("starts")) {
      o.starts = static_cast<int>(read_integer(s["starts"], "config.optimizer.starts"));
    }
    if (s.contains("start_spread")) {
      o.start_spread = read_double(s["start_spread"], "config.optimizer.start_spread");
    }
  }
  if (j.contains("data_weight")) c.data_weight = read_double(j["data_weight"], "config.data_weight");
  if (j.contains("sim_enabled")) c.sim_enabled = read_bool(j["sim_enabled"], "config.sim_enabled");
  if (j.contains("probe_grid")) {
    const Json& s = j["probe_grid"];
    require_object(s, "config.probe_grid", {"scale", "lower", "upper", "resolution"});
    ProbeGridConfig g;
    if (s.contains("scale")) {
      const long long scale = read_integer(s["scale"], "config.probe_grid.scale");
      if (scale < 0) parse_fail("config.probe_grid.scale", "expected a non-negative integer");
      g.scale = static_cast<std::size_t>(scale);
    }
    for (const char* key : {"lower", "upper", "resolution"}) {
      if (!s.contains(key)) parse_fail(std::string("config.probe_grid.") + key, "missing");
    }
    g.lower = read_doubles(s["lower"], "config.probe_grid.lower");
    g.upper = read_doubles(s["upper"], "config.probe_grid.upper");
    const Json& res = read_array(s["resolution"], "config.probe_grid.resolution");
    for (std::size_t i = 0; i < res.size(); ++i) {
      g.resolution.push_back(static_cast<int>(
          read_integer(res[i], "config.probe_grid.resolution[" + std::to_string(i) + "]")));
    }
    c.probe_grid = std::move(g);
  }
  if (j.contains("output_dir")) c.output_dir = read_string(j["output_dir"], "config.output_dir");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) parse_fail("config.seed", "expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("threads")) {
    const long long t = read_integer(j["threads"], "config.threads");
    if (t < 0) parse_fail("config.threads", "expected a non-negative integer");
    c.threads = static_cast<unsigned>(t);
  }
  c.validate();
  return c;
}

PointSet parse_points(std::string_view text) {
  const Json j = parse_json(text, "points");
  require_object(j, "points", {"dim", "source", "target"});
  for (const char* key : {"dim", "source", "target"}) {
    if (!j.contains(key)) parse_fail(std::string("points.") + key, "missing");
  }
  const long long dim = read_integer(j["dim"], "points.dim");
  if (dim < 1) throw Error(ErrorCode::kConfig, "points.dim must be >= 1");
  const int d = static_cast<int>(dim);
  PointSet set{d, MultiscaleConfiguration(read_scales(j["source"], d, "points.source")),
               MultiscaleConfiguration(read_scales(j["target"], d, "points.target"))};
  if (set.source.num_scales() == 0) {
    throw Error(ErrorCode::kShape, "points.source must list at least one scale");
  }
  if (!set.source.same_shape(set.target)) {
    throw Error(ErrorCode::kShape,
                "source and target must have the same number of scales and landmarks per scale");
  }
  require_nested(set.source);
  return set;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kConfig, "cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::kConfig, "failed writing '" + path.string() + "'");
}

RegistrationProblem make_problem(const PointSet& points, const RunConfig& config) {
  if (config.sigmas.size() != points.source.num_scales()) {
    throw Error(ErrorCode::kShape,
                "config lists " + std::to_string(config.sigmas.size()) +
                    " kernel widths but the points have " +
                    std::to_string(points.source.num_scales()) + " scales");
  }
  return RegistrationProblem::make(points.source, points.target,
                                   ScaleConfig::make(points.dim, config.sigmas),
                                   config.data_weight, config.sim_enabled);
}

std::vector<InitialMomenta> initial_guesses(const RegistrationProblem& prob,
                                            const RunConfig& config) {
  std::vector<InitialMomenta> starts{InitialMomenta::zero(prob)};
  InstanceGenerator gen(config.seed);
  for (int i = 1; i < config.optimizer.starts; ++i) {
    starts.push_back({gen.momentum(prob.source, config.optimizer.start_spread),
                      gen.sim_momentum(prob.cfg.dim, config.optimizer.start_spread)});
  }
  return starts;
}

LoadedProblem load_problem(const std::filesystem::path& points_file,
                           const std::filesystem::path& config_file) {
  PointSet points = parse_points(read_file(points_file));
  RunConfig config = parse_config(read_file(config_file));
  RegistrationProblem problem = make_problem(points, config);
  return {std::move(points), std::move(problem), std::move(config)};
}

std::string serialize_config(const RunConfig& c) {
  Json j;
  j["sigmas"] = c.sigmas;
  j["integrator"] = {{"scheme", std::string(to_string(c.integrator.scheme))},
                     {"steps", c.integrator.steps},
                     {"project_rotation", c.integrator.project_rotation}};
  j["optimizer"] = {{"max_iters", c.optimizer.max_iters},
                    {"grad_tol", c.optimizer.grad_tol},
                    {"armijo_c", c.optimizer.armijo_c},
                    {"initial_step", c.optimizer.initial_step},
                    {"max_halvings", c.optimizer.max_halvings},
                    {"step_policy", std::string(to_string(c.optimizer.step_policy))},
                    {"complete_normal_momentum", c.optimizer.complete_normal_momentum},
                    {"energy_drift_tol", c.optimizer.energy_drift_tol},
                    {"starts", c.optimizer.starts},
                    {"start_spread", c.optimizer.start_spread}};
  j["data_weight"] = c.data_weight;
  j["sim_enabled"] = c.sim_enabled;
  if (c.probe_grid) {
    j["probe_grid"] = {{"scale", c.probe_grid->scale},
                       {"lower", c.probe_grid->lower},
                       {"upper", c.probe_grid->upper},
                       {"resolution", c.probe_grid->resolution}};
  }
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return dump(j);
}

std::string serialize_points(const PointSet& points) {
  Json j;
  j["dim"] = points.dim;
  j["source"] = scales_json(points.source.scales());
  j["target"] = scales_json(points.target.scales());
  return dump(j);
}

std::string serialize_landmark_momenta(const MultiscaleMomentum& p) {
  Json j;
  j["p"] = scales_json(p.scales());
  return dump(j);
}

MultiscaleMomentum parse_landmark_momenta(std::string_view text,
                                          const MultiscaleConfiguration& shape) {
  const Json j = parse_json(text, "p0");
  require_object(j, "p0", {"p"});
  if (!j.contains("p")) parse_fail("p0.p", "missing");
  MultiscaleMomentum p(read_scales(j["p"], shape.dim(), "p0.p"));
  if (!p.same_shape(shape)) {
    throw Error(ErrorCode::kShape, "p0 does not match the landmark layout of the source");
  }
  return p;
}

std::string serialize_sim_momentum(const SimMomentum& pa) {
  Json j;
  j["p_rho"] = pa.p_rho;
  j["p_R"] = matrix_rows_json(pa.p_R);
  j["p_tau"] = vector_json(pa.p_tau);
  return dump(j);
}

SimMomentum parse_sim_momentum(std::string_view text, int dim) {
  const Json j = parse_json(text, "pa0");
  require_object(j, "pa0", {"p_rho", "p_R", "p_tau"});
  SimMomentum pa = SimMomentum::zero(dim);
  if (j.contains("p_rho")) pa.p_rho = read_double(j["p_rho"], "pa0.p_rho");
  if (j.contains("p_R")) {
    // Rows are read as points and transposed back.
    pa.p_R = read_points(j["p_R"], dim, "pa0.p_R").transpose();
    if (pa.p_R.rows() != dim) {
      throw Error(ErrorCode::kShape, "pa0.p_R must be " + std::to_string(dim) + " x " +
                                         std::to_string(dim));
    }
  }
  if (j.contains("p_tau")) {
    const std::vector<double> v = read_doubles(j["p_tau"], "pa0.p_tau");
    if (static_cast<int>(v.size()) != dim) {
      throw Error(ErrorCode::kShape, "pa0.p_tau must have " + std::to_string(dim) + " entries");
    }
    pa.p_tau = Eigen::Map<const Vector>(v.data(), dim);
  }
  return pa;
}

ProbeGridConfig parse_grid_spec(std::string_view spec) {
  ProbeGridConfig g;
  const auto fail = [&](const std::string& why) -> void {
    throw Error(ErrorCode::kConfig, "grid spec '" + std::string(spec) + "': " + why);
  };
  std::string_view ranges = spec;
  if (const std::size_t at = spec.find('@'); at != std::string_view::npos) {
    ranges = spec.substr(0, at);
    const std::string_view scale = spec.substr(at + 1);
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(scale.data(), scale.data() + scale.size(), value);
    if (ec != std::errc() || ptr != scale.data() + scale.size()) fail("bad scale index");
    g.scale = value;
  }
  if (ranges.empty()) fail("no axes");
  for (bool more = true; more;) {
    const std::size_t comma = ranges.find(',');
    const std::string_view axis = ranges.substr(0, comma);
    more = comma != std::string_view::npos;
    ranges = more ? ranges.substr(comma + 1) : std::string_view{};
    if (axis.empty()) fail("empty axis");
    const std::size_t c1 = axis.find(':');
    const std::size_t c2 = c1 == std::string_view::npos ? c1 : axis.find(':', c1 + 1);
    if (c2 == std::string_view::npos) fail("each axis must read lo:hi:n");
    double lo = 0.0;
    double hi = 0.0;
    int n = 0;
    const auto number = [&](std::string_view s, auto& out) {
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        fail("cannot read '" + std::string(s) + "'");
      }
    };
    number(axis.substr(0, c1), lo);
    number(axis.substr(c1 + 1, c2 - c1 - 1), hi);
    number(axis.substr(c2 + 1), n);
    g.lower.push_back(lo);
    g.upper.push_back(hi);
    g.resolution.push_back(n);
  }
  RunConfig check;
  check.sigmas = {1.0};
  check.probe_grid = g;
  check.validate();
  return g;
}

ProbeSet make_probe_set(const ProbeGridConfig& grid, int dim, std::size_t num_scales) {
  if (static_cast<int>(grid.lower.size()) != dim) {
    throw Error(ErrorCode::kShape, "probe grid has " + std::to_string(grid.lower.size()) +
                                       " axes but the points live in dimension " +
                                       std::to_string(dim));
  }
  if (grid.scale >= num_scales) {
    throw Error(ErrorCode::kConfig, "probe grid scale " + std::to_string(grid.scale) +
                                        " out of range");
  }
  return make_probe_grid(grid.scale, Eigen::Map<const Vector>(grid.lower.data(), dim),
                         Eigen::Map<const Vector>(grid.upper.data(), dim), grid.resolution);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const int d = traj.initial().dim();
  out << "step,t,scale,index";
  put_header(out, "q", d);
  put_header(out, "p", d);
  out << '\n';
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const PhasePoint& x = traj.samples[k];
    for (std::size_t l = 0; l < x.q.num_scales(); ++l) {
      for (Index i = 0; i < x.q.count(l); ++i) {
        out << k << ',';
        put(out, sample_time(traj, k));
        out << ',' << l << ',' << i;
        put_row(out, x.q.point(l, i));
        put_row(out, x.p.point(l, i));
        out << '\n';
      }
    }
  }
}

void write_sim_trajectory_csv(std::ostream& out, const ScaleConfig& cfg,
                              const Trajectory& traj) {
  const int d = traj.initial().dim();
  out << "step,t,rho";
  put_matrix_header(out, "R", d);
  put_header(out, "tau", d);
  out << ",p_rho";
  put_matrix_header(out, "p_R", d);
  put_header(out, "p_tau", d);
  out << ",energy\n";
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const PhasePoint& x = traj.samples[k];
    out << k << ',';
    put(out, sample_time(traj, k));
    out << ',';
    put(out, x.a.rho);
    put_matrix_row_major(out, x.a.R);
    put_row(out, x.a.tau);
    out << ',';
    put(out, x.pa.p_rho);
    put_matrix_row_major(out, x.pa.p_R);
    put_row(out, x.pa.p_tau);
    out << ',';
    put(out, reduced_hamiltonian(cfg, x));
    out << '\n';
  }
}

void write_target_trajectory_csv(std::ostream& out, const RegistrationProblem& prob,
                                 const Trajectory& traj) {
  out << "step,t,scale,index";
  put_header(out, "y", prob.cfg.dim);
  out << '\n';
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const MultiscaleConfiguration y = transformed_target(traj.samples[k].a, prob);
    for (std::size_t l = 0; l < y.num_scales(); ++l) {
      for (Index i = 0; i < y.count(l); ++i) {
        out << k << ',';
        put(out, sample_time(traj, k));
        out << ',' << l << ',' << i;
        put_row(out, y.point(l, i));
        out << '\n';
      }
    }
  }
}

void write_history_csv(std::ostream& out, const std::vector<IterationRecord>& history) {
  out << "iteration,objective,kinetic,data,grad_norm,step,halvings\n";
  for (const IterationRecord& r : history) {
    out << r.iteration;
    for (double v : {r.objective, r.kinetic, r.data, r.grad_norm, r.step}) {
      out << ',';
      put(out, v);
    }
    out << ',' << r.halvings << '\n';
  }
}

void write_probes_csv(std::ostream& out, const Trajectory& traj, const ProbePaths& paths) {
  if (paths.positions.empty()) {
    throw Error(ErrorCode::kContract, "probe paths are empty");
  }
  out << "step,t,probe";
  put_header(out, "x", paths.positions.front().rows());
  out << '\n';
  for (std::size_t k = 0; k < paths.positions.size(); ++k) {
    const Matrix& z = paths.positions[k];
    for (Index j = 0; j < z.cols(); ++j) {
      out << k << ',';
      put(out, sample_time(traj, k));
      out << ',' << j;
      put_row(out, z.col(j));
      out << '\n';
    }
  }
}

TrajectoryDiagnostics diagnose(const ScaleConfig& cfg, const Trajectory& traj) {
  TrajectoryDiagnostics d;
  d.energy_drift = energy_drift(cfg, traj);
  const double h0 = reduced_hamiltonian(cfg, traj.initial());
  d.relative_energy_drift = h0 != 0.0 ? d.energy_drift / std::abs(h0) : d.energy_drift;
  const SimInvariants first = sim_invariants(traj.initial().a, traj.initial().pa);
  for (const PhasePoint& x : traj.samples) {
    const SimInvariants now = sim_invariants(x.a, x.pa);
    d.rho_p_rho_drift = std::max(d.rho_p_rho_drift, std::abs(now.rho_p_rho - first.rho_p_rho));
    d.Rt_pR_drift = std::max(d.Rt_pR_drift, (now.Rt_pR - first.Rt_pR).norm());
    d.p_tau_drift = std::max(d.p_tau_drift, (now.p_tau - first.p_tau).lpNorm<Eigen::Infinity>());
    d.orthogonality_defect = std::max(d.orthogonality_defect, orthogonality_defect(x.a.R));
  }
  for (std::size_t l = 0; l < cfg.num_scales(); ++l) {
    for (double r : momentum_transport_residual(cfg, traj, l)) {
      d.momentum_transport = std::max(d.momentum_transport, r);
    }
  }
  return d;
}

namespace {

Json diagnostics_json(const TrajectoryDiagnostics& d) {
  return {{"energy_drift", d.energy_drift},
          {"relative_energy_drift", d.relative_energy_drift},
          {"rho_p_rho_drift", d.rho_p_rho_drift},
          {"Rt_pR_drift", d.Rt_pR_drift},
          {"p_tau_drift", d.p_tau_drift},
          {"orthogonality_defect", d.orthogonality_defect},
          {"momentum_transport_residual", d.momentum_transport}};
}

Json final_state_json(const PhasePoint& x) {
  return {{"rho", x.a.rho}, {"R", matrix_rows_json(x.a.R)}, {"tau", vector_json(x.a.tau)}};
}

}  // namespace

namespace {

Json match_report_json(const RegistrationProblem& prob, const RunConfig& config,
                       const MatchResult& result) {
  Json j;
  j["command"] = "match";
  j["status"] = std::string(to_string(result.status));
  j["iterations"] = result.history.empty() ? 0 : result.history.back().iteration;
  j["scheme"] = std::string(to_string(config.integrator.scheme));
  j["steps"] = config.integrator.steps;
  j["sim_enabled"] = prob.sim_enabled;
  const IterationRecord last = result.history.empty() ? IterationRecord{} : result.history.back();
  j["objective"] = {{"total", last.objective}, {"kinetic", last.kinetic}, {"data", last.data}};
  j["data_initial"] = result.initial_data;
  j["data_final"] = result.final_data;
  j["data_ratio"] = result.initial_data > 0.0 ? result.final_data / result.initial_data : 0.0;
  j["grad_norm"] = result.final_grad_norm;
  j["max_energy_drift_over_iterates"] = result.max_energy_drift;
  j["completion_objective_shift"] = result.completion_objective_shift;
  const TransversalityReport& t = result.transversality;
  j["transversality"] = {{"landmarks", t.landmarks},
                         {"p_rho", t.p_rho},
                         {"p_R", t.p_R},
                         {"p_R_tangential", t.p_R_tangential},
                         {"p_tau", t.p_tau},
                         {"max", t.max_residual(prob.sim_enabled)}};
  j["diagnostics"] = diagnostics_json(diagnose(prob.cfg, result.trajectory));
  j["final_similarity"] = final_state_json(result.trajectory.final());
  return j;
}

}  // namespace

std::string match_report(const RegistrationProblem& prob, const RunConfig& config,
                         const MatchResult& result) {
  return dump(match_report_json(prob, config, result));
}

std::string match_report(const RegistrationProblem& prob, const RunConfig& config,
                         const MultiStartResult& result) {
  Json j = match_report_json(prob, config, result.best);
  j["best_start"] = result.best_start;
  Json starts = Json::array();
  for (std::size_t i = 0; i < result.statuses.size(); ++i) {
    starts.push_back({{"status", std::string(to_string(result.statuses[i]))},
                      {"objective", result.objectives[i]}});
  }
  j["starts"] = std::move(starts);
  return dump(j);
}

std::string shoot_report(const RegistrationProblem& prob, const RunConfig& config,
                         const Trajectory& traj) {
  Json j;
  j["command"] = "shoot";
  j["scheme"] = std::string(to_string(config.integrator.scheme));
  j["steps"] = config.integrator.steps;
  j["sim_enabled"] = prob.sim_enabled;
  j["kinetic"] = reduced_hamiltonian(prob.cfg, traj.initial());
  j["data"] = endpoint_cost(traj.final().q, traj.final().a, prob);
  if (!traj.projected) {
    j["transversality"] = {{"max", transversality(prob, traj).max_residual(prob.sim_enabled)}};
  }
  j["diagnostics"] = diagnostics_json(diagnose(prob.cfg, traj));
  j["final_similarity"] = final_state_json(traj.final());
  return dump(j);
}

}  // namespace mslddmm
