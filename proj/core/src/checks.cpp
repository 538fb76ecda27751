#include "mslddmm/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>

#include "mslddmm/error.hpp"
#include "mslddmm/finite_difference.hpp"
#include "mslddmm/momentum.hpp"

namespace mslddmm {

namespace {

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

/// FNV-1a; std::hash is not stable across standard libraries.
std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

InstanceGenerator::InstanceGenerator(std::uint64_t seed) {
  for (std::uint64_t& s : s_) s = splitmix(seed);
}

std::uint64_t InstanceGenerator::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double InstanceGenerator::uniform(double lo, double hi) {
  const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double InstanceGenerator::normal() {
  // Box-Muller; 1 - u keeps the logarithm finite.
  const double u = 1.0 - uniform();
  const double v = uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

Matrix InstanceGenerator::points(int dim, Index count, double spread) {
  Matrix m(dim, count);
  for (Index j = 0; j < count; ++j) {
    for (int a = 0; a < dim; ++a) m(a, j) = spread * normal();
  }
  return m;
}

MultiscaleConfiguration InstanceGenerator::configuration(
    int dim, const std::vector<Index>& counts, double spread) {
  std::vector<Matrix> scales;
  scales.reserve(counts.size());
  for (Index n : counts) scales.push_back(points(dim, n, spread));
  return MultiscaleConfiguration(std::move(scales));
}

MultiscaleMomentum InstanceGenerator::momentum(
    const MultiscaleConfiguration& shape, double spread) {
  std::vector<Matrix> scales;
  scales.reserve(shape.num_scales());
  for (std::size_t l = 0; l < shape.num_scales(); ++l) {
    scales.push_back(points(shape.dim(), shape.count(l), spread));
  }
  return MultiscaleMomentum(std::move(scales));
}

SimMomentum InstanceGenerator::sim_momentum(int dim, double spread) {
  SimMomentum pa = SimMomentum::zero(dim);
  pa.p_rho = spread * normal();
  pa.p_R = points(dim, dim, spread);
  pa.p_tau = points(dim, 1, spread).col(0);
  return pa;
}

Matrix InstanceGenerator::rotation(int dim, double angle) {
  const Matrix m = points(dim, dim, angle);
  return so_exponential(0.5 * (m - m.transpose()));
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Suite {
 public:
  Suite(std::string name, std::uint64_t seed, unsigned threads)
      : name_(std::move(name)), seed_(seed), threads_(threads) {}

  unsigned threads() const { return threads_; }
  /// Generator for state shared between checks of this suite.
  InstanceGenerator generator(std::string_view key) const {
    return InstanceGenerator(seed_ ^ stable_hash(name_ + "#" + std::string(key)));
  }

  /// Runs `measure` with a generator private to this check, so adding or
  /// reordering checks leaves the others' instances unchanged. Errors count
  /// as failures.
  void add(const std::string& check, double lower, double upper,
           const std::function<double(InstanceGenerator&, std::string&)>& measure) {
    CheckResult r{name_, check, 0.0, lower, upper, false, {}};
    InstanceGenerator gen(seed_ ^ stable_hash(name_ + "/" + check));
    try {
      r.measured = measure(gen, r.detail);
      r.passed = std::isfinite(r.measured) && r.measured >= lower &&
                 r.measured <= upper;
    } catch (const Error& e) {
      r.measured = kInf;
      r.detail = std::string(to_string(e.code())) + ": " + e.what();
    }
    results_.push_back(std::move(r));
  }

  std::vector<CheckResult> take() { return std::move(results_); }

 private:
  std::string name_;
  std::uint64_t seed_;
  unsigned threads_;
  std::vector<CheckResult> results_;
};

SimElement random_element(InstanceGenerator& gen, int dim) {
  return SimElement::checked(gen.uniform(0.7, 1.4), gen.rotation(dim, 0.6),
                             gen.points(dim, 1, 0.5).col(0));
}

/// Random joint state with the Sim+ block away from the identity.
PhasePoint random_phase(InstanceGenerator& gen, int dim,
                        const std::vector<Index>& counts, double q_spread,
                        double p_spread, double pa_spread) {
  PhasePoint x = PhasePoint::at_rest(gen.configuration(dim, counts, q_spread));
  x.p = gen.momentum(x.q, p_spread);
  x.a = random_element(gen, dim);
  x.pa = gen.sim_momentum(dim, pa_spread);
  return x;
}

/// Landmark momenta rescaled so the fastest landmark initially moves `reach`
/// finest kernel widths per unit time. The accuracy checks run at fixed step
/// counts, so their instances must keep the flow resolved: unscaled draws
/// occasionally drive landmarks into near-collision where no fixed N holds
/// a fixed tolerance.
MultiscaleMomentum resolved_momentum(InstanceGenerator& gen, const ScaleConfig& cfg,
                                     const MultiscaleConfiguration& q, double reach) {
  PhasePoint x = PhasePoint::at_rest(q);
  x.p = gen.momentum(q, 1.0);
  const PhasePoint rate = phase_rhs(cfg, x);
  double peak = 0.0;
  for (const Matrix& s : rate.q.scales()) {
    if (s.cols() > 0) peak = std::max(peak, s.colwise().norm().maxCoeff());
  }
  if (peak > 0.0) x.p *= reach * cfg.sigma(cfg.num_scales() - 1) / peak;
  return x.p;
}

/// Random direction in (p_rho, p_R, p_tau) scaled to the given norm.
SimMomentum sim_momentum_of_norm(InstanceGenerator& gen, int dim, double norm) {
  SimMomentum pa = gen.sim_momentum(dim, 1.0);
  const double scale = norm / std::sqrt(pa.squared_norm());
  pa.p_rho *= scale;
  pa.p_R *= scale;
  pa.p_tau *= scale;
  return pa;
}

// Deformation budget of the accuracy-check instances, in finest widths.
constexpr double kReach = 2.0;

/// Flat (p, p_rho, p_R, p_tau) coordinates of initial momenta.
Vector pack(const InitialMomenta& m) {
  const int d = m.pa.dim();
  Vector out(m.p.total_count() * d + 1 + d * d + d);
  Index o = 0;
  for (const Matrix& s : m.p.scales()) {
    out.segment(o, s.size()) = s.reshaped();
    o += s.size();
  }
  out[o++] = m.pa.p_rho;
  out.segment(o, d * d) = m.pa.p_R.reshaped();
  o += d * d;
  out.segment(o, d) = m.pa.p_tau;
  return out;
}

InitialMomenta unpack(const Vector& flat, const InitialMomenta& shape) {
  InitialMomenta m = shape;
  const int d = m.pa.dim();
  Index o = 0;
  for (std::size_t l = 0; l < m.p.num_scales(); ++l) {
    Matrix& s = m.p.scale(l);
    s = flat.segment(o, s.size()).reshaped(s.rows(), s.cols());
    o += s.size();
  }
  m.pa.p_rho = flat[o++];
  m.pa.p_R = flat.segment(o, d * d).reshaped(d, d);
  o += d * d;
  m.pa.p_tau = flat.segment(o, d);
  return m;
}

/// Source with the coarse scale a subset of the fine one, and a target that
/// is a similarity image of it.
RegistrationProblem similarity_instance(InstanceGenerator& gen, int dim,
                                        Index coarse, Index fine,
                                        double data_weight,
                                        const SimElement& truth) {
  const Matrix points = gen.points(dim, fine, 1.5);
  MultiscaleConfiguration source(
      std::vector<Matrix>{points.leftCols(coarse), points});
  MultiscaleConfiguration target = sim_act(truth, source, centers_of_mass(source));
  return RegistrationProblem::make(std::move(source), std::move(target),
                                   ScaleConfig::make(dim, {2.0, 1.0}),
                                   data_weight, true);
}

double relative_drift(const ScaleConfig& cfg, const Trajectory& traj) {
  return energy_drift(cfg, traj) /
         std::abs(reduced_hamiltonian(cfg, traj.initial()));
}

// ---------------------------------------------------------------- kernels

void kernel_suite(Suite& s) {
  s.add("jacobian_fd", 0.0, 1e-6, [](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    for (int dim : {2, 3}) {
      const ScaleConfig cfg = ScaleConfig::make(dim, {1.5, 0.8, 0.4});
      ControlField field;
      for (std::size_t k = 0; k < cfg.num_scales(); ++k) {
        field.bands.push_back({gen.points(dim, 5, 1.0), gen.points(dim, 5, 1.0)});
      }
      for (int trial = 0; trial < 5; ++trial) {
        const Vector x = gen.points(dim, 1, 1.0).col(0);
        for (std::size_t ell = 0; ell < cfg.num_scales(); ++ell) {
          const Matrix fd = central_jacobian(
              [&](const Vector& y) { return velocity_at(cfg, field, ell, y); }, x);
          const Matrix an = velocity_jacobian(cfg, field, ell, x);
          worst = std::max(worst, relative_mismatch(an.reshaped(), fd.reshaped()));
        }
      }
    }
    return worst;
  });

  s.add("energy_quadratic_form", 0.0, 1e-12, [](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    for (int dim : {2, 3}) {
      const ScaleConfig cfg = ScaleConfig::make(dim, {1.2, 0.5});
      ControlField field;
      for (std::size_t k = 0; k < cfg.num_scales(); ++k) {
        field.bands.push_back({gen.points(dim, 6, 1.0), gen.points(dim, 6, 1.0)});
      }
      double paired = 0.0;
      for (std::size_t k = 0; k < cfg.num_scales(); ++k) {
        const BandField& mu = field.bands[k];
        for (Index j = 0; j < mu.size(); ++j) {
          paired += mu.weights.col(j).dot(kernel_eval(cfg, k, mu, mu.locations.col(j)));
        }
      }
      const double energy = rkhs_energy(cfg, field);
      worst = std::max(worst, std::abs(energy - paired) / std::abs(paired));
    }
    return worst;
  });

  s.add("energy_permutation_symmetry", 0.0, 1e-14,
        [](InstanceGenerator& gen, std::string&) {
          const ScaleConfig cfg = ScaleConfig::make(2, {1.0});
          BandField mu{gen.points(2, 7, 1.0), gen.points(2, 7, 1.0)};
          const double e0 = rkhs_energy(cfg, {{mu}});
          BandField reversed{mu.locations.rowwise().reverse(),
                             mu.weights.rowwise().reverse()};
          const double e1 = rkhs_energy(cfg, {{reversed}});
          return std::abs(e0 - e1) / std::abs(e0);
        });
}

// -------------------------------------------------------------------- sim

void sim_suite(Suite& s) {
  // Landmarks ride along; the Sim+ block is decoupled from them in the
  // dynamics.
  const auto conserved = [](InstanceGenerator& gen, auto&& residual) {
    double worst = 0.0;
    for (int trial = 0; trial < 6; ++trial) {
      const int dim = trial % 2 == 0 ? 2 : 3;
      const ScaleConfig cfg = ScaleConfig::make(dim, {1.5, 0.7});
      PhasePoint x0 = PhasePoint::at_rest(gen.configuration(dim, {2, 4}, 1.0));
      x0.p = resolved_momentum(gen, cfg, x0.q, kReach);
      x0.pa = sim_momentum_of_norm(gen, dim, 2.0);
      const Trajectory traj = shoot(cfg, x0, 100, Scheme::kRk4);
      const SimInvariants first = sim_invariants(x0.a, x0.pa);
      for (const PhasePoint& x : traj.samples) {
        worst = std::max(worst, residual(first, sim_invariants(x.a, x.pa), x));
      }
    }
    return worst;
  };

  s.add("rho_p_rho_conserved", 0.0, 1e-8, [&](InstanceGenerator& gen, std::string&) {
    return conserved(gen, [](const SimInvariants& a, const SimInvariants& b,
                             const PhasePoint&) {
      return std::abs(b.rho_p_rho - a.rho_p_rho);
    });
  });
  s.add("Rt_pR_conserved", 0.0, 1e-8, [&](InstanceGenerator& gen, std::string&) {
    return conserved(gen, [](const SimInvariants& a, const SimInvariants& b,
                             const PhasePoint&) { return (b.Rt_pR - a.Rt_pR).norm(); });
  });
  s.add("p_tau_rate_zero", 0.0, 0.0, [&](InstanceGenerator& gen, std::string&) {
    return conserved(gen, [](const SimInvariants&, const SimInvariants&,
                             const PhasePoint& x) {
      return sim_rhs(x.a, x.pa).dpa.p_tau.lpNorm<Eigen::Infinity>();
    });
  });
  s.add("orthogonality_drift", 0.0, 1e-8, [&](InstanceGenerator& gen, std::string&) {
    return conserved(gen, [](const SimInvariants&, const SimInvariants&,
                             const PhasePoint& x) { return orthogonality_defect(x.a.R); });
  });

  for (int dim : {2, 3}) {
    s.add("closed_form_d" + std::to_string(dim), 0.0, 1e-6,
          [dim](InstanceGenerator& gen, std::string&) {
            const ScaleConfig cfg = ScaleConfig::make(dim, {1.0});
            double worst = 0.0;
            for (int trial = 0; trial < 20; ++trial) {
              const SimMomentum pa0 = sim_momentum_of_norm(gen, dim, 2.0);
              const PhasePoint x0 = PhasePoint::with_momenta(
                  MultiscaleConfiguration({Matrix::Zero(dim, 1)}),
                  MultiscaleMomentum({Matrix::Zero(dim, 1)}), pa0);
              const PhasePoint x1 = shoot(cfg, x0, 200, Scheme::kRk4).final();
              const auto [a, pa] = sim_closed_form(pa0, 1.0);
              worst = std::max({worst, std::abs(a.rho - x1.a.rho),
                                (a.R - x1.a.R).lpNorm<Eigen::Infinity>(),
                                (a.tau - x1.a.tau).lpNorm<Eigen::Infinity>(),
                                std::abs(pa.p_rho - x1.pa.p_rho),
                                (pa.p_R - x1.pa.p_R).lpNorm<Eigen::Infinity>(),
                                (pa.p_tau - x1.pa.p_tau).lpNorm<Eigen::Infinity>()});
            }
            return worst;
          });
  }

  s.add("group_inverse", 0.0, 1e-12, [](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    for (int dim : {2, 3}) {
      const SimElement a = random_element(gen, dim);
      const SimElement b = random_element(gen, dim);
      const SimElement c = random_element(gen, dim);
      const SimElement e = sim_compose(a, sim_inverse(a));
      const SimElement lhs = sim_compose(sim_compose(a, b), c);
      const SimElement rhs = sim_compose(a, sim_compose(b, c));
      worst = std::max({worst, std::abs(e.rho - 1.0),
                        (e.R - Matrix::Identity(dim, dim)).lpNorm<Eigen::Infinity>(),
                        e.tau.lpNorm<Eigen::Infinity>(), std::abs(lhs.rho - rhs.rho),
                        (lhs.R - rhs.R).lpNorm<Eigen::Infinity>(),
                        (lhs.tau - rhs.tau).lpNorm<Eigen::Infinity>()});
    }
    return worst;
  });
}

// ------------------------------------------------------------ hamiltonian

void hamiltonian_suite(Suite& s) {
  s.add("symplectic_gradient", 0.0, 1e-5, [](InstanceGenerator& gen, std::string& detail) {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int dim = trial % 2 == 0 ? 2 : 3;
      std::vector<Index> counts{2};
      std::vector<double> sigmas{1.4};
      for (int l = 1; l <= trial % 3; ++l) {
        counts.push_back(counts.back() + 1);
        sigmas.push_back(sigmas.back() * 0.6);
      }
      const ScaleConfig cfg = ScaleConfig::make(dim, sigmas);
      const PhasePoint x = random_phase(gen, dim, counts, 1.0, 0.7, 0.7);
      const Vector flat = flatten(x);
      const Vector grad = central_gradient(
          [&](const Vector& y) { return reduced_hamiltonian(cfg, unflatten(y, x)); },
          flat);
      // Flat layout: [q | p | a | pa] with |q| = |p| and |a| = |pa|.
      const Index nq = x.q.total_count() * dim;
      const Index na = 1 + dim * dim + dim;
      Vector expected(flat.size());
      expected.segment(0, nq) = grad.segment(nq, nq);
      expected.segment(nq, nq) = -grad.segment(0, nq);
      expected.segment(2 * nq, na) = grad.segment(2 * nq + na, na);
      expected.segment(2 * nq + na, na) = -grad.segment(2 * nq, na);
      const double m = relative_mismatch(flatten(phase_rhs(cfg, x)), expected);
      if (m > worst) detail = "worst instance " + std::to_string(trial);
      worst = std::max(worst, m);
    }
    return worst;
  });

  s.add("vjp_fd", 0.0, 1e-6, [](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    for (int trial = 0; trial < 4; ++trial) {
      const int dim = 2 + trial % 2;
      const ScaleConfig cfg = ScaleConfig::make(dim, {1.3, 0.6});
      const PhasePoint x = random_phase(gen, dim, {2, 3}, 1.0, 0.7, 0.7);
      const PhasePoint lambda =
          unflatten(gen.points(static_cast<int>(flatten(x).size()), 1, 1.0).col(0), x);
      const Vector fd = central_gradient(
          [&](const Vector& y) { return lambda.dot(phase_rhs(cfg, unflatten(y, x))); },
          flatten(x));
      worst = std::max(worst, relative_mismatch(
                                  flatten(phase_rhs_vjp(cfg, x, lambda)), fd));
    }
    return worst;
  });

  s.add("finest_scale_reduction", 0.0, 1e-12, [](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    for (int dim : {2, 3}) {
      const ScaleConfig cfg = ScaleConfig::make(dim, {2.0, 1.0, 0.5});
      const MultiscaleConfiguration q = gen.configuration(dim, {2, 4, 7}, 1.0);
      MultiscaleMomentum p = MultiscaleMomentum::zeros_like(q);
      p.scale(2) = gen.points(dim, 7, 1.0);
      worst = std::max(worst, finest_scale_reduction_check(cfg, q, p));
    }
    return worst;
  });

  s.add("band_increment_exact", 0.0, 0.0, [](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    const ScaleConfig cfg = ScaleConfig::make(2, {2.0, 1.0, 0.5});
    const MultiscaleConfiguration q = gen.configuration(2, {2, 4, 7}, 1.0);
    const ControlField field = bands_from(q, gen.momentum(q, 1.0));
    const Matrix x = gen.points(2, 10, 1.5);
    for (Index j = 0; j < x.cols(); ++j) {
      for (std::size_t l = 1; l < cfg.num_scales(); ++l) {
        const Vector u = velocity_at(cfg, field, l, x.col(j));
        const Vector v = kernel_eval(cfg, l, field.bands[l], x.col(j));
        const Vector below = velocity_at(cfg, field, l - 1, x.col(j));
        worst = std::max(worst, (u - (below + v)).lpNorm<Eigen::Infinity>());
      }
    }
    return worst;
  });

  // Machine precision for an N-step sum: every RK4 step adds four stage
  // increments to q, each rounding once (u = eps / 2), and |q(t)| stays below
  // |q0| + |p0|. The error is reported in units of N eps (|q0| + |p0|), where
  // the a-priori bound is 4 u / eps = 2.
  s.add("single_landmark_translation", 0.0, 2.0, [](InstanceGenerator& gen, std::string&) {
    constexpr int kSteps = 50;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const int dim = 2 + trial % 2;
      const ScaleConfig cfg = ScaleConfig::make(dim, {gen.uniform(0.5, 2.0)});
      const MultiscaleConfiguration q = gen.configuration(dim, {1}, 1.0);
      const MultiscaleMomentum p = gen.momentum(q, 1.0);
      const Trajectory traj = shoot(cfg, PhasePoint::with_momenta(q, p, SimMomentum::zero(dim)),
                                    kSteps, Scheme::kRk4);
      const Vector moved = traj.final().q.point(0, 0) - q.point(0, 0) - p.point(0, 0);
      const double unit = kSteps * std::numeric_limits<double>::epsilon() *
                          (q.point(0, 0).lpNorm<Eigen::Infinity>() +
                           p.point(0, 0).lpNorm<Eigen::Infinity>());
      worst = std::max(worst, moved.lpNorm<Eigen::Infinity>() / unit);
    }
    return worst;
  });
  s.add("single_landmark_momentum", 0.0, 0.0, [](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const int dim = 2 + trial % 2;
      const ScaleConfig cfg = ScaleConfig::make(dim, {gen.uniform(0.5, 2.0)});
      const MultiscaleConfiguration q = gen.configuration(dim, {1}, 1.0);
      const MultiscaleMomentum p = gen.momentum(q, 1.0);
      const Trajectory traj = shoot(cfg, PhasePoint::with_momenta(q, p, SimMomentum::zero(dim)),
                                    50, Scheme::kRk4);
      for (const PhasePoint& x : traj.samples) {
        worst = std::max(worst, (x.p.point(0, 0) - p.point(0, 0)).lpNorm<Eigen::Infinity>());
      }
    }
    return worst;
  });
}

// ------------------------------------------------------------- integrator

PhasePoint drift_instance(InstanceGenerator& gen, const ScaleConfig& cfg) {
  PhasePoint x = PhasePoint::at_rest(gen.configuration(cfg.dim, {3, 6}, 1.0));
  x.p = resolved_momentum(gen, cfg, x.q, kReach);
  x.pa = sim_momentum_of_norm(gen, cfg.dim, 1.0);
  return x;
}

void integrator_suite(Suite& s) {
  s.add("energy_drift_rk4", 0.0, 1e-6, [](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    for (int dim : {2, 3}) {
      const ScaleConfig cfg = ScaleConfig::make(dim, {1.5, 0.75});
      const PhasePoint x0 = drift_instance(gen, cfg);
      worst = std::max(worst, relative_drift(cfg, shoot(cfg, x0, 50, Scheme::kRk4)));
    }
    return worst;
  });

  s.add("energy_drift_order", 12.0, 20.0, [](InstanceGenerator& gen, std::string& detail) {
    double lowest = kInf;
    double highest = 0.0;
    for (int dim : {2, 3}) {
      const ScaleConfig cfg = ScaleConfig::make(dim, {1.5, 0.75});
      const PhasePoint x0 = drift_instance(gen, cfg);
      const double coarse = energy_drift(cfg, shoot(cfg, x0, 50, Scheme::kRk4));
      const double fine = energy_drift(cfg, shoot(cfg, x0, 100, Scheme::kRk4));
      const double ratio = coarse / fine;
      lowest = std::min(lowest, ratio);
      highest = std::max(highest, ratio);
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "ratio range [%.3g, %.3g]", lowest, highest);
    detail = buf;
    // Report the ratio furthest from 16.
    return std::abs(lowest - 16.0) > std::abs(highest - 16.0) ? lowest : highest;
  });

  for (Scheme scheme : {Scheme::kEuler, Scheme::kRk4}) {
    s.add("adjoint_fd_" + std::string(to_string(scheme)), 0.0, 1e-6,
          [scheme](InstanceGenerator& gen, std::string&) {
            const ScaleConfig cfg = ScaleConfig::make(2, {1.5, 0.75});
            const PhasePoint x0 = random_phase(gen, 2, {2, 3}, 1.0, 0.5, 0.5);
            const PhasePoint terminal =
                unflatten(gen.points(static_cast<int>(flatten(x0).size()), 1, 1.0).col(0), x0);
            const Trajectory traj = shoot(cfg, x0, 10, scheme);
            const Vector fd = central_gradient(
                [&](const Vector& y) {
                  return terminal.dot(shoot(cfg, unflatten(y, x0), 10, scheme).final());
                },
                flatten(x0));
            return relative_mismatch(flatten(adjoint_sweep(cfg, traj, terminal, scheme)), fd);
          });
  }
}

// --------------------------------------------------------------- momentum

void momentum_suite(Suite& s) {
  const auto transport = [](const PhasePoint& x0, const ScaleConfig& cfg, int steps) {
    const Trajectory traj = shoot(cfg, x0, steps, Scheme::kRk4);
    double worst = 0.0;
    for (std::size_t l = 0; l < cfg.num_scales(); ++l) {
      for (double r : momentum_transport_residual(cfg, traj, l)) worst = std::max(worst, r);
    }
    return worst;
  };

  s.add("transport_residual", 0.0, 1e-6, [&](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    for (int dim : {2, 3}) {
      const ScaleConfig cfg = ScaleConfig::make(dim, {1.5, 0.75, 0.4});
      PhasePoint x0 = PhasePoint::at_rest(gen.configuration(dim, {2, 4, 6}, 1.0));
      x0.p = resolved_momentum(gen, cfg, x0.q, kReach);
      worst = std::max(worst, transport(x0, cfg, 100));
    }
    return worst;
  });

  // Observed order log2(r(N) / r(2N)) for N = 25 and 50; the smaller of the
  // two is reported.
  s.add("transport_order", 3.5, 4.5, [&](InstanceGenerator& gen, std::string& detail) {
    const ScaleConfig cfg = ScaleConfig::make(2, {1.5, 0.75});
    PhasePoint x0 = PhasePoint::at_rest(gen.configuration(2, {3, 6}, 1.0));
    x0.p = resolved_momentum(gen, cfg, x0.q, kReach);
    const double r25 = transport(x0, cfg, 25);
    const double r50 = transport(x0, cfg, 50);
    const double r100 = transport(x0, cfg, 100);
    const double first = std::log2(r25 / r50);
    const double second = std::log2(r50 / r100);
    char buf[96];
    std::snprintf(buf, sizeof buf, "orders %.3f, %.3f", first, second);
    detail = buf;
    return std::min(first, second);
  });

  s.add("flow_jacobian_fd", 0.0, 1e-6, [&s](InstanceGenerator& gen, std::string&) {
    const ScaleConfig cfg = ScaleConfig::make(2, {1.5, 0.75});
    PhasePoint x0 = PhasePoint::at_rest(gen.configuration(2, {2, 4}, 1.0));
    x0.p = resolved_momentum(gen, cfg, x0.q, kReach);
    const Trajectory traj = shoot(cfg, x0, 60, Scheme::kRk4);
    double worst = 0.0;
    for (std::size_t l = 0; l < cfg.num_scales(); ++l) {
      const Index n = x0.q.count(l);
      const auto jac = variational_transport(
          cfg, traj, l, std::vector<Matrix>(static_cast<std::size_t>(n), Matrix::Identity(2, 2)));
      // Probes at +-h e_a around every landmark follow the same scale-l field.
      const double h = 1e-5;
      ProbeSet probes{l, Matrix(2, 4 * n)};
      for (Index i = 0; i < n; ++i) {
        for (int a = 0; a < 2; ++a) {
          probes.points.col(4 * i + 2 * a) = x0.q.point(l, i);
          probes.points.col(4 * i + 2 * a + 1) = x0.q.point(l, i);
          probes.points(a, 4 * i + 2 * a) += h;
          probes.points(a, 4 * i + 2 * a + 1) -= h;
        }
      }
      const Matrix end = advect_probes(cfg, traj, probes, s.threads()).positions.back();
      for (Index i = 0; i < n; ++i) {
        Matrix fd(2, 2);
        for (int a = 0; a < 2; ++a) {
          fd.col(a) = (end.col(4 * i + 2 * a) - end.col(4 * i + 2 * a + 1)) / (2.0 * h);
        }
        const Matrix& an = jac.back()[static_cast<std::size_t>(i)];
        worst = std::max(worst, relative_mismatch(an.reshaped(), fd.reshaped()));
      }
    }
    return worst;
  });

  s.add("lift_uniqueness", 0.0, 1e-8, [](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    for (int dim : {2, 3}) {
      const ScaleConfig cfg = ScaleConfig::make(dim, {1.5, 0.75});
      const MultiscaleConfiguration q = gen.configuration(dim, {2, 5}, 1.0);
      const MultiscaleMomentum p = resolved_momentum(gen, cfg, q, kReach);
      const std::vector<LandmarkSplit> splits{
          {0, 1, {0.3, 0.7}},
          {1, 3, {0.5, 0.25, 0.25}},
          {1, 0, {1.5, -0.5}},
      };
      const Vector lower = Vector::Constant(dim, -2.0);
      const Vector upper = Vector::Constant(dim, 2.0);
      const std::vector<int> res(static_cast<std::size_t>(dim), dim == 2 ? 7 : 4);
      for (std::size_t l = 0; l < cfg.num_scales(); ++l) {
        worst = std::max(worst, lift_uniqueness_check(cfg, q, p, splits,
                                                      make_probe_grid(l, lower, upper, res)));
      }
    }
    return worst;
  });
}

// --------------------------------------------------------------- shooting

void shooting_suite(Suite& s) {
  s.add("objective_gradient_fd", 0.0, 1e-5, [](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    for (int dim : {2, 3}) {
      const ScaleConfig cfg = ScaleConfig::make(dim, {1.5, 0.75});
      const auto q = gen.configuration(dim, {3, 5}, 1.0);
      const auto target = gen.configuration(dim, {3, 5}, 1.0);
      const auto prob = RegistrationProblem::make(q, target, cfg, 2.0, true);
      InitialMomenta m{gen.momentum(q, 0.5), gen.sim_momentum(dim, 0.3)};
      const ShootingSetup setup{20, Scheme::kRk4};
      const Vector fd = central_gradient(
          [&](const Vector& y) { return objective(prob, unpack(y, m), setup).total; },
          pack(m));
      worst = std::max(worst, relative_mismatch(pack(gradient(prob, m, setup)), fd));
    }
    return worst;
  });

  s.add("endpoint_costate_fd", 0.0, 1e-6, [](InstanceGenerator& gen, std::string&) {
    double worst = 0.0;
    for (int dim : {2, 3}) {
      const ScaleConfig cfg = ScaleConfig::make(dim, {1.5, 0.75});
      const auto prob = RegistrationProblem::make(gen.configuration(dim, {3, 5}, 1.0),
                                                  gen.configuration(dim, {3, 5}, 1.0),
                                                  cfg, 1.5, true);
      PhasePoint end = PhasePoint::at_rest(gen.configuration(dim, {3, 5}, 1.0));
      end.a = random_element(gen, dim);
      const Vector flat = flatten(end);
      const Vector fd = central_gradient(
          [&](const Vector& y) {
            const PhasePoint z = unflatten(y, end);
            return endpoint_cost(z.q, z.a, prob);
          },
          flat);
      const EndpointCostate c = endpoint_costate(end.q, end.a, prob);
      PhasePoint packed = PhasePoint::zeros_like(end);
      packed.q = MultiscaleConfiguration(c.p.scales());
      packed.a = SimElement{c.pa.p_rho, c.pa.p_R, c.pa.p_tau};
      // Only the (q, a) blocks of the flat layout carry the costate.
      worst = std::max(worst, relative_mismatch(flatten(packed), -fd));
    }
    return worst;
  });

  // One converged match; its residuals feed several checks.
  auto converged = std::make_shared<std::optional<MatchResult>>();
  const auto run_match = [converged, &s](InstanceGenerator&) -> const MatchResult& {
    if (!*converged) {
      InstanceGenerator gen = s.generator("converged-match");
      const double angle = 20.0 * std::numbers::pi / 180.0;
      Matrix rot(2, 2);
      rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
      const SimElement truth = SimElement::checked(1.15, rot, Vector{{0.4, -0.3}});
      const auto prob = similarity_instance(gen, 2, 3, 6, 1.0, truth);
      // Plain gradient descent needs up to ~2000 iterations when two source
      // landmarks nearly coincide; the budget only has to reach convergence.
      OptimizerOptions opts;
      opts.max_iters = 10000;
      opts.grad_tol = 1e-8;
      *converged = optimize(prob, opts);
    }
    return **converged;
  };

  s.add("optimizer_converged", 0.0, 1e-8, [run_match](InstanceGenerator& gen, std::string& detail) {
    const MatchResult& r = run_match(gen);
    detail = std::string(to_string(r.status)) + " after " +
             std::to_string(r.history.size() - 1) + " iterations";
    return r.status == MatchStatus::kConverged ? r.final_grad_norm : kInf;
  });
  const std::pair<const char*, double TransversalityReport::*> parts[] = {
      {"transversality_landmarks", &TransversalityReport::landmarks},
      {"transversality_p_rho", &TransversalityReport::p_rho},
      {"transversality_p_R", &TransversalityReport::p_R},
      {"transversality_p_tau", &TransversalityReport::p_tau},
  };
  for (const auto& [name, member] : parts) {
    s.add(name, 0.0, 1e-5, [run_match, member](InstanceGenerator& gen, std::string&) {
      const MatchResult& r = run_match(gen);
      if (r.status != MatchStatus::kConverged) return kInf;
      return r.transversality.*member;
    });
  }
  s.add("optimizer_energy_drift", 0.0, 1e-6, [run_match](InstanceGenerator& gen, std::string&) {
    return run_match(gen).max_energy_drift;
  });

  s.add("synthetic_recovery", 0.0, 1e-3, [](InstanceGenerator& gen, std::string& detail) {
    double worst = 0.0;
    for (int trial = 0; trial < 2; ++trial) {
      const double angle = gen.uniform(-0.4, 0.4);
      Matrix rot(2, 2);
      rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
      const SimElement truth = SimElement::checked(
          gen.uniform(0.85, 1.2), rot, gen.points(2, 1, 0.3).col(0));
      const auto prob = similarity_instance(gen, 2, 3, 6, 10.0, truth);
      OptimizerOptions opts;
      opts.max_iters = 500;
      const MatchResult r = optimize(prob, opts);
      worst = std::max(worst, r.final_data / r.initial_data);
      detail += (detail.empty() ? "" : "; ") + std::string(to_string(r.status)) +
                " after " + std::to_string(r.history.size() - 1) + " iterations";
    }
    return worst;
  });
}

using SuiteBuilder = void (*)(Suite&);

const std::vector<std::pair<std::string_view, SuiteBuilder>>& registry() {
  static const std::vector<std::pair<std::string_view, SuiteBuilder>> suites{
      {"kernels", &kernel_suite},         {"sim", &sim_suite},
      {"hamiltonian", &hamiltonian_suite}, {"integrator", &integrator_suite},
      {"momentum", &momentum_suite},       {"shooting", &shooting_suite},
  };
  return suites;
}

}  // namespace

const std::vector<std::string_view>& check_suites() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> out;
    for (const auto& [name, build] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

std::vector<CheckResult> run_suite(std::string_view suite, std::uint64_t seed,
                                   unsigned threads) {
  for (const auto& [name, build] : registry()) {
    if (name == suite) {
      Suite s(std::string(name), seed, threads);
      build(s);
      return s.take();
    }
  }
  throw Error(ErrorCode::kConfig, "unknown check suite '" + std::string(suite) + "'");
}

std::vector<CheckResult> run_checks(const CheckOptions& opts) {
  if (opts.filter) return run_suite(*opts.filter, opts.seed, opts.threads);
  std::vector<CheckResult> all;
  for (std::string_view name : check_suites()) {
    std::vector<CheckResult> part = run_suite(name, opts.seed, opts.threads);
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return all;
}

std::string format_check(const CheckResult& r) {
  char band[64];
  if (r.lower > 0.0) {
    std::snprintf(band, sizeof band, "in [%.3g, %.3g]", r.lower, r.upper);
  } else {
    std::snprintf(band, sizeof band, "<= %.3g", r.upper);
  }
  char line[256];
  std::snprintf(line, sizeof line, "%s  %-12s %-30s %11.4e  %s", r.passed ? "PASS" : "FAIL",
                r.suite.c_str(), r.name.c_str(), r.measured, band);
  std::string out = line;
  if (!r.detail.empty()) out += "  (" + r.detail + ")";
  return out;
}

}  // namespace mslddmm
