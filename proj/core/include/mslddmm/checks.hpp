#pragma once

// Invariant suites run by `mslddmm check`. Every check draws its instances
// from a seeded generator and compares one measured residual against a fixed
// acceptance band.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mslddmm/shooting.hpp"

namespace mslddmm {

/// Portable pseudo-random source: splitmix-seeded xoshiro256** with its own
/// uniform and Gaussian transforms, so instances are identical across
/// standard libraries.
class InstanceGenerator {
 public:
  explicit InstanceGenerator(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform on [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0);
  double normal();

  /// dim x count matrix of N(0, spread^2) entries.
  Matrix points(int dim, Index count, double spread);
  /// Independent points on every scale with the given nested counts.
  MultiscaleConfiguration configuration(int dim,
                                        const std::vector<Index>& counts,
                                        double spread);
  MultiscaleMomentum momentum(const MultiscaleConfiguration& shape,
                              double spread);
  SimMomentum sim_momentum(int dim, double spread);
  /// exp of a random skew matrix whose entries are N(0, angle^2).
  Matrix rotation(int dim, double angle);

 private:
  std::uint64_t s_[4];
};

struct CheckResult {
  std::string suite;
  std::string name;
  double measured = 0.0;
  /// Accepted band [lower, upper].
  double lower = 0.0;
  double upper = 0.0;
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  std::uint64_t seed = 20240917;
  /// Run a single suite; kConfig if the name is unknown.
  std::optional<std::string> filter;
  unsigned threads = 1;
};

/// kernels, sim, hamiltonian, integrator, momentum, shooting
const std::vector<std::string_view>& check_suites();

std::vector<CheckResult> run_checks(const CheckOptions& opts);

/// Runs one suite by name (kConfig if unknown).
std::vector<CheckResult> run_suite(std::string_view suite, std::uint64_t seed,
                                   unsigned threads = 1);

/// One line per check: status, suite/name, measured value and band.
std::string format_check(const CheckResult& result);

}  // namespace mslddmm
