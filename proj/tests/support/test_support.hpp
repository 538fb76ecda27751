#pragma once

#include <atomic>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <unistd.h>

#include "mslddmm/checks.hpp"
#include "mslddmm/error.hpp"
#include "mslddmm/finite_difference.hpp"
#include "mslddmm/hamiltonian.hpp"

namespace mslddmm::testing {

/// dim x n matrix whose columns are the listed points.
inline Matrix cols(std::initializer_list<std::initializer_list<double>> pts) {
  const Index n = static_cast<Index>(pts.size());
  const Index d = n > 0 ? static_cast<Index>(pts.begin()->size()) : 0;
  Matrix m(d, n);
  Index j = 0;
  for (const auto& p : pts) {
    Index a = 0;
    for (double v : p) m(a++, j) = v;
    ++j;
  }
  return m;
}

inline Matrix rotation2(double angle) {
  Matrix r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Random state with the Sim+ block away from the identity.
inline PhasePoint random_state(InstanceGenerator& gen, int dim,
                               const std::vector<Index>& counts,
                               double p_spread = 0.6) {
  PhasePoint x = PhasePoint::at_rest(gen.configuration(dim, counts, 1.0));
  x.p = gen.momentum(x.q, p_spread);
  x.a = SimElement::checked(gen.uniform(0.8, 1.3), gen.rotation(dim, 0.5),
                            gen.points(dim, 1, 0.4).col(0));
  x.pa = gen.sim_momentum(dim, p_spread);
  return x;
}

/// Expects `fn` to throw mslddmm::Error with the given code.
template <class Fn>
void expect_error(ErrorCode code, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code) << ", nothing thrown";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mslddmm_test_" + std::to_string(::getpid()) +
             "_" + std::to_string(counter++) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace mslddmm::testing
