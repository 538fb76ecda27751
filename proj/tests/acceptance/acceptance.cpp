// Acceptance run: one PASS/FAIL line per criterion, each backed by the named
// checks of the invariant runner or by the command-line tool. Exits nonzero
// if any criterion fails.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "mslddmm/checks.hpp"

namespace {

using mslddmm::CheckResult;

constexpr std::uint64_t kSeed = 20240917;

struct Criterion {
  std::string title;
  std::string suite;
  std::vector<std::string> checks;
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MSLDDMM_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"energy conservation under RK4, fourth-order drift", "integrator",
       {"energy_drift_rk4", "energy_drift_order"}},
      {"similarity invariants rho p_rho, R^T p_R, p_tau", "sim",
       {"rho_p_rho_conserved", "Rt_pR_conserved", "p_tau_rate_zero"}},
      {"closed-form similarity flow in d = 2, 3", "sim", {"closed_form_d2", "closed_form_d3"}},
      {"Hamiltonian vector field is the symplectic gradient", "hamiltonian", {"symplectic_gradient"}},
      {"objective gradient against finite differences", "shooting", {"objective_gradient_fd"}},
      {"endpoint conditions at the converged optimum", "shooting",
       {"optimizer_converged", "endpoint_costate_fd", "transversality_landmarks",
        "transversality_p_rho", "transversality_p_R", "transversality_p_tau"}},
      {"pointwise momentum transport, fourth order", "momentum",
       {"transport_residual", "transport_order"}},
      {"lift uniqueness under landmark splitting", "momentum", {"lift_uniqueness"}},
      {"finest-scale reduction and exact band increments", "hamiltonian",
       {"finest_scale_reduction", "band_increment_exact"}},
      {"single landmark moves by translation", "hamiltonian",
       {"single_landmark_translation", "single_landmark_momentum"}},
      {"synthetic similarity target is recovered", "shooting", {"synthetic_recovery"}},
  };

  std::map<std::string, std::vector<CheckResult>> by_suite;
  bool all_passed = true;
  int index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    auto& results = by_suite[c.suite];
    if (results.empty()) results = mslddmm::run_suite(c.suite, kSeed);
    bool passed = true;
    std::string summary;
    for (const std::string& name : c.checks) {
      const CheckResult* found = nullptr;
      for (const CheckResult& r : results) {
        if (r.name == name) found = &r;
      }
      char part[128];
      if (found == nullptr) {
        passed = false;
        std::snprintf(part, sizeof part, "%s=missing", name.c_str());
      } else {
        passed = passed && found->passed;
        std::snprintf(part, sizeof part, "%s=%.3e", name.c_str(), found->measured);
      }
      summary += (summary.empty() ? "" : " ") + std::string(part);
    }
    all_passed = all_passed && passed;
    std::printf("%s  criterion %2d  %s  [%s]\n", passed ? "PASS" : "FAIL", index, c.title.c_str(),
                summary.c_str());
  }

  const int clean = run_cli("check");
  const int flip_rotation = run_cli("check --inject-fault flip-pR");
  const int flip_scale = run_cli("check --inject-fault flip-prho");
  const int flip_landmark = run_cli("check --inject-fault flip-p");
  const bool runner_ok = clean == 0 && flip_rotation == 1 && flip_scale == 1 && flip_landmark == 1;
  all_passed = all_passed && runner_ok;
  std::printf("%s  criterion 12  invariant runner passes clean, fails under each fault  "
              "[clean=%d flip-pR=%d flip-prho=%d flip-p=%d]\n",
              runner_ok ? "PASS" : "FAIL", clean, flip_rotation, flip_scale, flip_landmark);

  return all_passed ? 0 : 1;
}
