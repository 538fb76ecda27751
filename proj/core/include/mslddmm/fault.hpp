#pragma once

#include <string_view>

namespace mslddmm {

// Mutation hooks for the invariant runner. A fault flips the sign of one
// momentum derivative in the dynamics so that `check` can demonstrate it
// notices. Never set outside of test harnesses.
enum class Fault {
  kNone,
  kFlipRotationMomentum,  // sign of dp_R/dt
  kFlipScaleMomentum,     // sign of dp_rho/dt
  kFlipLandmarkMomentum,  // sign of dp_i/dt
};

void set_fault(Fault fault) noexcept;
Fault active_fault() noexcept;

/// Parses "none", "flip-pR", "flip-prho", "flip-p". Returns false on unknown
/// names.
bool parse_fault(std::string_view name, Fault& out) noexcept;

class ScopedFault {
 public:
  explicit ScopedFault(Fault fault) noexcept : previous_(active_fault()) {
    set_fault(fault);
  }
  ~ScopedFault() { set_fault(previous_); }
  ScopedFault(const ScopedFault&) = delete;
  ScopedFault& operator=(const ScopedFault&) = delete;

 private:
  Fault previous_;
};

}  // namespace mslddmm
