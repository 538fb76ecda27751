#include "mslddmm/fault.hpp"

#include <atomic>

namespace mslddmm {
namespace {
std::atomic<Fault> g_fault{Fault::kNone};
}  // namespace

void set_fault(Fault fault) noexcept { g_fault.store(fault); }

Fault active_fault() noexcept { return g_fault.load(std::memory_order_relaxed); }

bool parse_fault(std::string_view name, Fault& out) noexcept {
  if (name == "none") {
    out = Fault::kNone;
  } else if (name == "flip-pR") {
    out = Fault::kFlipRotationMomentum;
  } else if (name == "flip-prho") {
    out = Fault::kFlipScaleMomentum;
  } else if (name == "flip-p") {
    out = Fault::kFlipLandmarkMomentum;
  } else {
    return false;
  }
  return true;
}

}  // namespace mslddmm
