#include <cstdlib>
#include <string>

#include "vds/error.hpp"
#include "vds/simd.hpp"

namespace vds::simd {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(__i386__)
      return detail::avx2_compiled() && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
      return detail::neon_compiled();
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa))
    throw Error(ErrorCode::InvalidArgument,
                "kernel set '" + std::string(to_string(isa)) + "' is not available on this CPU");
  switch (isa) {
    case Isa::Avx2: return detail::kAvx2Table;
    case Isa::Neon: return detail::kNeonTable;
    case Isa::Scalar: break;
  }
  return detail::kScalarTable;
}

namespace {

const KernelTable& select() {
  if (const char* forced = std::getenv("VDS_ISA")) {
    const std::string name = forced;
    if (name == "scalar") return detail::kScalarTable;
    if (name == "avx2" && supported(Isa::Avx2)) return detail::kAvx2Table;
    if (name == "neon" && supported(Isa::Neon)) return detail::kNeonTable;
  }
  if (supported(Isa::Avx2)) return detail::kAvx2Table;
  if (supported(Isa::Neon)) return detail::kNeonTable;
  return detail::kScalarTable;
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& chosen = select();
  return chosen;
}

}  // namespace vds::simd
