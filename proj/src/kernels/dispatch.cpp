#include <cstdlib>
#include <string>

#include "sagin/kernels.hpp"
#include "sagin/types.hpp"

namespace sagin::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& resolve() {
  const char* env = std::getenv("SAGIN_SIMD");
  const std::string choice = env ? env : "auto";
  if (choice == "scalar") return scalar_table();
  if (choice == "avx2") {
    if (!isa_supported(Isa::Avx2)) throw ConfigError("SAGIN_SIMD=avx2 but AVX2/FMA is unavailable");
    return *avx2_table();
  }
  if (choice != "auto") throw ConfigError("SAGIN_SIMD must be scalar, avx2 or auto");
  return isa_supported(Isa::Avx2) ? *avx2_table() : scalar_table();
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2: return avx2_table() != nullptr && cpu_has_avx2();
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_supported(isa)) throw ConfigError("requested kernel ISA is not supported on this CPU");
  return isa == Isa::Avx2 ? *avx2_table() : scalar_table();
}

const KernelTable& active() {
  static const KernelTable& selected = resolve();
  return selected;
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

}  // namespace sagin::kernels
