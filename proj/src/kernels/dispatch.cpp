#include <atomic>
#include <cstdlib>
#include <string>

#include "driveimit/kernels.hpp"

namespace driveimit::kernels {

namespace {

constexpr Table kScalarTable{&scalar::dot, &scalar::axpy, &scalar::gemv, &scalar::gemv_t_acc,
                             &scalar::ger_acc};
constexpr Table kAvx2Table{&avx2::dot, &avx2::axpy, &avx2::gemv, &avx2::gemv_t_acc,
                           &avx2::ger_acc};

Isa detect() {
  if (const char* env = std::getenv("DRIVEIMIT_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && cpu_supports(Isa::kAvx2)) return Isa::kAvx2;
  }
  return cpu_supports(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(__x86_64__) || defined(__i386__)
      return avx2::compiled() && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const Table& table_for(Isa isa) { return isa == Isa::kAvx2 ? kAvx2Table : kScalarTable; }

const Table& active() { return table_for(current().load(std::memory_order_relaxed)); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool select(Isa isa) {
  if (!cpu_supports(isa)) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

}  // namespace driveimit::kernels
