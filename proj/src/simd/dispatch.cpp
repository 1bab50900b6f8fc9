#include <cstdlib>
#include <string_view>

#include "cpm/simd/kernels.hpp"

namespace cpm::simd {

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  if (const auto* k = avx2_kernels()) out.push_back(k);
  if (const auto* k = neon_kernels()) out.push_back(k);
  return out;
}

namespace {

const KernelTable& select() {
  const auto all = available_kernels();
  if (const char* env = std::getenv("CPM_SIMD")) {
    for (const auto* k : all) {
      if (std::string_view(env) == k->name) return *k;
    }
  }
  return *all.back();
}

}  // namespace

const KernelTable& active_kernels() {
  static const KernelTable& chosen = select();
  return chosen;
}

}  // namespace cpm::simd
