#include "gbdtwm/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

#include "gbdtwm/rng.hpp"

namespace gbdtwm::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(GBDTWM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend resolve_backend() {
  if (const char* env = std::getenv("GBDTWM_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return Backend::scalar;
    if (want == "avx2") {
      if (!cpu_has_avx2())
        throw std::runtime_error("GBDTWM_KERNELS=avx2 but CPU lacks AVX2");
      return Backend::avx2;
    }
    throw std::runtime_error("GBDTWM_KERNELS must be 'scalar' or 'avx2', got '" +
                             want + "'");
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

}  // namespace

Backend active_backend() {
  static const Backend b = resolve_backend();
  return b;
}

std::string backend_name() {
  return active_backend() == Backend::avx2 ? "avx2" : "scalar";
}

bool avx2_available() { return cpu_has_avx2(); }

double sum(std::span<const double> v) {
#ifdef GBDTWM_HAVE_AVX2
  if (active_backend() == Backend::avx2) return avx2::sum(v);
#endif
  return scalar::sum(v);
}

double sq_l2(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("sq_l2: length mismatch");
#ifdef GBDTWM_HAVE_AVX2
  if (active_backend() == Backend::avx2) return avx2::sq_l2(a, b);
#endif
  return scalar::sq_l2(a, b);
}

GHSum sum_gh(std::span<const double> g, std::span<const double> h,
             std::span<const int> ids) {
#ifdef GBDTWM_HAVE_AVX2
  if (active_backend() == Backend::avx2) return avx2::sum_gh(g, h, ids);
#endif
  return scalar::sum_gh(g, h, ids);
}

}  // namespace gbdtwm::kernels

namespace gbdtwm::rng {

std::vector<int> sample_without_replacement(int n, int k, SplitMix64& gen) {
  if (k < 0 || k > n) throw std::invalid_argument("sample_without_replacement: k out of range");
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  std::vector<int> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    const std::size_t j = i + gen.next_index(n - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace gbdtwm::rng
