#include "gbdtwm/kernels.hpp"

#ifdef GBDTWM_HAVE_AVX2

#include <immintrin.h>

// AVX2 backend. Compiled with -mavx2 but without -mfma: a fused
// multiply-add would round differently than the scalar reference.

namespace gbdtwm::kernels::avx2 {

namespace {

// Combines the four register lanes in the library-wide fixed order.
inline double reduce_lanes(__m256d acc) {
  alignas(32) double l[4];
  _mm256_store_pd(l, acc);
  return (l[0] + l[1]) + (l[2] + l[3]);
}

}  // namespace

double sum(std::span<const double> v) {
  const std::size_t n = v.size();
  const std::size_t n4 = n & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(v.data() + i));
  }
  double s = reduce_lanes(acc);
  for (std::size_t i = n4; i < n; ++i) s += v[i];
  return s;
}

double sq_l2(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t n4 = n & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = reduce_lanes(acc);
  for (std::size_t i = n4; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

GHSum sum_gh(std::span<const double> g, std::span<const double> h,
             std::span<const int> ids) {
  const std::size_t n = ids.size();
  const std::size_t n4 = n & ~std::size_t{3};
  __m256d accg = _mm256_setzero_pd();
  __m256d acch = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m128i idx =
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(ids.data() + i));
    accg = _mm256_add_pd(accg, _mm256_i32gather_pd(g.data(), idx, 8));
    acch = _mm256_add_pd(acch, _mm256_i32gather_pd(h.data(), idx, 8));
  }
  GHSum out;
  out.g = reduce_lanes(accg);
  out.h = reduce_lanes(acch);
  for (std::size_t i = n4; i < n; ++i) {
    out.g += g[ids[i]];
    out.h += h[ids[i]];
  }
  return out;
}

}  // namespace gbdtwm::kernels::avx2

#endif  // GBDTWM_HAVE_AVX2
