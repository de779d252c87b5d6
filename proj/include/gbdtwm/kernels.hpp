#pragma once

#include <cstdint>
#include <span>
#include <string>

// Reduction kernels used in the hot loops (distance computations, gradient
// aggregation). Two backends: a scalar reference and an AVX2 variant, picked
// once at runtime. Both use the same fixed reduction tree, four strided
// accumulator lanes combined as (l0+l1)+(l2+l3) plus a sequential tail, so
// their results are bit-identical and models do not depend on the host CPU.

namespace gbdtwm::kernels {

struct GHSum {
  double g = 0.0;
  double h = 0.0;
};

enum class Backend { scalar, avx2 };

// Resolved on first use: GBDTWM_KERNELS=scalar|avx2 overrides CPU detection.
Backend active_backend();
std::string backend_name();
bool avx2_available();

double sum(std::span<const double> v);
double sq_l2(std::span<const double> a, std::span<const double> b);
GHSum sum_gh(std::span<const double> g, std::span<const double> h,
             std::span<const int> ids);

namespace scalar {
double sum(std::span<const double> v);
double sq_l2(std::span<const double> a, std::span<const double> b);
GHSum sum_gh(std::span<const double> g, std::span<const double> h,
             std::span<const int> ids);
}  // namespace scalar

#ifdef GBDTWM_HAVE_AVX2
namespace avx2 {
double sum(std::span<const double> v);
double sq_l2(std::span<const double> a, std::span<const double> b);
GHSum sum_gh(std::span<const double> g, std::span<const double> h,
             std::span<const int> ids);
}  // namespace avx2
#endif

}  // namespace gbdtwm::kernels
