#include "gbdtwm/kernels.hpp"

// Reference backend. The four-lane strided accumulation mirrors what the
// vector backend does with one register, so both agree bit for bit.

namespace gbdtwm::kernels::scalar {

double sum(std::span<const double> v) {
  const std::size_t n = v.size();
  const std::size_t n4 = n & ~std::size_t{3};
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  for (std::size_t i = 0; i < n4; i += 4) {
    l0 += v[i + 0];
    l1 += v[i + 1];
    l2 += v[i + 2];
    l3 += v[i + 3];
  }
  double s = (l0 + l1) + (l2 + l3);
  for (std::size_t i = n4; i < n; ++i) s += v[i];
  return s;
}

double sq_l2(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t n4 = n & ~std::size_t{3};
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  for (std::size_t i = 0; i < n4; i += 4) {
    const double d0 = a[i + 0] - b[i + 0];
    const double d1 = a[i + 1] - b[i + 1];
    const double d2 = a[i + 2] - b[i + 2];
    const double d3 = a[i + 3] - b[i + 3];
    l0 += d0 * d0;
    l1 += d1 * d1;
    l2 += d2 * d2;
    l3 += d3 * d3;
  }
  double s = (l0 + l1) + (l2 + l3);
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
  double g0 = 0.0, g1 = 0.0, g2 = 0.0, g3 = 0.0;
  double h0 = 0.0, h1 = 0.0, h2 = 0.0, h3 = 0.0;
  for (std::size_t i = 0; i < n4; i += 4) {
    g0 += g[ids[i + 0]];
    g1 += g[ids[i + 1]];
    g2 += g[ids[i + 2]];
    g3 += g[ids[i + 3]];
    h0 += h[ids[i + 0]];
    h1 += h[ids[i + 1]];
    h2 += h[ids[i + 2]];
    h3 += h[ids[i + 3]];
  }
  GHSum out;
  out.g = (g0 + g1) + (g2 + g3);
  out.h = (h0 + h1) + (h2 + h3);
  for (std::size_t i = n4; i < n; ++i) {
    out.g += g[ids[i]];
    out.h += h[ids[i]];
  }
  return out;
}

}  // namespace gbdtwm::kernels::scalar
