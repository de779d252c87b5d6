#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "gbdtwm/kernels.hpp"
#include "gbdtwm/rng.hpp"

using namespace gbdtwm;

TEST_CASE("splitmix64 matches the reference sequence") {
  // Reference outputs of Vigna's splitmix64.c for seeds 0 and 42.
  rng::SplitMix64 a(0);
  CHECK(a.next() == 0xE220A8397B1DCDAFULL);
  CHECK(a.next() == 0x6E789E6AA1B965F4ULL);
  CHECK(a.next() == 0x06C45D188009454FULL);

  rng::SplitMix64 b(42);
  CHECK(b.next() == 0xBDD732262FEB6E95ULL);
  CHECK(b.next() == 0x28EFE333B266F103ULL);
}

TEST_CASE("next_double covers [0,1) with 53-bit resolution") {
  rng::SplitMix64 gen(0);
  CHECK(gen.next_double() == doctest::Approx(0.8833108082136426).epsilon(1e-15));

  rng::SplitMix64 g2(7);
  double lo = 1.0, hi = 0.0, mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = g2.next_double();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    mean += v;
  }
  mean /= n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("next_index stays in range and is roughly uniform") {
  rng::SplitMix64 gen(3);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const std::size_t v = gen.next_index(7);
    REQUIRE(v < 7);
    ++counts[v];
  }
  for (int c : counts) CHECK(std::abs(c - n / 7) < 600);
}

TEST_CASE("derive gives distinct stable streams") {
  CHECK(rng::derive(1, 0) == rng::derive(1, 0));
  CHECK(rng::derive(1, 0) != rng::derive(1, 1));
  CHECK(rng::derive(1, 0) != rng::derive(2, 0));
  CHECK(rng::derive(5, 3, 4) == rng::derive(rng::derive(5, 3), 4));
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  rng::SplitMix64 gen(9);
  rng::shuffle(v, gen);

  std::vector<int> again(100);
  std::iota(again.begin(), again.end(), 0);
  rng::SplitMix64 gen2(9);
  rng::shuffle(again, gen2);
  CHECK(v == again);

  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[i] == i);
  CHECK(v != sorted);  // seed 9 should actually move something
}

TEST_CASE("sample_without_replacement draws k distinct in-range values") {
  rng::SplitMix64 gen(11);
  const auto s = rng::sample_without_replacement(10, 4, gen);
  REQUIRE(s.size() == 4);
  for (int v : s) {
    CHECK(v >= 0);
    CHECK(v < 10);
  }
  auto sorted = s;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());

  rng::SplitMix64 gen2(11);
  CHECK(rng::sample_without_replacement(10, 4, gen2) == s);

  rng::SplitMix64 gen3(11);
  auto all = rng::sample_without_replacement(6, 6, gen3);
  std::sort(all.begin(), all.end());
  for (int i = 0; i < 6; ++i) CHECK(all[i] == i);

  rng::SplitMix64 gen4(0);
  CHECK_THROWS(rng::sample_without_replacement(3, 4, gen4));
}

namespace {

double naive_sum(std::span<const double> v) {
  long double s = 0.0L;
  for (double x : v) s += x;
  return static_cast<double>(s);
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  rng::SplitMix64 gen(seed);
  std::vector<double> v(n);
  for (double& x : v) x = 20.0 * gen.next_double() - 10.0;
  return v;
}

}  // namespace

TEST_CASE("scalar kernels match naive reference") {
  for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 1000}) {
    const auto a = random_vec(n, 100 + n);
    const auto b = random_vec(n, 200 + n);
    CHECK(kernels::scalar::sum(a) ==
          doctest::Approx(naive_sum(a)).epsilon(1e-12));

    long double d2 = 0.0L;
    for (std::size_t i = 0; i < n; ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(kernels::scalar::sq_l2(a, b) ==
          doctest::Approx(static_cast<double>(d2)).epsilon(1e-12));
  }
  CHECK(kernels::scalar::sum({}) == 0.0);
}

TEST_CASE("sum_gh over an id subset matches the naive sum") {
  const auto g = random_vec(64, 1);
  const auto h = random_vec(64, 2);
  std::vector<int> ids = {5, 0, 63, 17, 17, 8, 31};  // duplicates are fine
  const auto s = kernels::scalar::sum_gh(g, h, ids);
  long double eg = 0.0L, eh = 0.0L;
  for (int id : ids) {
    eg += g[id];
    eh += h[id];
  }
  CHECK(s.g == doctest::Approx(static_cast<double>(eg)).epsilon(1e-12));
  CHECK(s.h == doctest::Approx(static_cast<double>(eh)).epsilon(1e-12));
}

#ifdef GBDTWM_HAVE_AVX2
TEST_CASE("avx2 kernels agree with the scalar reference bit for bit") {
  if (!kernels::avx2_available()) {
    MESSAGE("CPU lacks AVX2; skipping");
    return;
  }
  for (std::size_t n = 0; n <= 33; ++n) {
    const auto a = random_vec(n, 300 + n);
    const auto b = random_vec(n, 400 + n);
    CHECK(kernels::avx2::sum(a) == kernels::scalar::sum(a));
    CHECK(kernels::avx2::sq_l2(a, b) == kernels::scalar::sq_l2(a, b));

    std::vector<int> ids(n);
    rng::SplitMix64 gen(500 + n);
    for (int& id : ids) id = static_cast<int>(gen.next_index(std::max<std::size_t>(n, 1)));
    const auto sa = kernels::avx2::sum_gh(a, b, ids);
    const auto ss = kernels::scalar::sum_gh(a, b, ids);
    CHECK(sa.g == ss.g);
    CHECK(sa.h == ss.h);
  }
  const auto big = random_vec(4096, 77);
  CHECK(kernels::avx2::sum(big) == kernels::scalar::sum(big));
}
#endif

TEST_CASE("dispatch layer works and reports a backend") {
  const auto v = random_vec(100, 5);
  CHECK(kernels::sum(v) == doctest::Approx(naive_sum(v)).epsilon(1e-12));
  const std::string name = kernels::backend_name();
  CHECK((name == "scalar" || name == "avx2"));
  CHECK_THROWS(kernels::sq_l2(std::vector<double>(3), std::vector<double>(4)));
}
