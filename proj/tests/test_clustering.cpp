#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include <doctest.h>

#include "gbdtwm/clustering.hpp"
#include "gbdtwm/rng.hpp"
#include "helpers.hpp"

using namespace gbdtwm;

namespace {

double dist(std::span<const double> pts, std::size_t dim, std::size_t i,
            std::size_t j) {
  double s = 0.0;
  for (std::size_t f = 0; f < dim; ++f) {
    const double d = pts[i * dim + f] - pts[j * dim + f];
    s += d * d;
  }
  return std::sqrt(s);
}

// Textbook silhouette, O(N^2), written independently of the library.
double brute_silhouette(std::span<const double> pts, std::size_t n,
                        std::size_t dim, std::span<const int> assign) {
  int k = 0;
  for (int a : assign) k = std::max(k, a + 1);
  std::vector<int> sizes(k, 0);
  for (int a : assign) ++sizes[a];

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[assign[i]] < 2) continue;
    std::vector<double> sums(k, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) sums[assign[j]] += dist(pts, dim, i, j);
    const double a = sums[assign[i]] / (sizes[assign[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != assign[i] && sizes[c] > 0) b = std::min(b, sums[c] / sizes[c]);
    if (a == 0.0 && b == 0.0) continue;
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_CASE("kmeans with one cluster returns the mean") {
  const auto pts = testutil::random_points(20, 3, 1);
  const ClusterModel m = kmeans(pts, 20, 3, 1, 7);
  for (std::size_t f = 0; f < 3; ++f) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 20; ++i) mean += pts[i * 3 + f];
    mean /= 20.0;
    CHECK(m.centroids[f] == doctest::Approx(mean).epsilon(1e-12));
  }
  double inertia = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t f = 0; f < 3; ++f) {
      const double d = pts[i * 3 + f] - m.centroids[f];
      inertia += d * d;
    }
  }
  CHECK(m.inertia == doctest::Approx(inertia).epsilon(1e-9));
}

TEST_CASE("kmeans with k = N isolates every distinct point") {
  std::vector<double> pts;
  rng::SplitMix64 gen(2);
  for (int i = 0; i < 8; ++i) pts.push_back(i + 0.1 * gen.next_double());
  const ClusterModel m = kmeans(pts, 8, 1, 8, 3);
  CHECK(m.inertia == doctest::Approx(0.0).epsilon(1e-15));
  std::set<int> used(m.assignments.begin(), m.assignments.end());
  CHECK(used.size() == 8);
}

TEST_CASE("kmeans separates two well-spaced blobs") {
  std::vector<double> pts;
  rng::SplitMix64 gen(5);
  for (int i = 0; i < 15; ++i)
    pts.push_back(0.0 + 0.2 * gen.next_double());  // around 0
  for (int i = 0; i < 15; ++i)
    pts.push_back(10.0 + 0.2 * gen.next_double());  // around 10
  const ClusterModel m = kmeans(pts, 30, 1, 2, 9);

  const int first = m.assignments[0];
  for (int i = 0; i < 15; ++i) CHECK(m.assignments[i] == first);
  for (int i = 15; i < 30; ++i) CHECK(m.assignments[i] == 1 - first);
  const double lo = std::min(m.centroids[0], m.centroids[1]);
  const double hi = std::max(m.centroids[0], m.centroids[1]);
  CHECK(lo >= 0.0);
  CHECK(lo <= 0.2);
  CHECK(hi >= 10.0);
  CHECK(hi <= 10.2);

  // Inertia matches a recomputation from the assignments.
  double inertia = 0.0;
  for (int i = 0; i < 30; ++i) {
    const double d = pts[i] - m.centroids[m.assignments[i]];
    inertia += d * d;
  }
  CHECK(m.inertia == doctest::Approx(inertia).epsilon(1e-9));
}

TEST_CASE("kmeans handles coincident points without dying") {
  const std::vector<double> pts(10, 3.25);  // ten copies of one point
  const ClusterModel m = kmeans(pts, 10, 1, 3, 1);
  CHECK(m.k == 3);
  for (int a : m.assignments) {
    CHECK(a >= 0);
    CHECK(a < 3);
  }
  for (double c : m.centroids) CHECK(std::isfinite(c));
  CHECK(m.inertia == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS(kmeans(pts, 10, 1, 0, 1));
  CHECK_THROWS(kmeans(pts, 10, 1, 11, 1));
}

TEST_CASE("kmeans is deterministic per seed") {
  const auto pts = testutil::random_points(40, 2, 3);
  const ClusterModel a = kmeans(pts, 40, 2, 4, 17);
  const ClusterModel b = kmeans(pts, 40, 2, 4, 17);
  CHECK(a.assignments == b.assignments);
  CHECK(a.centroids == b.centroids);
}

TEST_CASE("silhouette matches the brute-force formula") {
  rng::SplitMix64 gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 3 + gen.next_index(57);
    const std::size_t dim = 1 + gen.next_index(4);
    const int k = 2 + static_cast<int>(gen.next_index(4));
    const auto pts = testutil::random_points(n, dim, 100 + rep);
    std::vector<int> assign(n);
    // Random assignment with both first clusters forced nonempty.
    for (std::size_t i = 0; i < n; ++i)
      assign[i] = static_cast<int>(gen.next_index(k));
    assign[0] = 0;
    assign[1 % n] = 1;

    const double got = silhouette(pts, n, dim, assign);
    const double want = brute_silhouette(pts, n, dim, assign);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    CHECK(got >= -1.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("silhouette degenerate conventions") {
  // Singleton cluster contributes 0: hand-checked 3-point case.
  const std::vector<double> pts = {0.0, 1.0, 10.0};
  const std::vector<int> assign = {0, 0, 1};
  // s(0): a=1, b=10   -> 9/10
  // s(1): a=1, b=9    -> 8/9
  // s(2): singleton   -> 0
  const double want = (0.9 + 8.0 / 9.0 + 0.0) / 3.0;
  CHECK(silhouette(pts, 3, 1, assign) == doctest::Approx(want).epsilon(1e-12));

  // All-coincident points: a = b = 0 contributes 0 everywhere.
  const std::vector<double> same(6, 2.0);
  const std::vector<int> halves = {0, 0, 0, 1, 1, 1};
  CHECK(silhouette(same, 6, 1, halves) == 0.0);

  // Two tight pairs far apart: nearly ideal clustering.
  const std::vector<double> pairs = {0.0, 0.001, 10.0, 10.001};
  const std::vector<int> two = {0, 0, 1, 1};
  CHECK(silhouette(pairs, 4, 1, two) > 0.95);

  CHECK_THROWS(silhouette(pts, 2, 1, std::vector<int>{0, 1}));
  CHECK_THROWS(silhouette(pts, 3, 1, std::vector<int>{0, 0, 0}));
}

TEST_CASE("select_k recovers three planted blobs") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::vector<double> pts;
    rng::SplitMix64 gen(seed);
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 12; ++i) {
        pts.push_back(6.0 * c + 0.5 * gen.next_double());
        pts.push_back(6.0 * c + 0.5 * gen.next_double());
      }
    CHECK(select_k(pts, 36, 2, 2, 6, seed) == 3);
  }
}

TEST_CASE("select_k ties resolve to the smallest k") {
  // Identical points score 0 for every k, so k_min wins.
  const std::vector<double> same(12, 1.0);
  CHECK(select_k(same, 12, 1, 2, 4, 9) == 2);
  CHECK_THROWS(select_k(same, 12, 1, 1, 4, 9));
  CHECK_THROWS(select_k(same, 12, 1, 2, 12, 9));
}

TEST_CASE("nearest_neighbors matches a full sort") {
  rng::SplitMix64 gen(21);
  const std::size_t n = 30, dim = 3;
  const auto pts = testutil::random_points(n, dim, 55);
  const auto query = testutil::random_points(1, dim, 56);
  const std::vector<int> exclude = {4, 9};

  std::vector<std::pair<double, int>> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 4 || i == 9) continue;
    double s = 0.0;
    for (std::size_t f = 0; f < dim; ++f) {
      const double d = query[f] - pts[i * dim + f];
      s += d * d;
    }
    order.emplace_back(s, static_cast<int>(i));
  }
  std::sort(order.begin(), order.end());

  const auto got = nearest_neighbors(query, pts, n, dim, 5, exclude);
  REQUIRE(got.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(got[i] == order[i].second);

  CHECK_THROWS(nearest_neighbors(query, pts, n, dim, 29, exclude));
}

TEST_CASE("nearest_neighbors breaks distance ties by index") {
  // Points at +/-1 are equidistant from the origin.
  const std::vector<double> pts = {1.0, -1.0, 2.0};
  const std::vector<double> query = {0.0};
  const auto got = nearest_neighbors(query, pts, 3, 1, 2, {});
  CHECK(got == std::vector<int>{0, 1});
}
