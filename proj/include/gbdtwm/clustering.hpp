#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gbdtwm {

// Points are row-major N x d matrices, already standardized by the caller.
// All distances are Euclidean.

struct ClusterModel {
  int k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;  // k x dim
  std::vector<int> assignments;   // one per point
  double inertia = 0.0;

  std::span<const double> centroid(int j) const {
    return {centroids.data() + static_cast<std::size_t>(j) * dim, dim};
  }
};

// k-means++ seeding, Lloyd iterations until the assignment fixed point or
// max_iters. An empty cluster steals the point farthest from its own
// centroid (from clusters that can spare one). Deterministic given the seed.
ClusterModel kmeans(std::span<const double> points, std::size_t n,
                    std::size_t dim, int k, std::uint64_t seed,
                    int max_iters = 100);

// Mean silhouette over all points. Singleton clusters contribute 0 for their
// point, as does the a = b = 0 degenerate case.
double silhouette(std::span<const double> points, std::size_t n,
                  std::size_t dim, std::span<const int> assignments);

// Runs kmeans for each k in [k_min, k_max] and returns the k with the best
// silhouette; ties go to the smaller k.
int select_k(std::span<const double> points, std::size_t n, std::size_t dim,
             int k_min, int k_max, std::uint64_t seed);

// The l indices closest to the query, excluding `exclude`, ties toward the
// lower index.
std::vector<int> nearest_neighbors(std::span<const double> query,
                                   std::span<const double> points,
                                   std::size_t n, std::size_t dim, int l,
                                   std::span<const int> exclude);

}  // namespace gbdtwm
