#include "gbdtwm/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gbdtwm/kernels.hpp"
#include "gbdtwm/rng.hpp"

namespace gbdtwm {

namespace {

std::span<const double> point(std::span<const double> points, std::size_t dim,
                              std::size_t i) {
  return points.subspan(i * dim, dim);
}

std::vector<double> kmeanspp_init(std::span<const double> points, std::size_t n,
                                  std::size_t dim, int k, rng::SplitMix64& gen) {
  std::vector<double> centroids;
  centroids.reserve(static_cast<std::size_t>(k) * dim);
  std::vector<bool> chosen(n, false);

  const std::size_t first = gen.next_index(n);
  chosen[first] = true;
  const auto p0 = point(points, dim, first);
  centroids.insert(centroids.end(), p0.begin(), p0.end());

  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (int j = 1; j < k; ++j) {
    const auto last = std::span<const double>(centroids).subspan(
        static_cast<std::size_t>(j - 1) * dim, dim);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], kernels::sq_l2(point(points, dim, i), last));
      total += d2[i];
    }

    std::size_t pick = n;
    if (total > 0.0) {
      const double r = gen.next_double() * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > r) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // r landed past the last positive mass
        for (std::size_t i = n; i-- > 0;)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
      }
    }
    if (pick == n) {  // all remaining points coincide with chosen centroids
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          pick = i;
          break;
        }
    }
    chosen[pick] = true;
    const auto pj = point(points, dim, pick);
    centroids.insert(centroids.end(), pj.begin(), pj.end());
  }
  return centroids;
}

}  // namespace

ClusterModel kmeans(std::span<const double> points, std::size_t n,
                    std::size_t dim, int k, std::uint64_t seed, int max_iters) {
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("kmeans: k must be in [1, N], got k=" +
                                std::to_string(k) + " N=" + std::to_string(n));

  ClusterModel model;
  model.k = k;
  model.dim = dim;
  rng::SplitMix64 gen(seed);
  model.centroids = kmeanspp_init(points, n, dim, k, gen);
  model.assignments.assign(n, -1);

  std::vector<int> counts(k, 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = kernels::sq_l2(point(points, dim, i), model.centroid(0));
      for (int j = 1; j < k; ++j) {
        const double d = kernels::sq_l2(point(points, dim, i), model.centroid(j));
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      if (model.assignments[i] != best) {
        model.assignments[i] = best;
        changed = true;
      }
    }
    if (!changed) break;

    std::fill(model.centroids.begin(), model.centroids.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int j = model.assignments[i];
      ++counts[j];
      const auto pi = point(points, dim, i);
      for (std::size_t f = 0; f < dim; ++f)
        model.centroids[static_cast<std::size_t>(j) * dim + f] += pi[f];
    }
    for (int j = 0; j < k; ++j)
      if (counts[j] > 0)
        for (std::size_t f = 0; f < dim; ++f)
          model.centroids[static_cast<std::size_t>(j) * dim + f] /= counts[j];

    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) continue;
      // Steal the point farthest from its centroid, from a cluster that
      // keeps at least one member.
      std::size_t steal = n;
      double worst = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const int owner = model.assignments[i];
        if (counts[owner] < 2) continue;
        const double d =
            kernels::sq_l2(point(points, dim, i), model.centroid(owner));
        if (d > worst) {
          worst = d;
          steal = i;
        }
      }
      if (steal == n) continue;  // nothing to spare; leave centroid in place
      const int from = model.assignments[steal];
      const auto ps = point(points, dim, steal);
      // Remove the stolen point from its old centroid's mean.
      for (std::size_t f = 0; f < dim; ++f) {
        double& c = model.centroids[static_cast<std::size_t>(from) * dim + f];
        c = (c * counts[from] - ps[f]) / (counts[from] - 1);
      }
      --counts[from];
      model.assignments[steal] = j;
      counts[j] = 1;
      std::copy(ps.begin(), ps.end(),
                model.centroids.begin() + static_cast<std::size_t>(j) * dim);
    }
  }

  model.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    model.inertia += kernels::sq_l2(point(points, dim, i),
                                    model.centroid(model.assignments[i]));
  return model;
}

double silhouette(std::span<const double> points, std::size_t n,
                  std::size_t dim, std::span<const int> assignments) {
  if (n < 3) throw std::invalid_argument("silhouette: need at least 3 points");
  int k = 0;
  for (int a : assignments) k = std::max(k, a + 1);
  std::vector<int> sizes(k, 0);
  for (int a : assignments) {
    if (a < 0) throw std::invalid_argument("silhouette: negative assignment");
    ++sizes[a];
  }
  int nonempty = 0;
  for (int s : sizes) nonempty += s > 0 ? 1 : 0;
  if (nonempty < 2)
    throw std::invalid_argument("silhouette: need at least 2 distinct clusters");

  double total = 0.0;
  std::vector<double> cluster_dist(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(cluster_dist.begin(), cluster_dist.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      cluster_dist[assignments[j]] +=
          std::sqrt(kernels::sq_l2(point(points, dim, i), point(points, dim, j)));
    }
    const int own = assignments[i];
    if (sizes[own] < 2) continue;  // singleton contributes 0
    const double a = cluster_dist[own] / (sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own || sizes[c] == 0) continue;
      b = std::min(b, cluster_dist[c] / sizes[c]);
    }
    if (a == 0.0 && b == 0.0) continue;  // degenerate: all distances zero
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

int select_k(std::span<const double> points, std::size_t n, std::size_t dim,
             int k_min, int k_max, std::uint64_t seed) {
  if (k_min < 2 || k_max < k_min || static_cast<std::size_t>(k_max) > n - 1)
    throw std::invalid_argument("select_k: need 2 <= k_min <= k_max <= N-1");
  int best_k = k_min;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    const ClusterModel model = kmeans(points, n, dim, k, rng::derive(seed, k));
    const double score = silhouette(points, n, dim, model.assignments);
    if (score > best_score) {
      best_score = score;
      best_k = k;
    }
  }
  return best_k;
}

std::vector<int> nearest_neighbors(std::span<const double> query,
                                   std::span<const double> points,
                                   std::size_t n, std::size_t dim, int l,
                                   std::span<const int> exclude) {
  std::vector<bool> excluded(n, false);
  for (int e : exclude)
    if (e >= 0 && static_cast<std::size_t>(e) < n) excluded[e] = true;

  std::vector<std::pair<double, int>> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (excluded[i]) continue;
    order.emplace_back(kernels::sq_l2(query, point(points, dim, i)),
                       static_cast<int>(i));
  }
  if (static_cast<int>(order.size()) < l)
    throw std::invalid_argument("nearest_neighbors: asked for " +
                                std::to_string(l) + " of " +
                                std::to_string(order.size()) + " points");
  std::sort(order.begin(), order.end());
  std::vector<int> out(l);
  for (int i = 0; i < l; ++i) out[i] = order[i].second;
  return out;
}

}  // namespace gbdtwm
