#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gbdtwm/dataset.hpp"
#include "gbdtwm/rng.hpp"

namespace testutil {

// Blobs on a line: every feature of class c is uniform in
// 3c ± spread, so any single feature separates the classes.
inline gbdtwm::Dataset line_blobs(int per_class, int classes, int dim,
                                  std::uint64_t seed, double spread = 0.3) {
  gbdtwm::Dataset d;
  d.num_features = dim;
  d.class_count = classes;
  gbdtwm::rng::SplitMix64 gen(seed);
  for (int c = 0; c < classes; ++c) {
    d.class_names.push_back(std::to_string(c));
    for (int i = 0; i < per_class; ++i) {
      for (int f = 0; f < dim; ++f)
        d.features.push_back(3.0 * c + spread * (2.0 * gen.next_double() - 1.0));
      d.labels.push_back(c);
    }
  }
  return d;
}

// Blobs around centers drawn uniformly from [-4, 4]^dim: separable in the
// aggregate but not along any single axis.
inline gbdtwm::Dataset scatter_blobs(int per_class, int classes, int dim,
                                     std::uint64_t seed, double spread = 0.4) {
  gbdtwm::Dataset d;
  d.num_features = dim;
  d.class_count = classes;
  gbdtwm::rng::SplitMix64 gen(seed);
  std::vector<double> centers;
  for (int c = 0; c < classes * dim; ++c)
    centers.push_back(8.0 * gen.next_double() - 4.0);
  for (int c = 0; c < classes; ++c) {
    d.class_names.push_back(std::to_string(c));
    for (int i = 0; i < per_class; ++i) {
      for (int f = 0; f < dim; ++f)
        d.features.push_back(centers[c * dim + f] +
                             spread * (2.0 * gen.next_double() - 1.0));
      d.labels.push_back(c);
    }
  }
  return d;
}

inline gbdtwm::Dataset from_rows(const std::vector<std::vector<double>>& rows,
                                 const std::vector<int>& labels,
                                 int class_count = -1) {
  gbdtwm::Dataset d;
  d.num_features = static_cast<int>(rows.at(0).size());
  for (const auto& r : rows)
    d.features.insert(d.features.end(), r.begin(), r.end());
  d.labels = labels;
  int k = 0;
  for (int y : labels) k = std::max(k, y + 1);
  d.class_count = class_count > 0 ? class_count : k;
  for (int c = 0; c < d.class_count; ++c)
    d.class_names.push_back(std::to_string(c));
  return d;
}

// Uniform random points in [-1, 1]^dim as a flat row-major matrix.
inline std::vector<double> random_points(std::size_t n, std::size_t dim,
                                         std::uint64_t seed) {
  gbdtwm::rng::SplitMix64 gen(seed);
  std::vector<double> pts(n * dim);
  for (double& v : pts) v = 2.0 * gen.next_double() - 1.0;
  return pts;
}

}  // namespace testutil
