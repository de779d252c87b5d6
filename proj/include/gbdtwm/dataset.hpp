#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gbdtwm {

// Row-major feature matrix plus dense labels in [0, class_count).
// Immutable after construction; all operations below are pure.
struct Dataset {
  std::vector<double> features;            // size() * num_features
  std::vector<int> labels;                 // size()
  int num_features = 0;
  int class_count = 0;
  std::vector<std::string> feature_names;  // empty when the file had no header
  std::vector<std::string> class_names;    // original label tokens, index = class id

  std::size_t size() const { return labels.size(); }

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features,
            static_cast<std::size_t>(num_features)};
  }

  // Throws if any invariant is broken (labels in range, finite features,
  // nonempty, consistent shapes).
  void validate() const;
};

struct CsvOptions {
  bool has_header = true;
  // Empty string means the last column. Otherwise a column name (requires a
  // header) or a 0-based column index given in decimal.
  std::string label_column;
  // -1 infers the class count from the data; a declared count lets subsets
  // keep the full label space and makes out-of-range labels an error.
  int class_count = -1;
};

// Labels are densely remapped to 0..K-1 in first-occurrence order, whether
// they arrive as integers or as category strings; the original tokens are
// recorded in class_names.
Dataset load_csv(const std::string& path, const CsvOptions& opts = {});

// ceil(fraction * n) computed with a small epsilon so that products that are
// mathematically integral do not round up from float noise (0.8 * 10 must
// give 8, not 9).
std::size_t ceil_fraction(double fraction, std::size_t n);

// Seeded shuffle, then the first ceil(fraction*N) rows become side A.
// Row order within each side is the shuffled order.
std::pair<Dataset, Dataset> split(const Dataset& data, double fraction,
                                  std::uint64_t seed);

// Rows of a followed by rows of b. Both sides must agree on feature width
// and class count; names are taken from a.
Dataset concat(const Dataset& a, const Dataset& b);

struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population stddev; 0 for constant features
};

StandardizationStats standardize_fit(const Dataset& data);

// (x - mean) / stddev per feature; stddev-0 features come back as x - mean.
std::vector<double> standardize_apply(const StandardizationStats& stats,
                                      std::span<const double> x);

// Applies the stats to every row; returns an N x d row-major matrix.
std::vector<double> standardize_all(const StandardizationStats& stats,
                                    const Dataset& data);

}  // namespace gbdtwm
