#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gbdtwm/dataset.hpp"

namespace gbdtwm {

struct TrainConfig {
  int iterations = 200;
  double shrinkage = 0.1;
  int max_leaves = 20;
  double feature_sampling = 0.1;
  double lambda = 1.0;
  double min_child_hessian = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

// Flat node storage, preorder, nodes[0] is the root. feature < 0 marks a
// leaf. Leaf values carry the shrinkage factor already.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double value = 0.0;
  double gain = 0.0;  // split gain recorded when the node was split
  int left = -1;
  int right = -1;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  int iteration = 0;
  int klass = 0;
  std::vector<int> feature_subset;  // ascending; all splits draw from it
  std::vector<TreeNode> nodes;

  double eval(std::span<const double> x) const;
  int leaf_count() const;
  int subtree_leaf_count(int node) const;
};

struct Ensemble {
  TrainConfig config;
  int num_features = 0;
  int class_count = 0;
  std::vector<double> base_score;  // per class, zero by default
  std::vector<Tree> trees;         // dense, index = iteration * class_count + k
  // label tokens of the training data, index = class id; lets tools remap
  // labels of other files onto this model's classes
  std::vector<std::string> class_names;

  std::vector<double> predict_raw(std::span<const double> x) const;
  std::vector<double> predict_proba(std::span<const double> x) const;
  int predict_label(std::span<const double> x) const;
};

// argmax with lowest-index tie-break, shared by every label decision.
int argmax_label(std::span<const double> scores);

// Numerically stable softmax (max subtraction).
std::vector<double> softmax(std::span<const double> scores);

struct GradHessTable {
  std::size_t rows = 0;
  int cols = 0;
  std::vector<double> g;  // rows x cols, row-major
  std::vector<double> h;
  std::vector<double> p;
};

// g[i][k] = p[i][k] - 1(y_i = k), h = p(1-p), p = softmax(raw row).
GradHessTable grad_hess(std::span<const int> labels,
                        std::span<const double> raw_scores, int class_count);

// -sum_i log p_{i, y_i}, with the log argument clamped to 1e-15.
double nll_loss(std::span<const int> labels, std::span<const double> raw_scores,
                int class_count);

struct SplitSpec {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Exact greedy search over midpoints of adjacent distinct values of the
// features in feature_subset. Gain is the second-order formula
// 0.5 * (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)). Candidates whose child
// hessian falls below min_child_hessian are skipped. Ties break toward the
// lower feature index, then the lower threshold. Returns nullopt when no
// candidate has positive gain.
std::optional<SplitSpec> best_split(const Dataset& data,
                                    std::span<const int> sample_ids,
                                    std::span<const double> g,
                                    std::span<const double> h,
                                    std::span<const int> feature_subset,
                                    double lambda, double min_child_hessian);

// Leaf-wise best-first growth: repeatedly split the frontier leaf with the
// highest gain until max_leaves is reached or no positive-gain split exists.
// g and h are indexed by sample id. Leaf value = -shrinkage * G / (H+lambda).
Tree grow_tree(const Dataset& data, std::span<const double> g,
               std::span<const double> h, std::span<const int> sample_ids,
               std::vector<int> feature_subset, const TrainConfig& config,
               int max_leaves);

// The per-tree feature subset, ceil(fraction * d) indices drawn without
// replacement from a stream keyed by (seed, iteration, class) so that later
// passes over the model can replay it.
std::vector<int> feature_subset_for(std::uint64_t seed, int iteration,
                                    int klass, int num_features,
                                    double fraction);

Ensemble train(const Dataset& data, const TrainConfig& config);

// Raw scores for every row of a dataset, N x K row-major.
std::vector<double> predict_raw_all(const Ensemble& model, const Dataset& data);

}  // namespace gbdtwm
