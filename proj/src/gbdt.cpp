#include "gbdtwm/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gbdtwm/kernels.hpp"
#include "gbdtwm/rng.hpp"

namespace gbdtwm {

void TrainConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("TrainConfig: iterations < 1");
  if (max_leaves < 2) throw std::invalid_argument("TrainConfig: max_leaves < 2");
  if (!(shrinkage > 0.0)) throw std::invalid_argument("TrainConfig: shrinkage <= 0");
  if (!(feature_sampling > 0.0) || feature_sampling > 1.0)
    throw std::invalid_argument("TrainConfig: feature_sampling outside (0,1]");
  if (lambda < 0.0) throw std::invalid_argument("TrainConfig: lambda < 0");
  if (min_child_hessian < 0.0)
    throw std::invalid_argument("TrainConfig: min_child_hessian < 0");
}

double Tree::eval(std::span<const double> x) const {
  int ni = 0;
  while (!nodes[ni].is_leaf()) {
    const TreeNode& nd = nodes[ni];
    ni = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[ni].value;
}

int Tree::leaf_count() const { return subtree_leaf_count(0); }

int Tree::subtree_leaf_count(int node) const {
  const TreeNode& nd = nodes[node];
  if (nd.is_leaf()) return 1;
  return subtree_leaf_count(nd.left) + subtree_leaf_count(nd.right);
}

int argmax_label(std::span<const double> scores) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(scores.size()); ++c)
    if (scores[c] > scores[best]) best = c;
  return best;
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.size());
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double total = 0.0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    p[c] = std::exp(scores[c] - mx);
    total += p[c];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> Ensemble::predict_raw(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != num_features)
    throw std::invalid_argument("predict_raw: expected " +
                                std::to_string(num_features) + " features, got " +
                                std::to_string(x.size()));
  std::vector<double> out(base_score);
  for (const Tree& t : trees) out[t.klass] += t.eval(x);
  return out;
}

std::vector<double> Ensemble::predict_proba(std::span<const double> x) const {
  return softmax(predict_raw(x));
}

int Ensemble::predict_label(std::span<const double> x) const {
  const auto raw = predict_raw(x);
  return argmax_label(raw);
}

GradHessTable grad_hess(std::span<const int> labels,
                        std::span<const double> raw_scores, int class_count) {
  const std::size_t n = labels.size();
  GradHessTable t;
  t.rows = n;
  t.cols = class_count;
  t.g.resize(n * class_count);
  t.h.resize(n * class_count);
  t.p.resize(n * class_count);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= class_count)
      throw std::invalid_argument("grad_hess: label out of range");
    const auto p = softmax(raw_scores.subspan(i * class_count, class_count));
    for (int k = 0; k < class_count; ++k) {
      const std::size_t at = i * class_count + k;
      t.p[at] = p[k];
      t.g[at] = p[k] - (labels[i] == k ? 1.0 : 0.0);
      t.h[at] = p[k] * (1.0 - p[k]);
    }
  }
  return t;
}

double nll_loss(std::span<const int> labels, std::span<const double> raw_scores,
                int class_count) {
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto p = softmax(raw_scores.subspan(i * class_count, class_count));
    loss -= std::log(std::max(p[labels[i]], 1e-15));
  }
  return loss;
}

std::optional<SplitSpec> best_split(const Dataset& data,
                                    std::span<const int> sample_ids,
                                    std::span<const double> g,
                                    std::span<const double> h,
                                    std::span<const int> feature_subset,
                                    double lambda, double min_child_hessian) {
  const std::size_t n = sample_ids.size();
  if (n < 2) return std::nullopt;

  const kernels::GHSum total = kernels::sum_gh(g, h, sample_ids);
  const double parent_denom = total.h + lambda;
  const double parent_term =
      parent_denom > 0.0 ? total.g * total.g / parent_denom : 0.0;

  std::optional<SplitSpec> best;
  std::vector<std::pair<double, int>> order(n);

  for (int f : feature_subset) {
    for (std::size_t i = 0; i < n; ++i) {
      const int id = sample_ids[i];
      order[i] = {data.features[id * data.num_features + f], id};
    }
    std::sort(order.begin(), order.end());

    double gl = 0.0, hl = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      gl += g[order[i].second];
      hl += h[order[i].second];
      const double v = order[i].first;
      const double w = order[i + 1].first;
      if (v == w) continue;
      const double hr = total.h - hl;
      if (hl < min_child_hessian || hr < min_child_hessian) continue;
      if (!(hl + lambda > 0.0) || !(hr + lambda > 0.0)) continue;
      const double gr = total.g - gl;
      const double gain =
          0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_term);
      if (gain > 0.0 && (!best || gain > best->gain)) {
        double thr = 0.5 * (v + w);
        // Adjacent representables can round the midpoint up to w, which
        // would route both values left; fall back to the left value.
        if (!(thr < w)) thr = v;
        best = SplitSpec{f, thr, gain};
      }
    }
  }
  return best;
}

namespace {

struct BuildNode {
  int feature = -1;
  double threshold = 0.0;
  double value = 0.0;
  double gain = 0.0;
  int left = -1;
  int right = -1;
  std::vector<int> samples;
  std::optional<SplitSpec> best;
};

double leaf_value(std::span<const double> g, std::span<const double> h,
                  std::span<const int> ids, double shrinkage, double lambda) {
  const kernels::GHSum s = kernels::sum_gh(g, h, ids);
  const double denom = s.h + lambda;
  if (!(denom > 0.0)) return 0.0;
  return -shrinkage * s.g / denom;
}

// Preorder emission keeps node layout deterministic and parents before
// children, which routing and serialization both rely on.
int emit_preorder(const std::vector<BuildNode>& built, int at, Tree& out) {
  const int idx = static_cast<int>(out.nodes.size());
  out.nodes.emplace_back();
  out.nodes[idx].feature = built[at].feature;
  out.nodes[idx].threshold = built[at].threshold;
  out.nodes[idx].value = built[at].value;
  out.nodes[idx].gain = built[at].gain;
  if (built[at].feature >= 0) {
    const int l = emit_preorder(built, built[at].left, out);
    const int r = emit_preorder(built, built[at].right, out);
    out.nodes[idx].left = l;
    out.nodes[idx].right = r;
  }
  return idx;
}

}  // namespace

Tree grow_tree(const Dataset& data, std::span<const double> g,
               std::span<const double> h, std::span<const int> sample_ids,
               std::vector<int> feature_subset, const TrainConfig& config,
               int max_leaves) {
  std::vector<BuildNode> built;
  built.emplace_back();
  built[0].samples.assign(sample_ids.begin(), sample_ids.end());
  built[0].best = best_split(data, built[0].samples, g, h, feature_subset,
                             config.lambda, config.min_child_hessian);

  std::vector<int> frontier{0};
  int leaves = 1;
  while (leaves < max_leaves) {
    int pick = -1;
    for (int ni : frontier) {
      if (!built[ni].best) continue;
      if (pick < 0 || built[ni].best->gain > built[pick].best->gain) pick = ni;
    }
    if (pick < 0) break;

    BuildNode& nd = built[pick];
    const SplitSpec spec = *nd.best;
    std::vector<int> left_ids, right_ids;
    for (int id : nd.samples) {
      if (data.features[id * data.num_features + spec.feature] <= spec.threshold)
        left_ids.push_back(id);
      else
        right_ids.push_back(id);
    }

    const int li = static_cast<int>(built.size());
    built.emplace_back();
    const int ri = static_cast<int>(built.size());
    built.emplace_back();
    BuildNode& parent = built[pick];
    parent.feature = spec.feature;
    parent.threshold = spec.threshold;
    parent.gain = spec.gain;
    parent.left = li;
    parent.right = ri;
    built[li].samples = std::move(left_ids);
    built[ri].samples = std::move(right_ids);
    built[li].best = best_split(data, built[li].samples, g, h, feature_subset,
                                config.lambda, config.min_child_hessian);
    built[ri].best = best_split(data, built[ri].samples, g, h, feature_subset,
                                config.lambda, config.min_child_hessian);
    parent.samples.clear();
    parent.samples.shrink_to_fit();
    parent.best.reset();

    frontier.erase(std::find(frontier.begin(), frontier.end(), pick));
    frontier.push_back(li);
    frontier.push_back(ri);
    ++leaves;
  }

  for (BuildNode& nd : built)
    if (nd.feature < 0)
      nd.value = leaf_value(g, h, nd.samples, config.shrinkage, config.lambda);

  Tree tree;
  tree.feature_subset = std::move(feature_subset);
  tree.nodes.reserve(built.size());
  emit_preorder(built, 0, tree);
  return tree;
}

std::vector<int> feature_subset_for(std::uint64_t seed, int iteration, int klass,
                                    int num_features, double fraction) {
  std::size_t want = ceil_fraction(fraction, num_features);
  want = std::min<std::size_t>(std::max<std::size_t>(want, 1), num_features);
  rng::SplitMix64 gen(rng::derive(seed, iteration, klass));
  auto subset = rng::sample_without_replacement(num_features,
                                                static_cast<int>(want), gen);
  std::sort(subset.begin(), subset.end());
  return subset;
}

Ensemble train(const Dataset& data, const TrainConfig& config) {
  config.validate();
  data.validate();
  const std::size_t n = data.size();
  const int k_classes = data.class_count;

  Ensemble model;
  model.config = config;
  model.num_features = data.num_features;
  model.class_count = k_classes;
  model.class_names = data.class_names;
  model.base_score.assign(k_classes, 0.0);
  model.trees.reserve(static_cast<std::size_t>(config.iterations) * k_classes);

  std::vector<double> scores(n * k_classes, 0.0);
  std::vector<int> all_ids(n);
  std::iota(all_ids.begin(), all_ids.end(), 0);
  std::vector<double> gk(n), hk(n);

  for (int m = 0; m < config.iterations; ++m) {
    for (int k = 0; k < k_classes; ++k) {
      const GradHessTable table = grad_hess(data.labels, scores, k_classes);
      for (std::size_t i = 0; i < n; ++i) {
        gk[i] = table.g[i * k_classes + k];
        hk[i] = table.h[i * k_classes + k];
      }
      Tree tree = grow_tree(data, gk, hk, all_ids,
                            feature_subset_for(config.seed, m, k,
                                               data.num_features,
                                               config.feature_sampling),
                            config, config.max_leaves);
      tree.iteration = m;
      tree.klass = k;
      for (std::size_t i = 0; i < n; ++i)
        scores[i * k_classes + k] += tree.eval(data.row(i));
      model.trees.push_back(std::move(tree));
    }
  }
  return model;
}

std::vector<double> predict_raw_all(const Ensemble& model, const Dataset& data) {
  const std::size_t n = data.size();
  std::vector<double> scores(n * model.class_count);
  for (std::size_t i = 0; i < n; ++i) {
    const auto raw = model.predict_raw(data.row(i));
    std::copy(raw.begin(), raw.end(), scores.begin() + i * model.class_count);
  }
  return scores;
}

}  // namespace gbdtwm
