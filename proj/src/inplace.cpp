#include "gbdtwm/inplace.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gbdtwm/kernels.hpp"

namespace gbdtwm {

namespace {

// The active sample set for one update pass: context rows first, fine rows
// after, so ids at or past fine_start are fine rows.
struct ActiveSet {
  Dataset data;
  int fine_start = 0;
};

ActiveSet build_active(const Ensemble& model, const UpdateContext& ctx) {
  const Dataset* context = ctx.context_data;
  const Dataset* fine = ctx.fine_data;
  const bool has_context =
      ctx.mode == UpdateContext::Mode::union_data && context && context->size() > 0;
  const bool has_fine = fine && fine->size() > 0;

  if (ctx.mode == UpdateContext::Mode::fine_only && !has_fine)
    throw std::invalid_argument("inplace_update: fine_only mode with empty fine data");
  if (!has_context && !has_fine)
    throw std::invalid_argument("inplace_update: no active samples");

  ActiveSet active;
  active.data.num_features = model.num_features;
  active.data.class_count = model.class_count;
  auto append = [&](const Dataset& part, const char* what) {
    if (part.num_features != model.num_features)
      throw std::invalid_argument(std::string("inplace_update: ") + what +
                                  " feature dimension mismatch");
    for (int y : part.labels)
      if (y < 0 || y >= model.class_count)
        throw std::invalid_argument(std::string("inplace_update: ") + what +
                                    " label out of range");
    active.data.features.insert(active.data.features.end(),
                                part.features.begin(), part.features.end());
    active.data.labels.insert(active.data.labels.end(), part.labels.begin(),
                              part.labels.end());
  };
  if (has_context) append(*context, "context");
  active.fine_start = static_cast<int>(active.data.size());
  if (has_fine) append(*fine, "fine");
  return active;
}

// Partitions ids by the node's split, preserving order. Order stability
// matters: leaf refits must see samples in the same order training did, so
// the accumulated values replay bit for bit.
void partition_ids(const Dataset& data, const TreeNode& nd,
                   const std::vector<int>& ids, std::vector<int>& left,
                   std::vector<int>& right) {
  left.clear();
  right.clear();
  for (int id : ids) {
    if (data.features[id * data.num_features + nd.feature] <= nd.threshold)
      left.push_back(id);
    else
      right.push_back(id);
  }
}

// Replaces the subtree rooted at `at` with `repl`: the replacement root
// lands in the same slot, the rest is appended. Orphaned nodes stay behind
// until compaction.
void graft(Tree& tree, int at, const Tree& repl) {
  const int base = static_cast<int>(tree.nodes.size());
  auto remap = [&](int child) { return child == 0 ? at : base + child - 1; };
  for (std::size_t j = 0; j < repl.nodes.size(); ++j) {
    TreeNode nd = repl.nodes[j];
    if (!nd.is_leaf()) {
      nd.left = remap(nd.left);
      nd.right = remap(nd.right);
    }
    if (j == 0)
      tree.nodes[at] = nd;
    else
      tree.nodes.push_back(nd);
  }
}

int compact_rec(const std::vector<TreeNode>& nodes, int at,
                std::vector<TreeNode>& out) {
  const int idx = static_cast<int>(out.size());
  out.push_back(nodes[at]);
  if (!nodes[at].is_leaf()) {
    const int l = compact_rec(nodes, nodes[at].left, out);
    const int r = compact_rec(nodes, nodes[at].right, out);
    out[idx].left = l;
    out[idx].right = r;
  }
  return idx;
}

// Drops orphaned nodes and restores preorder layout.
void compact(Tree& tree) {
  std::vector<TreeNode> out;
  out.reserve(tree.nodes.size());
  compact_rec(tree.nodes, 0, out);
  tree.nodes = std::move(out);
}

bool split_differs(const TreeNode& stored, const SplitSpec& best) {
  return best.feature != stored.feature ||
         std::abs(best.threshold - stored.threshold) > 1e-12;
}

struct TreePassState {
  const Dataset* active;
  int fine_start;
  std::span<const double> g;
  std::span<const double> h;
  const TrainConfig* config;
  Tree* tree;
  TreeUpdateStats* stats;
};

void recheck_rec(TreePassState& st, int at, const std::vector<int>& ids) {
  Tree& tree = *st.tree;
  if (tree.nodes[at].is_leaf()) return;
  ++st.stats->nodes_rechecked;

  // No routed data means no evidence to change anything below this node.
  if (ids.empty()) {
    std::vector<int> none;
    recheck_rec(st, tree.nodes[at].left, none);
    recheck_rec(st, tree.nodes[at].right, none);
    return;
  }

  const auto best = best_split(*st.active, ids, st.g, st.h, tree.feature_subset,
                               st.config->lambda, st.config->min_child_hessian);
  if (!best || split_differs(tree.nodes[at], *best)) {
    const int budget = tree.subtree_leaf_count(at);
    Tree repl = grow_tree(*st.active, st.g, st.h, ids, tree.feature_subset,
                          *st.config, budget);
    graft(tree, at, repl);
    ++st.stats->subtrees_retrained;
    // The regrown subtree's splits are best splits of the current data by
    // construction; rechecking them would find nothing to do.
    return;
  }

  std::vector<int> left, right;
  partition_ids(*st.active, tree.nodes[at], ids, left, right);
  recheck_rec(st, tree.nodes[at].left, left);
  recheck_rec(st, tree.nodes[at].right, right);
}

void refit_rec(TreePassState& st, int at, const std::vector<int>& ids) {
  // Only leaves the fine data reaches get new values; a leaf seen solely by
  // context rows keeps what it has. ids stay ascending through the stable
  // partitions, so the largest id tells whether any fine row is routed here.
  if (ids.empty() || ids.back() < st.fine_start) return;
  Tree& tree = *st.tree;
  TreeNode& nd = tree.nodes[at];
  if (nd.is_leaf()) {
    const kernels::GHSum s = kernels::sum_gh(st.g, st.h, ids);
    const double denom = s.h + st.config->lambda;
    nd.value = denom > 0.0 ? -st.config->shrinkage * s.g / denom : 0.0;
    ++st.stats->leaves_refit;
    return;
  }
  std::vector<int> left, right;
  partition_ids(*st.active, nd, ids, left, right);
  refit_rec(st, nd.left, left);
  refit_rec(st, nd.right, right);
}

}  // namespace

int UpdateReport::total_rechecked() const {
  int t = 0;
  for (const auto& s : per_tree) t += s.nodes_rechecked;
  return t;
}

int UpdateReport::total_retrained() const {
  int t = 0;
  for (const auto& s : per_tree) t += s.subtrees_retrained;
  return t;
}

int UpdateReport::total_leaves_refit() const {
  int t = 0;
  for (const auto& s : per_tree) t += s.leaves_refit;
  return t;
}

std::pair<Ensemble, UpdateReport> inplace_update(const Ensemble& model,
                                                 const UpdateContext& ctx) {
  const ActiveSet set = build_active(model, ctx);
  const Dataset& active = set.data;
  const std::size_t n = active.size();
  const int k_classes = model.class_count;

  Ensemble out = model;
  UpdateReport report;
  report.per_tree.reserve(out.trees.size());

  // Scores replay training's accumulation: they start at the base score and
  // gain each tree's (updated) output right after that tree is processed, so
  // tree (m, k) sees exactly the prediction state it was originally grown
  // against whenever the data is unchanged.
  std::vector<double> scores(n * k_classes);
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < k_classes; ++k)
      scores[i * k_classes + k] = model.base_score[k];

  std::vector<int> all_ids(n);
  std::iota(all_ids.begin(), all_ids.end(), 0);
  std::vector<double> gk(n), hk(n);

  for (Tree& tree : out.trees) {
    const GradHessTable table = grad_hess(active.labels, scores, k_classes);
    const int k = tree.klass;
    for (std::size_t i = 0; i < n; ++i) {
      gk[i] = table.g[i * k_classes + k];
      hk[i] = table.h[i * k_classes + k];
    }

    TreeUpdateStats stats;
    stats.iteration = tree.iteration;
    stats.klass = tree.klass;
    TreePassState st{&active, set.fine_start, gk, hk, &model.config, &tree,
                     &stats};

    recheck_rec(st, 0, all_ids);
    compact(tree);
    refit_rec(st, 0, all_ids);
    report.per_tree.push_back(stats);

    for (std::size_t i = 0; i < n; ++i)
      scores[i * k_classes + k] += tree.eval(active.row(i));
  }
  return {std::move(out), std::move(report)};
}

Ensemble finetune(const Ensemble& model, const Dataset& fine_data,
                  const Dataset& context_data) {
  UpdateContext ctx;
  ctx.context_data = &context_data;
  ctx.fine_data = &fine_data;
  ctx.mode = UpdateContext::Mode::union_data;
  return inplace_update(model, ctx).first;
}

}  // namespace gbdtwm
