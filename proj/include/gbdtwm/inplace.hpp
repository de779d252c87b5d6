#pragma once

#include <utility>
#include <vector>

#include "gbdtwm/dataset.hpp"
#include "gbdtwm/gbdt.hpp"

namespace gbdtwm {

// Inputs to one fine-tuning pass. In union mode the gradient statistics are
// computed over context rows (true labels) plus fine rows (assigned labels);
// fine_only drops the context and uses the fine rows alone.
struct UpdateContext {
  enum class Mode { union_data, fine_only };

  const Dataset* context_data = nullptr;  // may be null or empty
  const Dataset* fine_data = nullptr;     // may be null or empty in union mode
  Mode mode = Mode::union_data;
};

struct TreeUpdateStats {
  int iteration = 0;
  int klass = 0;
  int nodes_rechecked = 0;
  int subtrees_retrained = 0;
  int leaves_refit = 0;
};

struct UpdateReport {
  std::vector<TreeUpdateStats> per_tree;

  int total_rechecked() const;
  int total_retrained() const;
  int total_leaves_refit() const;
};

// One full pass over the trees in training order (m, then k). For each tree:
// gradients and hessians are recomputed from the running scores of the trees
// updated so far, replaying the accumulation order training used; internal
// nodes are rechecked depth-first top-down against best_split restricted to
// the tree's recorded feature subset; a node whose best split moved (other
// feature, or threshold shifted by more than 1e-12, or no split left) has
// its subtree regrown with a leaf budget equal to the subtree it replaces;
// every leaf reached by at least one fine row gets its value refit from all
// samples routed to it. Leaves only context rows reach, and nodes no sample
// reaches, keep their values, so the pass touches exactly the regions the
// fine data occupies. Tree count, (iteration, class) layout, and feature
// subsets never change.
std::pair<Ensemble, UpdateReport> inplace_update(const Ensemble& model,
                                                 const UpdateContext& ctx);

// Union-mode convenience wrapper used for both watermark embedding and
// attack fine-tuning.
Ensemble finetune(const Ensemble& model, const Dataset& fine_data,
                  const Dataset& context_data);

}  // namespace gbdtwm
