#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gbdtwm/dataset.hpp"
#include "gbdtwm/gbdt.hpp"
#include "gbdtwm/inplace.hpp"

namespace gbdtwm {

enum class Strategy { wrong, outlier, cluster, confidence, random };
enum class Selection { conf, dist };
enum class Scenario { cand_eq_train, cand_separate };

std::string to_string(Strategy s);
std::string to_string(Selection s);
std::string to_string(Scenario s);
Strategy strategy_from_string(const std::string& s);
Selection selection_from_string(const std::string& s);
Scenario scenario_from_string(const std::string& s);

struct Candidate {
  enum class Role { plain, center, neighbor };

  int index = -1;                // row in the candidate dataset
  std::vector<double> x;         // raw features
  std::vector<double> raw;       // initial model's raw scores for x
  int y_true = -1;
  int y_pred = -1;
  double conf_pred = 0.0;        // raw[y_pred]
  double conf_true = 0.0;        // raw[y_true]
  Role role = Role::plain;
};

struct CandidateSet {
  Strategy strategy = Strategy::random;
  std::vector<Candidate> candidates;
  bool shortfall = false;
  // center candidate's dataset index -> its l neighbor indices (cluster only)
  std::map<int, std::vector<int>> neighbor_map;
  // candidate coordinates standardized with stats fit on the full candidate
  // dataset; used by distance-based selection
  std::vector<double> std_points;  // |candidates| x d
};

struct WatermarkEntry {
  Candidate cand;
  int bit = 1;
  int y_wm = -1;
};

struct WatermarkSet {
  Strategy strategy = Strategy::random;
  Selection selection = Selection::conf;
  std::uint64_t seed = 0;
  std::vector<WatermarkEntry> entries;
};

// Most confident incorrect class: argmax of raw over c with c != y_true and
// c != y_pred, lowest index on ties. Errors when no class is eligible.
int wm_label(std::span<const double> raw_scores, int y_true, int y_pred);

// The n misclassified samples with the lowest predicted-class score. Fewer
// than n misclassified rows is not an error; the set comes back short with
// the shortfall flag raised.
CandidateSet candidates_wrong(const Ensemble& model, const Dataset& cand, int n);

// Correctly predicted samples ranked by distance to their nearest centroid
// (descending), after clustering with the silhouette-selected cluster count.
CandidateSet candidates_outlier(const Ensemble& model, const Dataset& cand,
                                int n, std::uint64_t seed);

// k-means with exactly n clusters over correctly predicted samples; each
// cluster nominates its member nearest the centroid, and each nominee gets
// l nearest neighbors (candidates excluded) recorded for anchoring.
CandidateSet candidates_cluster_center(const Ensemble& model, const Dataset& cand,
                                       int n, int l, std::uint64_t seed);

// The n correctly predicted samples with the lowest true-class score.
CandidateSet candidates_confidence(const Ensemble& model, const Dataset& cand,
                                   int n);

// Uniform sample without replacement, order as drawn.
CandidateSet candidates_random(const Ensemble& model, const Dataset& cand,
                               int n, std::uint64_t seed);

// Bottom-k by predicted-class confidence. Every selected entry gets bit 1
// and its watermark label.
WatermarkSet select_lowest_confidence(const CandidateSet& cands, int k);

// Greedy farthest-point (max-min dispersion) over standardized coordinates,
// seeded random start, ties toward the lower candidate position.
WatermarkSet select_max_distance(const CandidateSet& cands, int k,
                                 std::uint64_t seed);

struct EmbeddingPlan {
  Dataset fine;  // assigned labels: y_wm for watermark rows, y_true for neighbors
  Scenario scenario = Scenario::cand_eq_train;
  int dup_factor = 1;
  std::size_t watermark_rows = 0;
  std::size_t neighbor_rows = 0;
};

// Bit-1 entries contribute (x, y_wm); bit-0 entries contribute nothing.
// cand_eq_train duplicates every watermark row dup_factor times; cluster
// centers get one extra copy on top. Each selected center's neighbors join
// once with their true labels; their labels agree with the training data,
// so they need no duplication to dominate anything.
EmbeddingPlan build_embedding_plan(const WatermarkSet& wset, Scenario scenario,
                                   int dup_factor,
                                   const std::map<int, std::vector<int>>& neighbor_map,
                                   const Dataset& cand_data, int class_count);

// Fine-tunes the model on the plan's rows with the context dataset in the
// gradient statistics; an empty plan is a no-op pass.
Ensemble embed(const Ensemble& model, const EmbeddingPlan& plan,
               const Dataset& context);

}  // namespace gbdtwm
