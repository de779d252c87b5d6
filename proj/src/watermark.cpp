#include "gbdtwm/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gbdtwm/clustering.hpp"
#include "gbdtwm/kernels.hpp"
#include "gbdtwm/rng.hpp"

namespace gbdtwm {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::wrong: return "wrong";
    case Strategy::outlier: return "outlier";
    case Strategy::cluster: return "cluster";
    case Strategy::confidence: return "confidence";
    case Strategy::random: return "random";
  }
  return "?";
}

std::string to_string(Selection s) {
  return s == Selection::conf ? "conf" : "dist";
}

std::string to_string(Scenario s) {
  return s == Scenario::cand_eq_train ? "cand_eq_train" : "separate";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "wrong") return Strategy::wrong;
  if (s == "outlier") return Strategy::outlier;
  if (s == "cluster") return Strategy::cluster;
  if (s == "confidence") return Strategy::confidence;
  if (s == "random") return Strategy::random;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

Selection selection_from_string(const std::string& s) {
  if (s == "conf") return Selection::conf;
  if (s == "dist") return Selection::dist;
  throw std::invalid_argument("unknown selection '" + s + "'");
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "cand_eq_train") return Scenario::cand_eq_train;
  if (s == "separate" || s == "cand_separate") return Scenario::cand_separate;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}

int wm_label(std::span<const double> raw_scores, int y_true, int y_pred) {
  int best = -1;
  for (int c = 0; c < static_cast<int>(raw_scores.size()); ++c) {
    if (c == y_true || c == y_pred) continue;
    if (best < 0 || raw_scores[c] > raw_scores[best]) best = c;
  }
  if (best < 0)
    throw std::invalid_argument(
        "wm_label: no class other than the true label and the prediction");
  return best;
}

namespace {

Candidate make_candidate(const Ensemble& model, const Dataset& cand, int i) {
  Candidate c;
  c.index = i;
  const auto row = cand.row(i);
  c.x.assign(row.begin(), row.end());
  c.raw = model.predict_raw(row);
  c.y_true = cand.labels[i];
  c.y_pred = argmax_label(c.raw);
  c.conf_pred = c.raw[c.y_pred];
  c.conf_true = c.raw[c.y_true];
  return c;
}

// Fills std_points from stats fit on the whole candidate dataset, so both
// selection strategies measure distances on a common scale.
void attach_std_points(CandidateSet& set, const Dataset& cand) {
  const StandardizationStats stats = standardize_fit(cand);
  set.std_points.clear();
  set.std_points.reserve(set.candidates.size() * cand.num_features);
  for (const Candidate& c : set.candidates) {
    const auto z = standardize_apply(stats, c.x);
    set.std_points.insert(set.std_points.end(), z.begin(), z.end());
  }
}

std::vector<int> correct_indices(const Ensemble& model, const Dataset& cand,
                                 std::vector<Candidate>& cache) {
  std::vector<int> correct;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    Candidate c = make_candidate(model, cand, static_cast<int>(i));
    if (c.y_pred == c.y_true) {
      correct.push_back(static_cast<int>(i));
      cache.push_back(std::move(c));
    }
  }
  return correct;
}

}  // namespace

CandidateSet candidates_wrong(const Ensemble& model, const Dataset& cand, int n) {
  if (n < 1) throw std::invalid_argument("candidates_wrong: n < 1");
  CandidateSet set;
  set.strategy = Strategy::wrong;
  std::vector<Candidate> wrong;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    Candidate c = make_candidate(model, cand, static_cast<int>(i));
    if (c.y_pred != c.y_true) wrong.push_back(std::move(c));
  }
  std::sort(wrong.begin(), wrong.end(), [](const Candidate& a, const Candidate& b) {
    return a.conf_pred != b.conf_pred ? a.conf_pred < b.conf_pred
                                      : a.index < b.index;
  });
  if (static_cast<int>(wrong.size()) > n) wrong.resize(n);
  set.shortfall = static_cast<int>(wrong.size()) < n;
  set.candidates = std::move(wrong);
  attach_std_points(set, cand);
  return set;
}

CandidateSet candidates_outlier(const Ensemble& model, const Dataset& cand,
                                int n, std::uint64_t seed) {
  CandidateSet set;
  set.strategy = Strategy::outlier;
  std::vector<Candidate> correct_cands;
  const std::vector<int> correct = correct_indices(model, cand, correct_cands);
  const std::size_t nc = correct.size();
  if (static_cast<int>(nc) < n)
    throw std::invalid_argument("candidates_outlier: only " +
                                std::to_string(nc) + " correct samples for n=" +
                                std::to_string(n));

  const StandardizationStats stats = standardize_fit(cand);
  std::vector<double> pts;
  pts.reserve(nc * cand.num_features);
  for (int idx : correct) {
    const auto z = standardize_apply(stats, cand.row(idx));
    pts.insert(pts.end(), z.begin(), z.end());
  }
  const std::size_t dim = cand.num_features;

  // Silhouette-selected cluster count; degenerate sets fall back to one
  // cluster (a plain mean) when the valid k range is empty.
  const int k_cap = std::min<int>(
      {10, static_cast<int>(std::floor(std::sqrt(static_cast<double>(nc)))),
       static_cast<int>(nc) - 1});
  ClusterModel cm;
  if (k_cap >= 2) {
    const int m = select_k(pts, nc, dim, 2, k_cap, seed);
    cm = kmeans(pts, nc, dim, m, rng::derive(seed, m));
  } else {
    cm = kmeans(pts, nc, dim, 1, rng::derive(seed, 1));
  }

  std::vector<std::pair<double, std::size_t>> ranked(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < cm.k; ++j)
      best = std::min(best, kernels::sq_l2(
                                std::span<const double>(pts).subspan(i * dim, dim),
                                cm.centroid(j)));
    ranked[i] = {best, i};
  }
  // Descending by distance; ties toward the lower dataset index.
  std::sort(ranked.begin(), ranked.end(),
            [&](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return correct[a.second] < correct[b.second];
            });
  for (int i = 0; i < n; ++i)
    set.candidates.push_back(std::move(correct_cands[ranked[i].second]));
  attach_std_points(set, cand);
  return set;
}

CandidateSet candidates_cluster_center(const Ensemble& model, const Dataset& cand,
                                       int n, int l, std::uint64_t seed) {
  if (l < 1) throw std::invalid_argument("candidates_cluster_center: l < 1");
  CandidateSet set;
  set.strategy = Strategy::cluster;
  std::vector<Candidate> correct_cands;
  const std::vector<int> correct = correct_indices(model, cand, correct_cands);
  const std::size_t nc = correct.size();
  if (static_cast<int>(nc) < n)
    throw std::invalid_argument("candidates_cluster_center: only " +
                                std::to_string(nc) +
                                " correct samples for n=" + std::to_string(n));

  const StandardizationStats stats = standardize_fit(cand);
  const std::size_t dim = cand.num_features;
  std::vector<double> correct_pts;
  correct_pts.reserve(nc * dim);
  for (int idx : correct) {
    const auto z = standardize_apply(stats, cand.row(idx));
    correct_pts.insert(correct_pts.end(), z.begin(), z.end());
  }
  const ClusterModel cm = kmeans(correct_pts, nc, dim, n, seed);

  std::vector<int> center_pos;  // positions into `correct`
  for (int j = 0; j < cm.k; ++j) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nc; ++i) {
      if (cm.assignments[i] != j) continue;
      const double d = kernels::sq_l2(
          std::span<const double>(correct_pts).subspan(i * dim, dim),
          cm.centroid(j));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    center_pos.push_back(best);
  }

  std::vector<int> center_idx;
  for (int pos : center_pos) {
    Candidate c = correct_cands[pos];
    c.role = Candidate::Role::center;
    center_idx.push_back(c.index);
    set.candidates.push_back(std::move(c));
  }

  // Neighbors are searched over the whole candidate dataset with every
  // nominated center excluded.
  const std::vector<double> all_pts_vec = standardize_all(stats, cand);
  for (const Candidate& c : set.candidates) {
    const auto q = standardize_apply(stats, c.x);
    set.neighbor_map[c.index] = nearest_neighbors(q, all_pts_vec, cand.size(),
                                                  dim, l, center_idx);
  }
  attach_std_points(set, cand);
  return set;
}

CandidateSet candidates_confidence(const Ensemble& model, const Dataset& cand,
                                   int n) {
  CandidateSet set;
  set.strategy = Strategy::confidence;
  std::vector<Candidate> correct_cands;
  correct_indices(model, cand, correct_cands);
  if (static_cast<int>(correct_cands.size()) < n)
    throw std::invalid_argument("candidates_confidence: only " +
                                std::to_string(correct_cands.size()) +
                                " correct samples for n=" + std::to_string(n));
  std::sort(correct_cands.begin(), correct_cands.end(),
            [](const Candidate& a, const Candidate& b) {
              return a.conf_true != b.conf_true ? a.conf_true < b.conf_true
                                                : a.index < b.index;
            });
  correct_cands.resize(n);
  set.candidates = std::move(correct_cands);
  attach_std_points(set, cand);
  return set;
}

CandidateSet candidates_random(const Ensemble& model, const Dataset& cand,
                               int n, std::uint64_t seed) {
  if (n < 1 || static_cast<std::size_t>(n) > cand.size())
    throw std::invalid_argument("candidates_random: n outside [1, N]");
  CandidateSet set;
  set.strategy = Strategy::random;
  rng::SplitMix64 gen(seed);
  for (int idx : rng::sample_without_replacement(static_cast<int>(cand.size()),
                                                 n, gen))
    set.candidates.push_back(make_candidate(model, cand, idx));
  attach_std_points(set, cand);
  return set;
}

namespace {

WatermarkEntry to_entry(const Candidate& c) {
  WatermarkEntry e;
  e.cand = c;
  e.bit = 1;
  e.y_wm = wm_label(c.raw, c.y_true, c.y_pred);
  return e;
}

}  // namespace

WatermarkSet select_lowest_confidence(const CandidateSet& cands, int k) {
  const int n = static_cast<int>(cands.candidates.size());
  if (k < 0 || k > n)
    throw std::invalid_argument("select_lowest_confidence: k=" +
                                std::to_string(k) + " > n=" + std::to_string(n));
  std::vector<const Candidate*> order;
  for (const Candidate& c : cands.candidates) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const Candidate* a, const Candidate* b) {
    return a->conf_pred != b->conf_pred ? a->conf_pred < b->conf_pred
                                        : a->index < b->index;
  });
  WatermarkSet out;
  out.strategy = cands.strategy;
  out.selection = Selection::conf;
  for (int i = 0; i < k; ++i) out.entries.push_back(to_entry(*order[i]));
  return out;
}

WatermarkSet select_max_distance(const CandidateSet& cands, int k,
                                 std::uint64_t seed) {
  const int n = static_cast<int>(cands.candidates.size());
  if (k < 0 || k > n)
    throw std::invalid_argument("select_max_distance: k=" + std::to_string(k) +
                                " > n=" + std::to_string(n));
  WatermarkSet out;
  out.strategy = cands.strategy;
  out.selection = Selection::dist;
  out.seed = seed;
  if (k == 0) return out;

  const std::size_t dim = cands.std_points.size() / std::max(n, 1);
  auto pt = [&](int i) {
    return std::span<const double>(cands.std_points).subspan(i * dim, dim);
  };

  rng::SplitMix64 gen(seed);
  std::vector<int> chosen{static_cast<int>(gen.next_index(n))};
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(chosen.size()) < k) {
    const int last = chosen.back();
    int pick = -1;
    for (int i = 0; i < n; ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      min_d[i] = std::min(min_d[i], kernels::sq_l2(pt(i), pt(last)));
      if (pick < 0 || min_d[i] > min_d[pick]) pick = i;
    }
    chosen.push_back(pick);
  }
  for (int i : chosen) out.entries.push_back(to_entry(cands.candidates[i]));
  return out;
}

EmbeddingPlan build_embedding_plan(const WatermarkSet& wset, Scenario scenario,
                                   int dup_factor,
                                   const std::map<int, std::vector<int>>& neighbor_map,
                                   const Dataset& cand_data, int class_count) {
  if (dup_factor < 1)
    throw std::invalid_argument("build_embedding_plan: dup_factor < 1");
  EmbeddingPlan plan;
  plan.scenario = scenario;
  plan.dup_factor = dup_factor;
  plan.fine.num_features = cand_data.num_features;
  plan.fine.class_count = class_count;

  const int base = scenario == Scenario::cand_eq_train ? dup_factor : 1;
  auto push = [&](std::span<const double> x, int label, int copies) {
    for (int c = 0; c < copies; ++c) {
      plan.fine.features.insert(plan.fine.features.end(), x.begin(), x.end());
      plan.fine.labels.push_back(label);
    }
  };

  for (const WatermarkEntry& e : wset.entries) {
    if (e.bit == 0) continue;  // bit 0 = keep original behavior = no rows
    const bool center = e.cand.role == Candidate::Role::center;
    const int copies = base + (center ? 1 : 0);
    push(e.cand.x, e.y_wm, copies);
    plan.watermark_rows += copies;
    if (center) {
      const auto it = neighbor_map.find(e.cand.index);
      if (it == neighbor_map.end()) continue;
      // Anchors keep their training labels, so there is no gradient conflict
      // to dominate; one copy each, in either scenario.
      for (int ni : it->second) {
        push(cand_data.row(ni), cand_data.labels[ni], 1);
        plan.neighbor_rows += 1;
      }
    }
  }
  return plan;
}

Ensemble embed(const Ensemble& model, const EmbeddingPlan& plan,
               const Dataset& context) {
  return finetune(model, plan.fine, context);
}

}  // namespace gbdtwm
