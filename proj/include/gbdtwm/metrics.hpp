#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gbdtwm/dataset.hpp"
#include "gbdtwm/gbdt.hpp"
#include "gbdtwm/watermark.hpp"

namespace gbdtwm {

// One experiment cell. Metrics with an empty denominator stay unset and are
// emitted as nulls, never as 0.
struct MetricsReport {
  std::string dataset;
  Scenario scenario = Scenario::cand_eq_train;
  Strategy strategy = Strategy::random;
  Selection selection = Selection::conf;
  double ratio = 0.0;
  std::uint64_t seed = 0;

  // a_wm and its derivatives are absent when a strategy shortfall left
  // nothing to embed (the "no watermark" cells).
  std::optional<double> a_wm;
  double a_model = 0.0;
  std::optional<double> a_model_adj;
  std::optional<double> robustness;
  std::optional<double> resilience;
  std::optional<double> resilience_adj;

  bool shortfall = false;
  int k = 0;
  int n = 0;
  std::string note;
};

// Fraction of bit-1 entries the model predicts as their watermark label.
double effectiveness(const Ensemble& f_wm,
                     const std::vector<WatermarkEntry>& entries);

// Plain test accuracy.
double general_accuracy(const Ensemble& model, const Dataset& test);

// Among entries the pre-attack model predicts as their watermark label, the
// fraction the attacked model still does. Unset when nothing was embedded.
std::optional<double> robustness(const Ensemble& f_wm, const Ensemble& f_attacked,
                                 const std::vector<WatermarkEntry>& entries);

// Fraction of non-selected candidates whose predicted label the embedding
// left unchanged. With compare_to_truth the comparison target is the ground
// truth label instead of the initial model's prediction (the two coincide
// for correctly predicted candidates). Unset when the set is empty.
std::optional<double> candidate_resilience(const Ensemble& f_init,
                                           const Ensemble& f_wm,
                                           const std::vector<Candidate>& non_selected,
                                           bool compare_to_truth = false);

double adjusted(double value, double a_wm);

}  // namespace gbdtwm
