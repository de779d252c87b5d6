#include "gbdtwm/metrics.hpp"

#include <stdexcept>

namespace gbdtwm {

double effectiveness(const Ensemble& f_wm,
                     const std::vector<WatermarkEntry>& entries) {
  std::size_t total = 0, hit = 0;
  for (const WatermarkEntry& e : entries) {
    if (e.bit != 1) continue;
    ++total;
    if (f_wm.predict_label(e.cand.x) == e.y_wm) ++hit;
  }
  if (total == 0) throw std::invalid_argument("effectiveness: empty watermark set");
  return static_cast<double>(hit) / static_cast<double>(total);
}

double general_accuracy(const Ensemble& model, const Dataset& test) {
  if (test.size() == 0)
    throw std::invalid_argument("general_accuracy: empty test set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (model.predict_label(test.row(i)) == test.labels[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(test.size());
}

std::optional<double> robustness(const Ensemble& f_wm, const Ensemble& f_attacked,
                                 const std::vector<WatermarkEntry>& entries) {
  std::size_t embedded = 0, surviving = 0;
  for (const WatermarkEntry& e : entries) {
    if (e.bit != 1) continue;
    if (f_wm.predict_label(e.cand.x) != e.y_wm) continue;
    ++embedded;
    if (f_attacked.predict_label(e.cand.x) == e.y_wm) ++surviving;
  }
  if (embedded == 0) return std::nullopt;
  return static_cast<double>(surviving) / static_cast<double>(embedded);
}

std::optional<double> candidate_resilience(const Ensemble& f_init,
                                           const Ensemble& f_wm,
                                           const std::vector<Candidate>& non_selected,
                                           bool compare_to_truth) {
  if (non_selected.empty()) return std::nullopt;
  std::size_t same = 0;
  for (const Candidate& c : non_selected) {
    const int target = compare_to_truth ? c.y_true : f_init.predict_label(c.x);
    if (f_wm.predict_label(c.x) == target) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(non_selected.size());
}

double adjusted(double value, double a_wm) { return value * a_wm; }

}  // namespace gbdtwm
