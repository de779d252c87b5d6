#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "gbdtwm/dataset.hpp"
#include "gbdtwm/gbdt.hpp"
#include "gbdtwm/inplace.hpp"
#include "gbdtwm/watermark.hpp"

namespace gbdtwm {

// Serialization uses ordered JSON objects and the library's round-trip-exact
// double formatting, so identical inputs always produce identical bytes and
// a load loses no precision.

inline constexpr const char* kModelFormat = "gbdtwm/1";
inline constexpr const char* kKeyFormat = "gbdtwm-key/1";

nlohmann::ordered_json model_to_json(const Ensemble& model);
Ensemble model_from_json(const nlohmann::ordered_json& j);
void save_model(const Ensemble& model, const std::string& path);
Ensemble load_model(const std::string& path);

// The ownership record: everything needed to re-evaluate a watermark against
// any model — the selected entries with their bits and watermark labels, the
// unselected remainder of the candidate set, and the selection context.
struct WatermarkKey {
  Strategy strategy = Strategy::random;
  Selection selection = Selection::conf;
  Scenario scenario = Scenario::cand_eq_train;
  std::uint64_t seed = 0;
  double ratio = 0.0;
  int dup_factor = 1;
  int neighbors_l = 0;
  std::vector<WatermarkEntry> entries;
  std::vector<Candidate> non_selected;
  std::map<int, std::vector<int>> neighbor_map;
};

nlohmann::ordered_json key_to_json(const WatermarkKey& key);
WatermarkKey key_from_json(const nlohmann::ordered_json& j);
void save_key(const WatermarkKey& key, const std::string& path);
WatermarkKey load_key(const std::string& path);

nlohmann::ordered_json stats_to_json(const StandardizationStats& stats);
StandardizationStats stats_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json report_to_json(const UpdateReport& report);

}  // namespace gbdtwm
