#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "gbdtwm/dataset.hpp"
#include "gbdtwm/gbdt.hpp"
#include "gbdtwm/inplace.hpp"
#include "gbdtwm/model_io.hpp"
#include "gbdtwm/rng.hpp"
#include "gbdtwm/watermark.hpp"
#include "helpers.hpp"

using namespace gbdtwm;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;

  explicit TempFile(const std::string& name)
      : path(fs::temp_directory_path() / name) {}
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Ensemble small_model(std::uint64_t seed = 5) {
  const Dataset d = testutil::line_blobs(20, 3, 4, seed);
  TrainConfig cfg;
  cfg.iterations = 10;
  cfg.max_leaves = 6;
  cfg.feature_sampling = 0.5;
  cfg.seed = seed;
  return train(d, cfg);
}

Candidate sample_candidate(int index, std::vector<double> raw, int y_true,
                           Candidate::Role role = Candidate::Role::plain) {
  Candidate c;
  c.index = index;
  c.x = {0.5, -1.5, 2.0, 0.0};
  c.raw = std::move(raw);
  c.y_true = y_true;
  c.y_pred = argmax_label(c.raw);
  c.conf_pred = c.raw[c.y_pred];
  c.conf_true = c.raw[c.y_true];
  c.role = role;
  return c;
}

}  // namespace

TEST_CASE("model round-trip keeps predictions bit-identical") {
  const Ensemble m = small_model();
  TempFile f("gbdtwm_model_roundtrip.json");
  save_model(m, f.str());
  const Ensemble loaded = load_model(f.str());

  CHECK(loaded.num_features == m.num_features);
  CHECK(loaded.class_count == m.class_count);
  CHECK(loaded.class_names == m.class_names);
  CHECK(loaded.config.iterations == m.config.iterations);
  CHECK(loaded.config.seed == m.config.seed);
  CHECK(loaded.trees.size() == m.trees.size());

  const auto pts = testutil::random_points(50, 4, 77);
  for (int i = 0; i < 50; ++i) {
    const std::span<const double> x(pts.data() + i * 4, 4);
    const auto a = m.predict_raw(x);
    const auto b = loaded.predict_raw(x);
    CHECK(a == b);  // exact, not approximate
  }
}

TEST_CASE("re-saving a loaded model reproduces the bytes") {
  const Ensemble m = small_model(9);
  TempFile f1("gbdtwm_model_bytes1.json");
  TempFile f2("gbdtwm_model_bytes2.json");
  save_model(m, f1.str());
  save_model(load_model(f1.str()), f2.str());
  CHECK(slurp(f1.path) == slurp(f2.path));
}

TEST_CASE("model loading rejects malformed input") {
  const Ensemble m = small_model(3);
  const nlohmann::ordered_json good = model_to_json(m);

  CHECK_THROWS(load_model("/nonexistent/gbdtwm.json"));

  {
    auto j = good;
    j["format"] = "other/9";
    CHECK_THROWS_WITH_AS(model_from_json(j),
                         doctest::Contains("unsupported format"),
                         std::runtime_error);
  }
  {
    auto j = good;
    j.erase("base_score");
    CHECK_THROWS(model_from_json(j));
  }
  {
    auto j = good;
    j["base_score"] = std::vector<double>{0.0};  // class_count is 3
    CHECK_THROWS_WITH_AS(model_from_json(j),
                         doctest::Contains("base_score size"),
                         std::runtime_error);
  }
  {
    auto j = good;
    j["trees"].erase(0);
    CHECK_THROWS(model_from_json(j));
  }
  {
    auto j = good;
    std::swap(j["trees"][0], j["trees"][1]);
    CHECK_THROWS_WITH_AS(model_from_json(j),
                         doctest::Contains("order"), std::runtime_error);
  }
  {
    auto j = good;
    j["trees"][0]["feature_subset"] = std::vector<int>{99};
    CHECK_THROWS(model_from_json(j));
  }

  // A truncated file fails at parse time with a location, not downstream.
  TempFile f("gbdtwm_model_trunc.json");
  save_model(m, f.str());
  const std::string bytes = slurp(f.path);
  {
    std::ofstream out(f.path, std::ios::binary | std::ios::trunc);
    out << bytes.substr(0, bytes.size() / 2);
  }
  CHECK_THROWS_WITH_AS(load_model(f.str()), doctest::Contains("parse error"),
                       std::runtime_error);
}

TEST_CASE("watermark key round-trip restores entries and derived fields") {
  WatermarkKey key;
  key.strategy = Strategy::cluster;
  key.selection = Selection::dist;
  key.scenario = Scenario::cand_separate;
  key.seed = 1234567890123ull;
  key.ratio = 0.01;
  key.dup_factor = 5;
  key.neighbors_l = 2;

  WatermarkEntry e1;
  e1.cand = sample_candidate(7, {0.2, 0.9, 0.1}, 0, Candidate::Role::center);
  e1.bit = 1;
  e1.y_wm = 2;
  WatermarkEntry e2;
  e2.cand = sample_candidate(3, {0.5, 0.4, 0.3}, 0);
  e2.bit = 0;
  e2.y_wm = 1;
  key.entries = {e1, e2};
  key.non_selected = {sample_candidate(11, {0.1, 0.2, 0.7}, 2)};
  key.neighbor_map = {{7, {1, 4}}, {3, {2, 8}}};

  TempFile f("gbdtwm_key_roundtrip.json");
  save_key(key, f.str());
  const WatermarkKey k = load_key(f.str());

  CHECK(k.strategy == key.strategy);
  CHECK(k.selection == key.selection);
  CHECK(k.scenario == key.scenario);
  CHECK(k.seed == key.seed);
  CHECK(k.ratio == key.ratio);
  CHECK(k.dup_factor == 5);
  CHECK(k.neighbors_l == 2);

  REQUIRE(k.entries.size() == 2);
  CHECK(k.entries[0].cand.index == 7);
  CHECK(k.entries[0].cand.x == e1.cand.x);
  CHECK(k.entries[0].cand.raw == e1.cand.raw);
  CHECK(k.entries[0].cand.role == Candidate::Role::center);
  CHECK(k.entries[0].bit == 1);
  CHECK(k.entries[0].y_wm == 2);
  // Derived fields come back recomputed from the stored scores.
  CHECK(k.entries[0].cand.y_pred == 1);
  CHECK(k.entries[0].cand.conf_pred == 0.9);
  CHECK(k.entries[0].cand.conf_true == 0.2);
  CHECK(k.entries[1].bit == 0);

  REQUIRE(k.non_selected.size() == 1);
  CHECK(k.non_selected[0].index == 11);
  CHECK(k.non_selected[0].y_pred == 2);
  CHECK(k.neighbor_map == key.neighbor_map);

  // Byte-stable like the model file.
  TempFile f2("gbdtwm_key_roundtrip2.json");
  save_key(k, f2.str());
  CHECK(slurp(f.path) == slurp(f2.path));
}

TEST_CASE("key loading rejects malformed input") {
  WatermarkKey key;
  key.entries.push_back({sample_candidate(0, {0.6, 0.4}, 0), 1, 1});
  const nlohmann::ordered_json good = key_to_json(key);

  {
    auto j = good;
    j["format"] = "gbdtwm/1";
    CHECK_THROWS_WITH_AS(key_from_json(j),
                         doctest::Contains("unsupported format"),
                         std::runtime_error);
  }
  {
    auto j = good;
    j["entries"][0]["raw"] = std::vector<double>{};
    CHECK_THROWS_WITH_AS(key_from_json(j), doctest::Contains("scores"),
                         std::runtime_error);
  }
  {
    auto j = good;
    j["entries"][0]["y_true"] = 9;
    CHECK_THROWS_WITH_AS(key_from_json(j),
                         doctest::Contains("label out of range"),
                         std::runtime_error);
  }
  {
    auto j = good;
    j["strategy"] = "bogus";
    CHECK_THROWS(key_from_json(j));
  }
}

TEST_CASE("standardization stats round-trip exactly") {
  const Dataset d = testutil::scatter_blobs(10, 2, 3, 21);
  const StandardizationStats stats = standardize_fit(d);
  const StandardizationStats back = stats_from_json(stats_to_json(stats));
  CHECK(back.mean == stats.mean);
  CHECK(back.stddev == stats.stddev);

  nlohmann::ordered_json j = stats_to_json(stats);
  j["stddev"] = std::vector<double>{1.0};
  CHECK_THROWS(stats_from_json(j));
}

TEST_CASE("update reports serialize their totals and per-tree rows") {
  UpdateReport r;
  TreeUpdateStats a;
  a.iteration = 0;
  a.klass = 1;
  a.nodes_rechecked = 4;
  a.subtrees_retrained = 1;
  a.leaves_refit = 3;
  TreeUpdateStats b;
  b.iteration = 2;
  b.klass = 0;
  b.nodes_rechecked = 2;
  b.subtrees_retrained = 0;
  b.leaves_refit = 5;
  r.per_tree = {a, b};

  const nlohmann::ordered_json j = report_to_json(r);
  CHECK(j.at("total_rechecked").get<int>() == 6);
  CHECK(j.at("total_retrained").get<int>() == 1);
  CHECK(j.at("total_leaves_refit").get<int>() == 8);
  REQUIRE(j.at("per_tree").size() == 2);
  CHECK(j.at("per_tree")[0].at("iteration").get<int>() == 0);
  CHECK(j.at("per_tree")[1].at("class").get<int>() == 0);
  CHECK(j.at("per_tree")[1].at("retrained").get<int>() == 0);
}
