#include "gbdtwm/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace gbdtwm {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json node_to_json(const Tree& tree, int at) {
  const TreeNode& nd = tree.nodes[at];
  ordered_json j;
  if (nd.is_leaf()) {
    j["value"] = nd.value;
    return j;
  }
  j["feature"] = nd.feature;
  j["threshold"] = nd.threshold;
  j["gain"] = nd.gain;
  j["left"] = node_to_json(tree, nd.left);
  j["right"] = node_to_json(tree, nd.right);
  return j;
}

int node_from_json(const ordered_json& j, Tree& tree,
                   const std::vector<int>& subset) {
  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("value")) {
    tree.nodes[idx].value = j.at("value").get<double>();
    if (!std::isfinite(tree.nodes[idx].value))
      throw std::runtime_error("model: non-finite leaf value");
    return idx;
  }
  if (!j.contains("feature") || !j.contains("threshold") ||
      !j.contains("left") || !j.contains("right"))
    throw std::runtime_error("model: malformed tree node");
  const int f = j.at("feature").get<int>();
  if (std::find(subset.begin(), subset.end(), f) == subset.end())
    throw std::runtime_error("model: split feature " + std::to_string(f) +
                             " not in the tree's feature subset");
  tree.nodes[idx].feature = f;
  tree.nodes[idx].threshold = j.at("threshold").get<double>();
  tree.nodes[idx].gain = j.value("gain", 0.0);
  if (!std::isfinite(tree.nodes[idx].threshold))
    throw std::runtime_error("model: non-finite threshold");
  const int l = node_from_json(j.at("left"), tree, subset);
  const int r = node_from_json(j.at("right"), tree, subset);
  tree.nodes[idx].left = l;
  tree.nodes[idx].right = r;
  return idx;
}

ordered_json candidate_to_json(const Candidate& c) {
  ordered_json j;
  j["index"] = c.index;
  j["x"] = c.x;
  j["raw"] = c.raw;
  j["y_true"] = c.y_true;
  j["role"] = c.role == Candidate::Role::center
                  ? "center"
                  : (c.role == Candidate::Role::neighbor ? "neighbor" : "plain");
  return j;
}

Candidate candidate_from_json(const ordered_json& j) {
  Candidate c;
  c.index = j.at("index").get<int>();
  c.x = j.at("x").get<std::vector<double>>();
  c.raw = j.at("raw").get<std::vector<double>>();
  c.y_true = j.at("y_true").get<int>();
  const std::string role = j.value("role", "plain");
  c.role = role == "center" ? Candidate::Role::center
                            : (role == "neighbor" ? Candidate::Role::neighbor
                                                  : Candidate::Role::plain);
  if (c.raw.empty()) throw std::runtime_error("key: candidate without scores");
  c.y_pred = argmax_label(c.raw);
  c.conf_pred = c.raw[c.y_pred];
  if (c.y_true < 0 || c.y_true >= static_cast<int>(c.raw.size()))
    throw std::runtime_error("key: candidate label out of range");
  c.conf_true = c.raw[c.y_true];
  return c;
}

ordered_json parse_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(std::string(what) + ": cannot open " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string(what) + ": parse error in " + path +
                             ": " + e.what());
  }
  return j;
}

void write_file(const ordered_json& j, const std::string& path,
                const char* what) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(std::string(what) + ": cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

ordered_json model_to_json(const Ensemble& model) {
  ordered_json j;
  j["format"] = kModelFormat;
  j["config"] = {{"iterations", model.config.iterations},
                 {"shrinkage", model.config.shrinkage},
                 {"max_leaves", model.config.max_leaves},
                 {"feature_sampling", model.config.feature_sampling},
                 {"lambda", model.config.lambda},
                 {"min_child_hessian", model.config.min_child_hessian},
                 {"seed", model.config.seed}};
  j["num_features"] = model.num_features;
  j["class_count"] = model.class_count;
  j["class_names"] = model.class_names;
  j["base_score"] = model.base_score;
  ordered_json trees = ordered_json::array();
  for (const Tree& t : model.trees) {
    ordered_json tj;
    tj["iteration"] = t.iteration;
    tj["class"] = t.klass;
    tj["feature_subset"] = t.feature_subset;
    tj["root"] = node_to_json(t, 0);
    trees.push_back(std::move(tj));
  }
  j["trees"] = std::move(trees);
  return j;
}

Ensemble model_from_json(const ordered_json& j) {
  if (!j.contains("format") || j.at("format") != kModelFormat)
    throw std::runtime_error("model: unsupported format (want gbdtwm/1)");
  Ensemble model;
  const auto& cj = j.at("config");
  model.config.iterations = cj.at("iterations").get<int>();
  model.config.shrinkage = cj.at("shrinkage").get<double>();
  model.config.max_leaves = cj.at("max_leaves").get<int>();
  model.config.feature_sampling = cj.at("feature_sampling").get<double>();
  model.config.lambda = cj.at("lambda").get<double>();
  model.config.min_child_hessian = cj.at("min_child_hessian").get<double>();
  model.config.seed = cj.at("seed").get<std::uint64_t>();
  model.num_features = j.at("num_features").get<int>();
  model.class_count = j.at("class_count").get<int>();
  if (j.contains("class_names"))
    model.class_names = j.at("class_names").get<std::vector<std::string>>();
  model.base_score = j.at("base_score").get<std::vector<double>>();
  if (static_cast<int>(model.base_score.size()) != model.class_count)
    throw std::runtime_error("model: base_score size mismatch");

  const auto& trees = j.at("trees");
  const std::size_t expected =
      static_cast<std::size_t>(model.config.iterations) * model.class_count;
  if (trees.size() != expected)
    throw std::runtime_error("model: expected " + std::to_string(expected) +
                             " trees, found " + std::to_string(trees.size()));
  std::size_t slot = 0;
  for (const auto& tj : trees) {
    Tree t;
    t.iteration = tj.at("iteration").get<int>();
    t.klass = tj.at("class").get<int>();
    t.feature_subset = tj.at("feature_subset").get<std::vector<int>>();
    const std::size_t want_slot =
        static_cast<std::size_t>(t.iteration) * model.class_count + t.klass;
    if (want_slot != slot)
      throw std::runtime_error("model: trees out of (iteration, class) order");
    for (int f : t.feature_subset)
      if (f < 0 || f >= model.num_features)
        throw std::runtime_error("model: feature subset index out of range");
    node_from_json(tj.at("root"), t, t.feature_subset);
    model.trees.push_back(std::move(t));
    ++slot;
  }
  return model;
}

void save_model(const Ensemble& model, const std::string& path) {
  write_file(model_to_json(model), path, "save_model");
}

Ensemble load_model(const std::string& path) {
  return model_from_json(parse_file(path, "load_model"));
}

ordered_json key_to_json(const WatermarkKey& key) {
  ordered_json j;
  j["format"] = kKeyFormat;
  j["strategy"] = to_string(key.strategy);
  j["selection"] = to_string(key.selection);
  j["scenario"] = to_string(key.scenario);
  j["seed"] = key.seed;
  j["ratio"] = key.ratio;
  j["dup_factor"] = key.dup_factor;
  j["neighbors"] = key.neighbors_l;
  ordered_json entries = ordered_json::array();
  for (const WatermarkEntry& e : key.entries) {
    ordered_json ej = candidate_to_json(e.cand);
    ej["bit"] = e.bit;
    ej["y_wm"] = e.y_wm;
    entries.push_back(std::move(ej));
  }
  j["entries"] = std::move(entries);
  ordered_json rest = ordered_json::array();
  for (const Candidate& c : key.non_selected) rest.push_back(candidate_to_json(c));
  j["non_selected"] = std::move(rest);
  ordered_json nm = ordered_json::object();
  for (const auto& [center, neigh] : key.neighbor_map)
    nm[std::to_string(center)] = neigh;
  j["neighbor_map"] = std::move(nm);
  return j;
}

WatermarkKey key_from_json(const ordered_json& j) {
  if (!j.contains("format") || j.at("format") != kKeyFormat)
    throw std::runtime_error("key: unsupported format (want gbdtwm-key/1)");
  WatermarkKey key;
  key.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  key.selection = selection_from_string(j.at("selection").get<std::string>());
  key.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  key.seed = j.at("seed").get<std::uint64_t>();
  key.ratio = j.at("ratio").get<double>();
  key.dup_factor = j.at("dup_factor").get<int>();
  key.neighbors_l = j.at("neighbors").get<int>();
  for (const auto& ej : j.at("entries")) {
    WatermarkEntry e;
    e.cand = candidate_from_json(ej);
    e.bit = ej.at("bit").get<int>();
    e.y_wm = ej.at("y_wm").get<int>();
    key.entries.push_back(std::move(e));
  }
  for (const auto& cj : j.at("non_selected"))
    key.non_selected.push_back(candidate_from_json(cj));
  if (j.contains("neighbor_map"))
    for (const auto& [center, neigh] : j.at("neighbor_map").items())
      key.neighbor_map[std::stoi(center)] = neigh.get<std::vector<int>>();
  return key;
}

void save_key(const WatermarkKey& key, const std::string& path) {
  write_file(key_to_json(key), path, "save_key");
}

WatermarkKey load_key(const std::string& path) {
  return key_from_json(parse_file(path, "load_key"));
}

ordered_json stats_to_json(const StandardizationStats& stats) {
  ordered_json j;
  j["mean"] = stats.mean;
  j["stddev"] = stats.stddev;
  return j;
}

StandardizationStats stats_from_json(const ordered_json& j) {
  StandardizationStats stats;
  stats.mean = j.at("mean").get<std::vector<double>>();
  stats.stddev = j.at("stddev").get<std::vector<double>>();
  if (stats.mean.size() != stats.stddev.size())
    throw std::runtime_error("stats: mean/stddev size mismatch");
  return stats;
}

ordered_json report_to_json(const UpdateReport& report) {
  ordered_json j;
  j["total_rechecked"] = report.total_rechecked();
  j["total_retrained"] = report.total_retrained();
  j["total_leaves_refit"] = report.total_leaves_refit();
  ordered_json per = ordered_json::array();
  for (const TreeUpdateStats& s : report.per_tree) {
    per.push_back({{"iteration", s.iteration},
                   {"class", s.klass},
                   {"rechecked", s.nodes_rechecked},
                   {"retrained", s.subtrees_retrained},
                   {"leaves_refit", s.leaves_refit}});
  }
  j["per_tree"] = std::move(per);
  return j;
}

}  // namespace gbdtwm
