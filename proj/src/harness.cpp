#include "gbdtwm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gbdtwm/inplace.hpp"
#include "gbdtwm/model_io.hpp"
#include "gbdtwm/rng.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace gbdtwm {

namespace {

// Shortest round-trip formatting, shared with the JSON outputs so every
// artifact prints numbers identically.
std::string fmt(double v) { return nlohmann::json(v).dump(); }

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string cell_hash(const ExperimentConfig& cfg, const std::string& dataset,
                      Strategy strategy, Selection selection, double ratio,
                      std::uint64_t seed) {
  std::ostringstream key;
  key << dataset << '|' << to_string(cfg.scenario) << '|' << to_string(strategy)
      << '|' << to_string(selection) << '|' << fmt(ratio) << '|' << seed << '|'
      << cfg.train.iterations << ',' << fmt(cfg.train.shrinkage) << ','
      << cfg.train.max_leaves << ',' << fmt(cfg.train.feature_sampling) << ','
      << fmt(cfg.train.lambda) << ',' << fmt(cfg.train.min_child_hessian) << ','
      << cfg.train.seed << '|' << cfg.dup_factor << '|' << cfg.neighbors << '|'
      << cfg.resilience_vs_truth << cfg.ratio_is_candidate << cfg.skip_attack;
  std::ostringstream hex;
  hex << std::hex << fnv1a(key.str());
  return hex.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  if (seeds.empty()) throw std::invalid_argument("config: no seeds");
  if (strategies.empty()) throw std::invalid_argument("config: no strategies");
  if (selections.empty()) throw std::invalid_argument("config: no selections");
  if (ratios.empty()) throw std::invalid_argument("config: no ratios");
  for (double r : ratios)
    if (!(r > 0.0 && r < 1.0))
      throw std::invalid_argument("config: ratio outside (0,1)");
  if (dup_factor < 1) throw std::invalid_argument("config: dup_factor < 1");
  if (neighbors < 1) throw std::invalid_argument("config: neighbors < 1");
}

ExperimentConfig config_from_json(const ordered_json& j) {
  ExperimentConfig cfg;
  if (j.contains("data_dir")) cfg.data_dir = j.at("data_dir").get<std::string>();
  if (j.contains("datasets"))
    cfg.datasets = j.at("datasets").get<std::vector<std::string>>();
  if (j.contains("scenario"))
    cfg.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  if (j.contains("strategies")) {
    cfg.strategies.clear();
    for (const auto& s : j.at("strategies"))
      cfg.strategies.push_back(strategy_from_string(s.get<std::string>()));
  }
  if (j.contains("selections")) {
    cfg.selections.clear();
    for (const auto& s : j.at("selections"))
      cfg.selections.push_back(selection_from_string(s.get<std::string>()));
  }
  if (j.contains("ratios")) cfg.ratios = j.at("ratios").get<std::vector<double>>();
  if (j.contains("dup_factor")) cfg.dup_factor = j.at("dup_factor").get<int>();
  if (j.contains("neighbors")) cfg.neighbors = j.at("neighbors").get<int>();
  if (j.contains("seeds"))
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("resilience_vs_truth"))
    cfg.resilience_vs_truth = j.at("resilience_vs_truth").get<bool>();
  if (j.contains("ratio_is_candidate"))
    cfg.ratio_is_candidate = j.at("ratio_is_candidate").get<bool>();
  if (j.contains("skip_attack")) cfg.skip_attack = j.at("skip_attack").get<bool>();
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (t.contains("iterations")) cfg.train.iterations = t.at("iterations").get<int>();
    if (t.contains("shrinkage")) cfg.train.shrinkage = t.at("shrinkage").get<double>();
    if (t.contains("max_leaves")) cfg.train.max_leaves = t.at("max_leaves").get<int>();
    if (t.contains("feature_sampling"))
      cfg.train.feature_sampling = t.at("feature_sampling").get<double>();
    if (t.contains("lambda")) cfg.train.lambda = t.at("lambda").get<double>();
    if (t.contains("min_child_hessian"))
      cfg.train.min_child_hessian = t.at("min_child_hessian").get<double>();
    if (t.contains("seed")) cfg.train.seed = t.at("seed").get<std::uint64_t>();
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_config: parse error in " + path + ": " +
                             e.what());
  }
  return config_from_json(j);
}

LoadedData load_dataset(const std::string& data_dir, const std::string& name) {
  LoadedData out;
  out.name = name;
  const fs::path dir(data_dir);
  fs::path single = dir / (name + ".csv");
  if (name.size() > 4 && name.ends_with(".csv")) {
    single = fs::path(name);
    out.name = single.stem().string();
  }
  const fs::path train_path = dir / (name + ".train.csv");
  const fs::path test_path = dir / (name + ".test.csv");

  if (fs::exists(train_path) && fs::exists(test_path)) {
    out.official_split = true;
    out.train_file = load_csv(train_path.string());
    Dataset test = load_csv(test_path.string());
    // Re-key the test labels onto the train file's class mapping so both
    // parts agree on class ids.
    std::map<std::string, int> ids;
    for (std::size_t c = 0; c < out.train_file.class_names.size(); ++c)
      ids[out.train_file.class_names[c]] = static_cast<int>(c);
    for (int& y : test.labels) {
      const auto it = ids.find(test.class_names[y]);
      if (it == ids.end())
        throw std::runtime_error("load_dataset: test label '" +
                                 test.class_names[y] + "' never seen in " +
                                 train_path.string());
      y = it->second;
    }
    test.class_names = out.train_file.class_names;
    test.class_count = out.train_file.class_count;
    out.test_file = std::move(test);
    return out;
  }
  if (!fs::exists(single))
    throw std::runtime_error("load_dataset: no file for dataset '" + name +
                             "' (looked for " + single.string() + " and " +
                             train_path.string() + ")");
  out.full = load_csv(single.string());
  return out;
}

std::shared_ptr<const CellBase> prepare_cell_base(const ExperimentConfig& cfg,
                                                  const LoadedData& data,
                                                  std::uint64_t seed) {
  auto base = std::make_shared<CellBase>();
  Dataset train_part, test_part;
  if (data.official_split) {
    train_part = data.train_file;
    test_part = data.test_file;
  } else {
    std::tie(train_part, test_part) = split(data.full, 0.8, rng::derive(seed, 11));
  }
  if (cfg.scenario == Scenario::cand_separate) {
    std::tie(base->d_train, base->d_cand) =
        split(train_part, 0.8, rng::derive(seed, 12));
  } else {
    base->d_train = train_part;
    base->d_cand = train_part;
  }
  std::tie(base->d_test, base->d_fine) =
      split(test_part, 0.8, rng::derive(seed, 13));

  TrainConfig tc = cfg.train;
  tc.seed = rng::derive(seed, 21);
  base->model = train(base->d_train, tc);
  return base;
}

std::pair<int, int> watermark_counts(const ExperimentConfig& cfg, double ratio,
                                     std::size_t train_size) {
  if (cfg.ratio_is_candidate) {
    int n = static_cast<int>(ceil_fraction(ratio, train_size));
    int k = n / 2;
    if (k < 1) {
      k = 1;
      n = 2;
    }
    return {k, n};
  }
  const int k = static_cast<int>(ceil_fraction(ratio, train_size));
  return {k, 2 * k};
}

MetricsReport run_cell(const ExperimentConfig& cfg, const LoadedData& data,
                       const CellBase& base, Strategy strategy,
                       Selection selection, double ratio, std::uint64_t seed) {
  MetricsReport r;
  r.dataset = data.name;
  r.scenario = cfg.scenario;
  r.strategy = strategy;
  r.selection = selection;
  r.ratio = ratio;
  r.seed = seed;

  const auto [k, n] = watermark_counts(cfg, ratio, base.d_train.size());
  r.k = k;
  r.n = n;
  const std::uint64_t s_strategy = rng::derive(seed, 31);
  const std::uint64_t s_selection = rng::derive(seed, 41);

  CandidateSet cands;
  switch (strategy) {
    case Strategy::wrong:
      cands = candidates_wrong(base.model, base.d_cand, n);
      break;
    case Strategy::outlier:
      cands = candidates_outlier(base.model, base.d_cand, n, s_strategy);
      break;
    case Strategy::cluster:
      cands = candidates_cluster_center(base.model, base.d_cand, n,
                                        cfg.neighbors, s_strategy);
      break;
    case Strategy::confidence:
      cands = candidates_confidence(base.model, base.d_cand, n);
      break;
    case Strategy::random:
      cands = candidates_random(base.model, base.d_cand, n, s_strategy);
      break;
  }

  int k_eff = k;
  if (static_cast<int>(cands.candidates.size()) < n) {
    k_eff = static_cast<int>(cands.candidates.size()) / 2;
    r.shortfall = true;
    r.note = "strategy supplied " + std::to_string(cands.candidates.size()) +
             " of " + std::to_string(n) + " candidates";
  }
  if (k_eff == 0) {
    r.a_model = general_accuracy(base.model, base.d_test);
    return r;
  }
  r.k = k_eff;

  WatermarkSet wset = selection == Selection::conf
                          ? select_lowest_confidence(cands, k_eff)
                          : select_max_distance(cands, k_eff, s_selection);
  wset.seed = s_selection;

  const EmbeddingPlan plan =
      build_embedding_plan(wset, cfg.scenario, cfg.dup_factor,
                           cands.neighbor_map, base.d_cand,
                           base.model.class_count);
  const Ensemble f_wm = embed(base.model, plan, base.d_train);

  r.a_wm = effectiveness(f_wm, wset.entries);
  r.a_model = general_accuracy(f_wm, base.d_test);
  r.a_model_adj = adjusted(r.a_model, *r.a_wm);

  std::set<int> selected;
  for (const WatermarkEntry& e : wset.entries) selected.insert(e.cand.index);
  std::vector<Candidate> non_selected;
  for (const Candidate& c : cands.candidates)
    if (!selected.count(c.index)) non_selected.push_back(c);
  r.resilience = candidate_resilience(base.model, f_wm, non_selected,
                                      cfg.resilience_vs_truth);
  if (r.resilience) r.resilience_adj = adjusted(*r.resilience, *r.a_wm);

  if (!cfg.skip_attack) {
    // The attack takes the watermarked model as given, so its reference pool
    // is everything that model was fit on: the training rows plus the
    // embedding rows. Only the held-out fine split is new data.
    const Dataset wm_context = concat(base.d_train, plan.fine);
    const Ensemble f_attacked = finetune(f_wm, base.d_fine, wm_context);
    r.robustness = robustness(f_wm, f_attacked, wset.entries);
  }
  return r;
}

ordered_json report_row_json(const MetricsReport& r) {
  ordered_json j;
  j["dataset"] = r.dataset;
  j["scenario"] = to_string(r.scenario);
  j["strategy"] = to_string(r.strategy);
  j["selection"] = to_string(r.selection);
  j["ratio"] = r.ratio;
  j["seed"] = r.seed;
  auto opt = [](const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  j["a_wm"] = opt(r.a_wm);
  j["a_model"] = r.a_model;
  j["a_model_adj"] = opt(r.a_model_adj);
  j["robustness"] = opt(r.robustness);
  j["resilience"] = opt(r.resilience);
  j["resilience_adj"] = opt(r.resilience_adj);
  j["shortfall"] = r.shortfall;
  j["k"] = r.k;
  j["n"] = r.n;
  j["note"] = r.note;
  return j;
}

MetricsReport report_row_from_json(const ordered_json& j) {
  MetricsReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  r.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  r.selection = selection_from_string(j.at("selection").get<std::string>());
  r.ratio = j.at("ratio").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  r.a_wm = opt("a_wm");
  r.a_model = j.at("a_model").get<double>();
  r.a_model_adj = opt("a_model_adj");
  r.robustness = opt("robustness");
  r.resilience = opt("resilience");
  r.resilience_adj = opt("resilience_adj");
  r.shortfall = j.value("shortfall", false);
  r.k = j.value("k", 0);
  r.n = j.value("n", 0);
  r.note = j.value("note", std::string());
  return r;
}

std::string report_csv_header() {
  return "dataset,scenario,strategy,selection,ratio,seed,a_wm,a_model,"
         "a_model_adj,robustness,resilience,resilience_adj";
}

std::string report_csv_row(const MetricsReport& r) {
  std::ostringstream s;
  s << r.dataset << ',' << to_string(r.scenario) << ',' << to_string(r.strategy)
    << ',' << to_string(r.selection) << ',' << fmt(r.ratio) << ',' << r.seed
    << ',' << fmt(r.a_wm) << ',' << fmt(r.a_model) << ',' << fmt(r.a_model_adj)
    << ',' << fmt(r.robustness) << ',' << fmt(r.resilience) << ','
    << fmt(r.resilience_adj);
  return s.str();
}

unsigned worker_count(std::size_t jobs) {
  unsigned cap = std::thread::hardware_concurrency();
  if (cap == 0) cap = 4;
  if (const char* env = std::getenv("GBDTWM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = static_cast<unsigned>(v);
  }
  return std::max<unsigned>(1, std::min<std::size_t>(cap, jobs));
}

void run_parallel(const std::vector<std::function<void()>>& jobs,
                  unsigned max_threads) {
  if (jobs.empty()) return;
  const unsigned workers =
      max_threads ? std::max<unsigned>(1, std::min<std::size_t>(max_threads, jobs.size()))
                  : worker_count(jobs.size());
  if (workers == 1) {
    for (const auto& job : jobs) job();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        jobs[i]();
      }
    });
  }
  for (auto& t : pool) t.join();
}

namespace {

struct CellJob {
  std::size_t dataset_idx;
  Strategy strategy;
  Selection selection;
  double ratio;
  std::uint64_t seed;
  std::string hash;
};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string fmt3(const std::optional<double>& v) {
  if (!v) return "—";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  return buf;
}

// One markdown table per metric: rows are strategy/selection/ratio, columns
// the datasets plus a row average over defined cells.
void write_tables(std::ostream& out, const ExperimentConfig& cfg,
                  const std::vector<MetricsReport>& rows) {
  struct MetricDef {
    const char* title;
    std::function<std::optional<double>(const MetricsReport&)> get;
  };
  const std::vector<MetricDef> metrics = {
      {"Watermark effectiveness (a_wm)",
       [](const MetricsReport& r) { return r.a_wm; }},
      {"Adjusted model accuracy (a_model_adj)",
       [](const MetricsReport& r) { return r.a_model_adj; }},
      {"Fine-tuning robustness",
       [](const MetricsReport& r) { return r.robustness; }},
      {"Candidate resilience",
       [](const MetricsReport& r) { return r.resilience; }},
  };

  out << "# Experiment grid (" << to_string(cfg.scenario) << ", dup_factor="
      << cfg.dup_factor << ", neighbors=" << cfg.neighbors << ")\n";
  for (const auto& metric : metrics) {
    out << "\n## " << metric.title << "\n\n";
    out << "| strategy | selection | ratio |";
    for (const auto& name : cfg.datasets) out << ' ' << name << " |";
    out << " avg |\n";
    out << "|---|---|---|";
    for (std::size_t i = 0; i < cfg.datasets.size(); ++i) out << "---|";
    out << "---|\n";
    for (Strategy s : cfg.strategies) {
      for (Selection sel : cfg.selections) {
        for (double ratio : cfg.ratios) {
          out << "| " << to_string(s) << " | " << to_string(sel) << " | "
              << fmt(ratio) << " |";
          std::vector<double> defined;
          for (const auto& name : cfg.datasets) {
            std::vector<double> seeds_vals;
            for (const MetricsReport& r : rows) {
              if (r.dataset != name || r.strategy != s || r.selection != sel ||
                  r.ratio != ratio)
                continue;
              if (const auto v = metric.get(r)) seeds_vals.push_back(*v);
            }
            std::optional<double> cell;
            if (!seeds_vals.empty()) {
              cell = mean(seeds_vals);
              defined.push_back(*cell);
            }
            out << ' ' << fmt3(cell) << " |";
          }
          std::optional<double> avg;
          if (!defined.empty()) avg = mean(defined);
          out << ' ' << fmt3(avg) << " |\n";
        }
      }
    }
  }
}

}  // namespace

void run_grid(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.datasets.empty())
    throw std::invalid_argument("run_grid: no datasets configured");

  const fs::path out_dir(cfg.out_dir);
  const fs::path cells_dir = out_dir / "cells";
  fs::create_directories(cells_dir);

  std::vector<LoadedData> datasets;
  datasets.reserve(cfg.datasets.size());
  for (const auto& name : cfg.datasets)
    datasets.push_back(load_dataset(cfg.data_dir, name));

  std::vector<CellJob> jobs;
  for (std::size_t di = 0; di < datasets.size(); ++di)
    for (Strategy s : cfg.strategies)
      for (Selection sel : cfg.selections)
        for (double ratio : cfg.ratios)
          for (std::uint64_t seed : cfg.seeds)
            jobs.push_back({di, s, sel, ratio, seed,
                            cell_hash(cfg, datasets[di].name, s, sel, ratio, seed)});

  std::vector<CellJob> todo;
  for (const CellJob& job : jobs)
    if (!fs::exists(cells_dir / (job.hash + ".json"))) todo.push_back(job);
  std::cerr << "[grid] " << jobs.size() << " cells, " << jobs.size() - todo.size()
            << " already done, " << todo.size() << " to run\n";

  // Train each (dataset, seed) base once; cells share it read-only.
  std::map<std::pair<std::size_t, std::uint64_t>, std::shared_ptr<const CellBase>>
      bases;
  for (const CellJob& job : todo) bases.emplace(std::pair{job.dataset_idx, job.seed},
                                                nullptr);
  {
    std::vector<std::pair<std::size_t, std::uint64_t>> keys;
    for (const auto& [key, _] : bases) keys.push_back(key);
    std::vector<std::function<void()>> prep;
    std::mutex mu;
    for (const auto& key : keys)
      prep.push_back([&, key] {
        auto base = prepare_cell_base(cfg, datasets[key.first], key.second);
        std::lock_guard<std::mutex> lock(mu);
        bases[key] = std::move(base);
      });
    run_parallel(prep);
  }

  std::mutex log_mu;
  std::vector<std::string> failures;
  std::vector<std::function<void()>> work;
  for (const CellJob& job : todo)
    work.push_back([&, job] {
      const std::string label = datasets[job.dataset_idx].name + "/" +
                                to_string(job.strategy) + "/" +
                                to_string(job.selection) + "/" + fmt(job.ratio) +
                                "/seed" + std::to_string(job.seed);
      try {
        const auto base = bases.at({job.dataset_idx, job.seed});
        const MetricsReport r =
            run_cell(cfg, datasets[job.dataset_idx], *base, job.strategy,
                     job.selection, job.ratio, job.seed);
        const fs::path tmp = cells_dir / (job.hash + ".json.tmp");
        const fs::path final_path = cells_dir / (job.hash + ".json");
        std::ofstream out(tmp);
        out << report_row_json(r).dump(2) << '\n';
        out.close();
        fs::rename(tmp, final_path);
        std::lock_guard<std::mutex> lock(log_mu);
        std::cerr << "[grid] done " << label << "\n";
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(log_mu);
        failures.push_back(label + ": " + e.what());
        std::cerr << "[grid] FAILED " << label << ": " << e.what() << "\n";
      }
    });
  run_parallel(work);

  std::vector<MetricsReport> rows;
  for (const CellJob& job : jobs) {
    const fs::path path = cells_dir / (job.hash + ".json");
    if (!fs::exists(path)) continue;
    std::ifstream in(path);
    ordered_json j;
    in >> j;
    rows.push_back(report_row_from_json(j));
  }
  std::sort(rows.begin(), rows.end(), [](const MetricsReport& a,
                                         const MetricsReport& b) {
    return std::tie(a.dataset, a.strategy, a.selection, a.ratio, a.seed) <
           std::tie(b.dataset, b.strategy, b.selection, b.ratio, b.seed);
  });

  {
    std::ofstream csv(out_dir / "results.csv");
    csv << report_csv_header() << '\n';
    for (const MetricsReport& r : rows) csv << report_csv_row(r) << '\n';
  }
  {
    ordered_json arr = ordered_json::array();
    for (const MetricsReport& r : rows) arr.push_back(report_row_json(r));
    std::ofstream js(out_dir / "results.json");
    js << arr.dump(2) << '\n';
  }
  {
    std::ofstream md(out_dir / "tables.md");
    write_tables(md, cfg, rows);
  }
  if (!failures.empty()) {
    std::ofstream log(out_dir / "failures.log");
    for (const auto& f : failures) log << f << '\n';
    std::cerr << "[grid] " << failures.size() << " cell(s) failed; see "
              << (out_dir / "failures.log").string() << "\n";
  }
  std::cerr << "[grid] wrote " << (out_dir / "results.csv").string() << ", "
            << rows.size() << " rows\n";
}

}  // namespace gbdtwm
