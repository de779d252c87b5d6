// Command-line front end: train models, embed watermarks, fine-tune,
// evaluate ownership keys, and run the full experiment grid.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gbdtwm/dataset.hpp"
#include "gbdtwm/gbdt.hpp"
#include "gbdtwm/harness.hpp"
#include "gbdtwm/inplace.hpp"
#include "gbdtwm/metrics.hpp"
#include "gbdtwm/model_io.hpp"
#include "gbdtwm/rng.hpp"
#include "gbdtwm/watermark.hpp"

using ordered_json = nlohmann::ordered_json;

namespace {

struct CsvFlags {
  std::string label_column;
  bool no_header = false;
  int class_count = -1;
};

void add_csv_flags(CLI::App* cmd, CsvFlags& flags) {
  cmd->add_option("--label-column", flags.label_column,
                  "Label column name or 0-based index (default: last column)");
  cmd->add_flag("--no-header", flags.no_header, "Treat the first row as data");
  cmd->add_option("--class-count", flags.class_count,
                  "Declare the number of classes instead of inferring it");
}

gbdtwm::Dataset load(const std::string& path, const CsvFlags& flags) {
  gbdtwm::CsvOptions opts;
  opts.has_header = !flags.no_header;
  opts.label_column = flags.label_column;
  opts.class_count = flags.class_count;
  return gbdtwm::load_csv(path, opts);
}

// Re-keys a freshly loaded file onto the model's class ids via the label
// tokens recorded at training time, so independently loaded CSVs agree on
// what class 3 means.
gbdtwm::Dataset align_to_model(gbdtwm::Dataset data, const gbdtwm::Ensemble& model,
                               const std::string& path) {
  if (data.num_features != model.num_features)
    throw std::runtime_error(path + ": has " + std::to_string(data.num_features) +
                             " features, model expects " +
                             std::to_string(model.num_features));
  if (model.class_names.empty()) {
    if (data.class_count > model.class_count)
      throw std::runtime_error(path + ": more classes than the model knows");
    data.class_count = model.class_count;
    return data;
  }
  std::map<std::string, int> ids;
  for (std::size_t c = 0; c < model.class_names.size(); ++c)
    ids[model.class_names[c]] = static_cast<int>(c);
  for (int& y : data.labels) {
    const auto it = ids.find(data.class_names[y]);
    if (it == ids.end())
      throw std::runtime_error(path + ": label '" + data.class_names[y] +
                               "' unknown to the model");
    y = it->second;
  }
  data.class_names = model.class_names;
  data.class_count = model.class_count;
  return data;
}

void add_train_flags(CLI::App* cmd, gbdtwm::TrainConfig& tc) {
  cmd->add_option("--iterations", tc.iterations, "Boosting iterations");
  cmd->add_option("--shrinkage", tc.shrinkage, "Learning rate");
  cmd->add_option("--max-leaves", tc.max_leaves, "Leaf budget per tree");
  cmd->add_option("--feature-sampling", tc.feature_sampling,
                  "Fraction of features sampled per tree");
  cmd->add_option("--lambda", tc.lambda, "Leaf regularization");
  cmd->add_option("--min-child-hessian", tc.min_child_hessian,
                  "Minimum hessian mass per child");
  cmd->add_option("--seed", tc.seed, "Training seed");
}

ordered_json opt_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

// Plain CSV with f0..fN-1 headers and the model's label tokens; doubles are
// printed in shortest round-trip form so a reload parses identical values.
void write_csv(const gbdtwm::Dataset& d,
               const std::vector<std::string>& class_names,
               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int f = 0; f < d.num_features; ++f) out << 'f' << f << ',';
  out << "label\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double v : d.row(i)) out << ordered_json(v).dump() << ',';
    const int y = d.labels[i];
    if (y < static_cast<int>(class_names.size()))
      out << class_names[y] << '\n';
    else
      out << y << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-boosted tree training and watermarking toolkit"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model from a CSV file");
  std::string train_data, train_out = "model.json";
  CsvFlags train_csv;
  gbdtwm::TrainConfig train_tc;
  train_cmd->add_option("--dataset", train_data, "Training CSV")->required();
  train_cmd->add_option("--out", train_out, "Output model file");
  add_csv_flags(train_cmd, train_csv);
  add_train_flags(train_cmd, train_tc);

  // watermark
  auto* wm_cmd =
      app.add_subcommand("watermark", "Select candidates and embed a watermark");
  std::string wm_model, wm_data, wm_context, wm_out = "model.wm.json",
                                             wm_key = "key.json", wm_plan_out;
  std::string wm_strategy = "confidence", wm_selection = "conf",
              wm_scenario = "cand_eq_train";
  double wm_ratio = 0.01;
  int wm_count = 0, wm_dup = 5, wm_neighbors = 2;
  std::uint64_t wm_seed = 1;
  CsvFlags wm_csv;
  wm_cmd->add_option("--model", wm_model, "Initial model file")->required();
  wm_cmd->add_option("--dataset", wm_data, "Candidate CSV (D_cand)")->required();
  wm_cmd->add_option("--context", wm_context,
                     "Context CSV for gradient statistics (default: --dataset)");
  wm_cmd->add_option("--strategy", wm_strategy,
                     "wrong | outlier | cluster | confidence | random");
  wm_cmd->add_option("--selection", wm_selection, "conf | dist");
  wm_cmd->add_option("--scenario", wm_scenario, "cand_eq_train | separate");
  wm_cmd->add_option("--ratio", wm_ratio,
                     "Watermark count = ceil(ratio * context rows)");
  wm_cmd->add_option("--count", wm_count, "Explicit watermark count (overrides --ratio)");
  wm_cmd->add_option("--seed", wm_seed, "Selection seed");
  wm_cmd->add_option("--dup-factor", wm_dup, "Duplication factor (cand_eq_train)");
  wm_cmd->add_option("--neighbors", wm_neighbors, "Neighbors per cluster center");
  wm_cmd->add_option("--out", wm_out, "Watermarked model file");
  wm_cmd->add_option("--key", wm_key, "Ownership key file");
  wm_cmd->add_option("--plan-out", wm_plan_out,
                     "Write the embedding rows (watermark labels) as CSV");
  add_csv_flags(wm_cmd, wm_csv);

  // finetune
  auto* ft_cmd = app.add_subcommand("finetune", "Fine-tune a model in place");
  std::string ft_model, ft_data, ft_out = "model.ft.json", ft_report;
  std::vector<std::string> ft_contexts;
  bool ft_fine_only = false;
  CsvFlags ft_csv;
  ft_cmd->add_option("--model", ft_model, "Model file")->required();
  ft_cmd->add_option("--dataset", ft_data, "Fine-tuning CSV")->required();
  ft_cmd->add_option("--context", ft_contexts,
                     "Context CSV for gradient statistics (repeatable; pooled)");
  ft_cmd->add_flag("--fine-only", ft_fine_only,
                   "Use only the fine-tuning rows in the statistics");
  ft_cmd->add_option("--out", ft_out, "Output model file");
  ft_cmd->add_option("--report", ft_report, "Write the update report JSON here");
  add_csv_flags(ft_cmd, ft_csv);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model / watermark key");
  std::string ev_model, ev_data, ev_key, ev_reference, ev_attacked, ev_out;
  bool ev_vs_truth = false;
  CsvFlags ev_csv;
  eval_cmd->add_option("--model", ev_model, "Model file")->required();
  eval_cmd->add_option("--dataset", ev_data, "Test CSV for accuracy");
  eval_cmd->add_option("--key", ev_key, "Ownership key file");
  eval_cmd->add_option("--reference", ev_reference,
                       "Initial (pre-embedding) model, for resilience");
  eval_cmd->add_option("--attacked", ev_attacked,
                       "Post-attack model, for robustness");
  eval_cmd->add_flag("--resilience-vs-truth", ev_vs_truth,
                     "Compare resilience against ground-truth labels");
  eval_cmd->add_option("--out", ev_out, "Write metrics JSON here (default stdout)");
  add_csv_flags(eval_cmd, ev_csv);

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Run an experiment grid");
  std::string exp_config;
  std::string exp_data_dir, exp_scenario, exp_out;
  std::vector<std::string> exp_datasets, exp_strategies, exp_selections;
  std::vector<double> exp_ratios;
  std::vector<std::uint64_t> exp_seeds;
  int exp_dup = -1, exp_neighbors = -1;
  bool exp_skip_attack = false, exp_vs_truth = false, exp_ratio_cand = false;
  gbdtwm::TrainConfig exp_tc;
  exp_cmd->add_option("--config", exp_config, "Experiment config JSON");
  exp_cmd->add_option("--data-dir", exp_data_dir, "Dataset directory");
  exp_cmd->add_option("--dataset", exp_datasets, "Dataset name (repeatable)");
  exp_cmd->add_option("--scenario", exp_scenario, "cand_eq_train | separate");
  exp_cmd->add_option("--strategy", exp_strategies, "Strategy subset (repeatable)");
  exp_cmd->add_option("--selection", exp_selections, "Selection subset (repeatable)");
  exp_cmd->add_option("--ratio", exp_ratios, "Watermark ratio (repeatable)");
  exp_cmd->add_option("--seed", exp_seeds, "Seed (repeatable)");
  exp_cmd->add_option("--dup-factor", exp_dup, "Duplication factor");
  exp_cmd->add_option("--neighbors", exp_neighbors, "Neighbors per center");
  exp_cmd->add_option("--out", exp_out, "Output directory");
  exp_cmd->add_flag("--skip-attack", exp_skip_attack, "Skip the attack fine-tune");
  exp_cmd->add_flag("--resilience-vs-truth", exp_vs_truth,
                    "Literal resilience comparison target");
  exp_cmd->add_flag("--ratio-is-candidate", exp_ratio_cand,
                    "Read ratios as candidate-set ratios");
  auto* it_opt = exp_cmd->add_option("--iterations", exp_tc.iterations, "");
  auto* sh_opt = exp_cmd->add_option("--shrinkage", exp_tc.shrinkage, "");
  auto* ml_opt = exp_cmd->add_option("--max-leaves", exp_tc.max_leaves, "");
  auto* fs_opt = exp_cmd->add_option("--feature-sampling", exp_tc.feature_sampling, "");
  auto* la_opt = exp_cmd->add_option("--lambda", exp_tc.lambda, "");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      const auto data = load(train_data, train_csv);
      const auto model = gbdtwm::train(data, train_tc);
      gbdtwm::save_model(model, train_out);
      std::cerr << "trained " << model.trees.size() << " trees on " << data.size()
                << " rows (" << data.num_features << " features, "
                << data.class_count << " classes) -> " << train_out << "\n";
      return 0;
    }

    if (wm_cmd->parsed()) {
      const auto model = gbdtwm::load_model(wm_model);
      const auto cand = align_to_model(load(wm_data, wm_csv), model, wm_data);
      const auto context =
          wm_context.empty() ? cand
                             : align_to_model(load(wm_context, wm_csv), model,
                                              wm_context);
      const auto strategy = gbdtwm::strategy_from_string(wm_strategy);
      const auto selection = gbdtwm::selection_from_string(wm_selection);
      const auto scenario = gbdtwm::scenario_from_string(wm_scenario);

      const int k = wm_count > 0
                        ? wm_count
                        : static_cast<int>(gbdtwm::ceil_fraction(wm_ratio,
                                                                 context.size()));
      const int n = 2 * k;
      gbdtwm::CandidateSet cands;
      switch (strategy) {
        case gbdtwm::Strategy::wrong:
          cands = gbdtwm::candidates_wrong(model, cand, n);
          break;
        case gbdtwm::Strategy::outlier:
          cands = gbdtwm::candidates_outlier(model, cand, n, wm_seed);
          break;
        case gbdtwm::Strategy::cluster:
          cands = gbdtwm::candidates_cluster_center(model, cand, n, wm_neighbors,
                                                    wm_seed);
          break;
        case gbdtwm::Strategy::confidence:
          cands = gbdtwm::candidates_confidence(model, cand, n);
          break;
        case gbdtwm::Strategy::random:
          cands = gbdtwm::candidates_random(model, cand, n, wm_seed);
          break;
      }
      int k_eff = k;
      if (static_cast<int>(cands.candidates.size()) < n) {
        k_eff = static_cast<int>(cands.candidates.size()) / 2;
        std::cerr << "warning: strategy supplied " << cands.candidates.size()
                  << " of " << n << " candidates; k reduced to " << k_eff << "\n";
      }
      if (k_eff == 0) throw std::runtime_error("no candidates to watermark");

      auto wset = selection == gbdtwm::Selection::conf
                      ? gbdtwm::select_lowest_confidence(cands, k_eff)
                      : gbdtwm::select_max_distance(cands, k_eff,
                                                    gbdtwm::rng::derive(wm_seed, 41));
      const auto plan = gbdtwm::build_embedding_plan(
          wset, scenario, wm_dup, cands.neighbor_map, cand, model.class_count);
      const auto wm = gbdtwm::embed(model, plan, context);
      gbdtwm::save_model(wm, wm_out);
      if (!wm_plan_out.empty())
        write_csv(plan.fine, model.class_names, wm_plan_out);

      gbdtwm::WatermarkKey key;
      key.strategy = strategy;
      key.selection = selection;
      key.scenario = scenario;
      key.seed = wm_seed;
      key.ratio = wm_ratio;
      key.dup_factor = wm_dup;
      key.neighbors_l = wm_neighbors;
      key.entries = wset.entries;
      std::set<int> selected;
      for (const auto& e : wset.entries) selected.insert(e.cand.index);
      for (const auto& c : cands.candidates)
        if (!selected.count(c.index)) key.non_selected.push_back(c);
      key.neighbor_map = cands.neighbor_map;
      gbdtwm::save_key(key, wm_key);

      const double a_wm = gbdtwm::effectiveness(wm, wset.entries);
      std::cerr << "embedded " << k_eff << " watermarks (" << plan.fine.size()
                << " fine rows), effectiveness " << a_wm << " -> " << wm_out
                << ", key " << wm_key << "\n";
      return 0;
    }

    if (ft_cmd->parsed()) {
      const auto model = gbdtwm::load_model(ft_model);
      const auto fine = align_to_model(load(ft_data, ft_csv), model, ft_data);
      gbdtwm::Dataset context;
      for (std::size_t i = 0; i < ft_contexts.size(); ++i) {
        auto part = align_to_model(load(ft_contexts[i], ft_csv), model,
                                   ft_contexts[i]);
        context = i == 0 ? std::move(part) : gbdtwm::concat(context, part);
      }
      gbdtwm::UpdateContext ctx;
      ctx.fine_data = &fine;
      ctx.context_data = ft_contexts.empty() ? nullptr : &context;
      ctx.mode = ft_fine_only ? gbdtwm::UpdateContext::Mode::fine_only
                              : gbdtwm::UpdateContext::Mode::union_data;
      auto [updated, report] = gbdtwm::inplace_update(model, ctx);
      gbdtwm::save_model(updated, ft_out);
      if (!ft_report.empty()) {
        std::ofstream out(ft_report);
        out << gbdtwm::report_to_json(report).dump(2) << '\n';
      }
      std::cerr << "fine-tuned: " << report.total_retrained()
                << " subtrees retrained, " << report.total_leaves_refit()
                << " leaves refit -> " << ft_out << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto model = gbdtwm::load_model(ev_model);
      ordered_json out;
      if (!ev_data.empty()) {
        const auto test = align_to_model(load(ev_data, ev_csv), model, ev_data);
        out["a_model"] = gbdtwm::general_accuracy(model, test);
      }
      std::optional<double> a_wm;
      if (!ev_key.empty()) {
        const auto key = gbdtwm::load_key(ev_key);
        a_wm = gbdtwm::effectiveness(model, key.entries);
        out["a_wm"] = *a_wm;
        if (out.contains("a_model"))
          out["a_model_adj"] =
              gbdtwm::adjusted(out["a_model"].get<double>(), *a_wm);
        if (!ev_reference.empty()) {
          const auto reference = gbdtwm::load_model(ev_reference);
          const auto res = gbdtwm::candidate_resilience(
              reference, model, key.non_selected, ev_vs_truth);
          out["resilience"] = opt_json(res);
          out["resilience_adj"] =
              res && a_wm ? ordered_json(gbdtwm::adjusted(*res, *a_wm))
                          : ordered_json(nullptr);
        }
        if (!ev_attacked.empty()) {
          const auto attacked = gbdtwm::load_model(ev_attacked);
          out["robustness"] =
              opt_json(gbdtwm::robustness(model, attacked, key.entries));
        }
      }
      if (out.empty())
        throw std::runtime_error("eval: nothing to compute; pass --dataset or --key");
      if (ev_out.empty()) {
        std::cout << out.dump(2) << "\n";
      } else {
        std::ofstream f(ev_out);
        f << out.dump(2) << '\n';
      }
      return 0;
    }

    if (exp_cmd->parsed()) {
      gbdtwm::ExperimentConfig cfg;
      if (!exp_config.empty()) cfg = gbdtwm::load_config(exp_config);
      if (!exp_data_dir.empty()) cfg.data_dir = exp_data_dir;
      if (!exp_datasets.empty()) cfg.datasets = exp_datasets;
      if (!exp_scenario.empty())
        cfg.scenario = gbdtwm::scenario_from_string(exp_scenario);
      if (!exp_strategies.empty()) {
        cfg.strategies.clear();
        for (const auto& s : exp_strategies)
          cfg.strategies.push_back(gbdtwm::strategy_from_string(s));
      }
      if (!exp_selections.empty()) {
        cfg.selections.clear();
        for (const auto& s : exp_selections)
          cfg.selections.push_back(gbdtwm::selection_from_string(s));
      }
      if (!exp_ratios.empty()) cfg.ratios = exp_ratios;
      if (!exp_seeds.empty()) cfg.seeds = exp_seeds;
      if (exp_dup > 0) cfg.dup_factor = exp_dup;
      if (exp_neighbors > 0) cfg.neighbors = exp_neighbors;
      if (!exp_out.empty()) cfg.out_dir = exp_out;
      if (exp_skip_attack) cfg.skip_attack = true;
      if (exp_vs_truth) cfg.resilience_vs_truth = true;
      if (exp_ratio_cand) cfg.ratio_is_candidate = true;
      if (it_opt->count()) cfg.train.iterations = exp_tc.iterations;
      if (sh_opt->count()) cfg.train.shrinkage = exp_tc.shrinkage;
      if (ml_opt->count()) cfg.train.max_leaves = exp_tc.max_leaves;
      if (fs_opt->count()) cfg.train.feature_sampling = exp_tc.feature_sampling;
      if (la_opt->count()) cfg.train.lambda = exp_tc.lambda;
      gbdtwm::run_grid(cfg);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
