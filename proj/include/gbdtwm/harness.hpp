#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gbdtwm/dataset.hpp"
#include "gbdtwm/gbdt.hpp"
#include "gbdtwm/metrics.hpp"
#include "gbdtwm/watermark.hpp"

namespace gbdtwm {

struct ExperimentConfig {
  std::string data_dir = "data";
  std::vector<std::string> datasets;
  Scenario scenario = Scenario::cand_eq_train;
  std::vector<Strategy> strategies = {Strategy::wrong, Strategy::outlier,
                                      Strategy::cluster, Strategy::confidence,
                                      Strategy::random};
  std::vector<Selection> selections = {Selection::conf, Selection::dist};
  std::vector<double> ratios = {0.001, 0.01, 0.1};
  int dup_factor = 5;
  int neighbors = 2;
  std::vector<std::uint64_t> seeds = {1};
  TrainConfig train;
  std::string out_dir = "out";
  // Compare resilience against ground-truth labels instead of the initial
  // model's predictions (the literal indicator form).
  bool resilience_vs_truth = false;
  // Read ratios as candidate-set ratios (n = ceil(ratio*N), k = n/2) instead
  // of watermark ratios (k = ceil(ratio*N), n = 2k).
  bool ratio_is_candidate = false;
  // Skip the attack fine-tune; robustness stays unset.
  bool skip_attack = false;

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::ordered_json& j);
ExperimentConfig load_config(const std::string& path);

// A dataset as found on disk: either one file the harness splits itself, or
// an official train/test pair (<name>.train.csv + <name>.test.csv).
struct LoadedData {
  std::string name;
  bool official_split = false;
  Dataset full;        // single-file case
  Dataset train_file;  // official-split case
  Dataset test_file;
};

LoadedData load_dataset(const std::string& data_dir, const std::string& name);

// All per-(dataset, seed) state shared by the grid cells of one seed: the
// four splits and the trained initial model.
struct CellBase {
  Dataset d_train;
  Dataset d_cand;
  Dataset d_test;
  Dataset d_fine;
  Ensemble model;
};

std::shared_ptr<const CellBase> prepare_cell_base(const ExperimentConfig& cfg,
                                                  const LoadedData& data,
                                                  std::uint64_t seed);

// ceil(ratio * |D_train|) watermarks, twice that many candidates (or the
// candidate-ratio reading under the config flag).
std::pair<int, int> watermark_counts(const ExperimentConfig& cfg, double ratio,
                                     std::size_t train_size);

// One grid cell: pick candidates, select watermarks, embed, score, and
// (unless skipped) attack. The attack fine-tunes the watermarked model on
// d_fine with the model's own fit data (training rows plus embedding rows)
// as context, measuring what a post-deployment tune leaves intact.
MetricsReport run_cell(const ExperimentConfig& cfg, const LoadedData& data,
                       const CellBase& base, Strategy strategy,
                       Selection selection, double ratio, std::uint64_t seed);

// Runs every cell of the grid with a worker pool (capped by GBDTWM_THREADS),
// resumable through content-hashed per-cell files in <out_dir>/cells, then
// writes results.csv, results.json, and tables.md.
void run_grid(const ExperimentConfig& cfg);

nlohmann::ordered_json report_row_json(const MetricsReport& r);
MetricsReport report_row_from_json(const nlohmann::ordered_json& j);
std::string report_csv_header();
std::string report_csv_row(const MetricsReport& r);

// Runs jobs on up to max_threads workers (0 means hardware concurrency).
void run_parallel(const std::vector<std::function<void()>>& jobs,
                  unsigned max_threads = 0);

unsigned worker_count(std::size_t jobs);

}  // namespace gbdtwm
