#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vaesurv/metrics.hpp"
#include "vaesurv/model.hpp"

namespace vaesurv {

enum class SeedSelection { by_validation, by_test };

struct RunConfig {
  std::string dataset_path;
  std::string schema_path;
  std::string dataset_name;  // defaults to the dataset file stem
  std::string output_dir = ".";
  ModelConfig model;
  int k_folds = 5;
  int seed_count = 10;
  int best_seed_count = 3;
  int ibs_grid_points = 100;
  uint64_t seed = 1;
  int jobs = 0;  // worker pool size; 0 = hardware concurrency
  SeedSelection select_by = SeedSelection::by_validation;

  void validate() const;
};

struct JobFailure {
  int fold = 0;
  int seed_index = 0;
  std::string error;
};

struct ResultsFile {
  std::string format_version = "1.0";
  std::string dataset_name;
  RunConfig config;
  EvalReport report;
  std::vector<JobFailure> failures;
  std::string status;  // "ok" or "partial_failure"
  // Provenance only; excluded from the canonical content that determinism
  // checks compare.
  double wall_clock_seconds = 0.0;
  std::string commit;
  std::string created_utc;

  std::string to_json_string(bool pretty = true) const;
  // Everything except the volatile meta block; identical for identical runs.
  std::string canonical_content() const;
  static ResultsFile from_json_string(const std::string& s);

  void save(const std::string& path) const;
  static ResultsFile load(const std::string& path);
};

// The full cross-validation protocol: per fold, train `seed_count` models,
// rank seeds, evaluate the best `best_seed_count` on the held-out fold.
// Failed jobs are recorded in `failures` rather than aborting the run.
ResultsFile run_cv(const RunConfig& cfg, const Dataset& ds);

void print_results_table(const ResultsFile& r);

// ---- model comparison ----------------------------------------------------

struct MetricRow {
  std::string model;
  std::string dataset;
  int fold = 0;
  double c_index = 0.0;
  double ibs = 0.0;
};

// CSV with a header containing model,dataset,fold,c_index,ibs.
std::vector<MetricRow> load_metrics_csv(const std::string& path);

std::vector<MetricRow> rows_from_results(const ResultsFile& r,
                                         const std::string& model_name);

struct CompareEntry {
  std::string model;
  double mean_cindex = 0.0;
  double mean_ibs = 0.0;
  double mrr_cindex = 0.0;
  double mrr_ibs = 0.0;
};

struct CompareReport {
  std::vector<std::string> datasets;
  std::vector<CompareEntry> models;  // candidate first
  // p_cindex[b][d] / p_ibs[b][d]: candidate vs baseline b on dataset d;
  // -1 marks "not testable" (fewer than two folds on either side).
  std::vector<std::string> baselines;
  std::vector<std::vector<double>> p_cindex;
  std::vector<std::vector<double>> p_ibs;

  std::string to_json_string() const;
};

// `candidate` names the model whose rows are "ours"; every model must
// cover the same dataset set or the comparison aborts listing mismatches.
CompareReport compare_models(const std::vector<MetricRow>& rows,
                             const std::string& candidate);

void print_compare_tables(const CompareReport& r);

}  // namespace vaesurv
