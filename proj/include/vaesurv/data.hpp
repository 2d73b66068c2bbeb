#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vaesurv/matrix.hpp"

namespace vaesurv {

enum class FeatureKind { real, binary, categorical };

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::real;
  int levels = 0;  // K, categorical only
};

struct FeatureSchema {
  std::vector<Feature> features;
  std::string time_column;
  std::string event_column;
  std::string time_unit;  // informational label, echoed in reports

  void validate() const;
  int encoder_input_width() const;   // reals + binaries + one-hot widths
  int decoder_output_width() const;  // real: 2, binary: 1, categorical: K
  uint64_t hash() const;             // FNV-1a over the canonical serialization
  std::string to_json_string() const;

  static FeatureSchema load_file(const std::string& path);
  void save_file(const std::string& path) const;
};

// One subject. Categorical covariates are stored as level indices.
struct SurvivalRecord {
  std::vector<double> x;
  double t = 0.0;  // observed time, original units, > 0
  int d = 0;       // 1 = event, 0 = censored
};

struct Dataset {
  FeatureSchema schema;
  std::vector<SurvivalRecord> records;
  // Level names per categorical feature (in schema order of categoricals),
  // indexed by first appearance in the source file.
  std::vector<std::vector<std::string>> category_levels;

  int size() const { return static_cast<int>(records.size()); }
  double censored_fraction() const;
};

Dataset load_dataset(const std::string& csv_path, const FeatureSchema& schema);
Dataset load_dataset(const std::string& csv_path, const std::string& schema_path);
void write_dataset_csv(const Dataset& ds, const std::string& path);

// Per-feature statistics fitted on the training split only. Real features
// standardize with the population (1/N) standard deviation; binary features
// pass through; categorical features expand to one-hot.
struct Preprocessor {
  std::vector<double> mean;  // per schema feature; reals only, 0 elsewhere
  std::vector<double> sd;    // per schema feature; reals only, 1 elsewhere
  std::vector<std::string> warnings;

  std::vector<double> transform(const SurvivalRecord& rec,
                                const FeatureSchema& schema) const;
  std::string stats_digest() const;  // for leakage audits
};

Preprocessor fit_preprocessor(const Dataset& ds, std::span<const int> train_idx);

struct FoldPlan {
  int k = 0;
  uint64_t seed = 0;
  std::vector<std::vector<int>> train;
  std::vector<std::vector<int>> test;
};

// Shuffled, stratified by the event indicator so each fold's censoring
// fraction tracks the global one.
FoldPlan kfold_split(const Dataset& ds, int k, uint64_t seed);

// Stratified two-way split of `idx` (by d); returns {kept, held_out} with
// `held_fraction` of each stratum held out. Used for train/validation.
std::pair<std::vector<int>, std::vector<int>> stratified_holdout(
    const Dataset& ds, std::span<const int> idx, double held_fraction, uint64_t seed);

struct SynthSpec {
  int n = 2000;
  int p = 5;
  std::vector<double> beta;  // empty -> default_beta(p)
  double alpha_true = 1.5;
  double lambda0 = 1.0;
  double censor_fraction = 0.3;
  uint64_t seed = 1;

  void validate() const;
  static std::vector<double> default_beta(int p);  // alternating +-0.15
};

struct SynthResult {
  Dataset dataset;
  std::vector<double> true_lambda;  // per-subject scale of the generating model
  double censor_max = 0.0;          // calibrated upper bound of censoring times
  SynthSpec spec;
};

// Covariates standard normal, event times Weibull(alpha_true, lambda0 *
// exp(beta . x)), censoring uniform on (0, c_max) with c_max calibrated by
// bisection to hit the requested censoring fraction within +-2 points.
SynthResult synth_generate(const SynthSpec& spec);

// Writes {base}.csv, {base}.schema.json and the {base}.truth.json sidecar
// holding the generator spec and per-subject true lambda.
void write_synth(const SynthResult& res, const std::string& base_path);

}  // namespace vaesurv
