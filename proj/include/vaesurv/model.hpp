#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vaesurv/data.hpp"
#include "vaesurv/distributions.hpp"
#include "vaesurv/matrix.hpp"
#include "vaesurv/mlp.hpp"

namespace vaesurv {

struct ModelConfig {
  int latent_dim = 5;
  int hidden_width = 50;
  double keep_prob = 0.8;  // dropout keep-probability on decoder hidden layers
  int max_epochs = 3000;
  int batch_size = 64;
  double learning_rate = 1e-3;
  int patience = 50;        // epochs without min_delta improvement before stopping
  double min_delta = 1e-4;  // on validation ELBO
  TimeFamily time_family = TimeFamily::weibull;
  uint64_t seed = 0;
  int mc_inference_samples = 0;  // 0: z = mu; >0: average params over draws

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_elbo;  // per epoch, mean over training samples
  std::vector<double> val_elbo;    // per epoch, dropout off, eps = 0
  int best_epoch = -1;             // index into the vectors above
  std::string stop_reason;         // "early_stop" or "max_epochs"
};

using FeatureParams = std::variant<GaussianParams, BernoulliParams, CategoricalParams>;

// Encoder + covariate decoder + time decoder with frozen preprocessing
// statistics and the training-fold time scale. Instances are immutable
// after training and safe for concurrent read-only use.
struct SurvivalVae {
  ModelConfig config;
  FeatureSchema schema;
  std::vector<std::vector<std::string>> category_levels;  // training-time mapping
  Preprocessor preprocessor;
  double time_scale = 1.0;  // max training time, original units
  MlpParams encoder, cov_decoder, time_decoder;

  // Preprocesses a record from `ds`, translating categorical levels by name
  // into the model's training-time mapping.
  std::vector<double> preprocess(const SurvivalRecord& rec, const Dataset& ds) const;

  LatentGaussian encode(std::span<const double> x_pre) const;
  TimeParams decode_time(std::span<const double> z) const;
  std::vector<FeatureParams> decode_covariates(std::span<const double> z) const;

  // Inference-mode prediction (dropout off, z = mu unless
  // mc_inference_samples > 0). Returns parameters in normalized time;
  // multiply lambda by time_scale for original units.
  TimeParams predict_time_params(std::span<const double> x_pre) const;

  // Rows F(t | x_i) over `grid` (original units, ascending, nonnegative).
  Matrix predict_cdf_matrix(const Dataset& ds, std::span<const int> subjects,
                            std::span<const double> grid) const;

  // Mean ELBO over the batch with the given noise draws (one row per
  // record), dropout off. Throws if the result is not finite.
  double elbo_batch(const Dataset& ds, std::span<const int> batch,
                    const Matrix& eps) const;

  uint64_t schema_hash() const { return schema.hash(); }

  void save(const std::string& path) const;
  static SurvivalVae load(const std::string& path);
};

inline TimeParams to_original_units(const TimeParams& p, double time_scale) {
  TimeParams out = p;
  out.lambda = p.lambda * time_scale;
  return out;
}

// Mini-batch Adam on the negated ELBO with early stopping on the
// validation ELBO; returns the weights of the best validation epoch.
std::pair<SurvivalVae, TrainHistory> train_model(const Dataset& ds,
                                                std::span<const int> train_idx,
                                                std::span<const int> val_idx,
                                                const ModelConfig& config);

// All weights in a fixed order (encoder, covariate decoder, time decoder;
// w1, b1, w2, b2 each). Gradients come back in the same order.
std::vector<double> flatten_weights(const SurvivalVae& m);
void unflatten_weights(SurvivalVae& m, std::span<const double> flat);

// Analytic gradient of the training loss (negated mean ELBO) for one batch
// with the given noise draws, dropout off.
std::vector<double> elbo_loss_gradient(const SurvivalVae& m, const Dataset& ds,
                                       std::span<const int> batch, const Matrix& eps);

}  // namespace vaesurv
