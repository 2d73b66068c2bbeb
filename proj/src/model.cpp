#include "vaesurv/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "vaesurv/adam.hpp"
#include "vaesurv/autodiff.hpp"
#include "vaesurv/elbo_graph.hpp"

namespace vaesurv {

using nlohmann::json;

namespace {

struct HeadRange {
  FeatureKind kind;
  int offset;  // into the covariate-decoder output
  int width;
};

std::vector<HeadRange> head_layout(const FeatureSchema& schema) {
  std::vector<HeadRange> layout;
  int off = 0;
  for (const auto& f : schema.features) {
    int w = 0;
    switch (f.kind) {
      case FeatureKind::real: w = 2; break;
      case FeatureKind::binary: w = 1; break;
      case FeatureKind::categorical: w = f.levels; break;
    }
    layout.push_back({f.kind, off, w});
    off += w;
  }
  return layout;
}

// Offsets of each feature inside the preprocessed input vector.
std::vector<int> input_offsets(const FeatureSchema& schema) {
  std::vector<int> off;
  int o = 0;
  for (const auto& f : schema.features) {
    off.push_back(o);
    o += f.kind == FeatureKind::categorical ? f.levels : 1;
  }
  return off;
}

LayerSpec encoder_spec(const FeatureSchema& schema, const ModelConfig& cfg) {
  return {schema.encoder_input_width(), cfg.hidden_width, 2 * cfg.latent_dim,
          Activation::relu, Activation::tanh};
}

LayerSpec cov_decoder_spec(const FeatureSchema& schema, const ModelConfig& cfg) {
  return {cfg.latent_dim, cfg.hidden_width, schema.decoder_output_width(),
          Activation::relu, Activation::identity};
}

LayerSpec time_decoder_spec(const ModelConfig& cfg) {
  const int out = cfg.time_family == TimeFamily::weibull ? 2 : 1;
  return {cfg.latent_dim, cfg.hidden_width, out, Activation::relu, Activation::identity};
}

// Batch tensors shared by training and the public elbo path.
struct BatchData {
  Matrix x;       // n x input_width
  Matrix log_tc;  // n x 1, log(max(t / scale, 1e-8))
  Matrix d;       // n x 1
  // Per feature: the reconstruction target (n x 1 value or n x K one-hot)
  // and, for binaries, the complement 1 - x.
  std::vector<Matrix> target;
  std::vector<Matrix> target_complement;
};

BatchData make_batch(const SurvivalVae& m, const Dataset& ds, std::span<const int> batch) {
  const int n = static_cast<int>(batch.size());
  const auto in_off = input_offsets(m.schema);
  const int width = m.schema.encoder_input_width();
  BatchData bd;
  bd.x = Matrix(n, width);
  bd.log_tc = Matrix(n, 1);
  bd.d = Matrix(n, 1);
  const size_t nf = m.schema.features.size();
  bd.target.resize(nf);
  bd.target_complement.resize(nf);
  for (size_t fi = 0; fi < nf; ++fi) {
    const Feature& f = m.schema.features[fi];
    bd.target[fi] =
        Matrix(n, f.kind == FeatureKind::categorical ? f.levels : 1);
    if (f.kind == FeatureKind::binary) bd.target_complement[fi] = Matrix(n, 1);
  }
  for (int r = 0; r < n; ++r) {
    const SurvivalRecord& rec = ds.records[batch[r]];
    const std::vector<double> xp = m.preprocess(rec, ds);
    for (int j = 0; j < width; ++j) bd.x(r, j) = xp[j];
    bd.log_tc(r, 0) = std::log(std::max(rec.t / m.time_scale, kTimeEps));
    bd.d(r, 0) = static_cast<double>(rec.d);
    for (size_t fi = 0; fi < nf; ++fi) {
      const Feature& f = m.schema.features[fi];
      if (f.kind == FeatureKind::categorical) {
        for (int k = 0; k < f.levels; ++k)
          bd.target[fi](r, k) = bd.x(r, in_off[fi] + k);
      } else {
        bd.target[fi](r, 0) = bd.x(r, in_off[fi]);
        if (f.kind == FeatureKind::binary)
          bd.target_complement[fi](r, 0) = 1.0 - bd.x(r, in_off[fi]);
      }
    }
  }
  return bd;
}

struct GraphRefs {
  MlpNodes enc, dec_x, dec_t;
  int mu = -1, log_var = -1, z = -1;
  int per_sample = -1;  // n x 1 ELBO contributions
  int elbo = -1;        // 1 x 1, mean over the batch
};

GraphRefs build_elbo_graph(ad::Tape& tape, const SurvivalVae& m, BatchData bd,
                           const Matrix& eps, const Matrix* mask_x,
                           const Matrix* mask_t) {
  const int n = bd.x.rows;
  GraphRefs g;
  g.enc = insert_mlp(tape, m.encoder);
  g.dec_x = insert_mlp(tape, m.cov_decoder);
  g.dec_t = insert_mlp(tape, m.time_decoder);

  const int x_in = tape.constant(std::move(bd.x));
  const int enc_out = mlp_apply(tape, g.enc, m.encoder.spec, x_in);
  const int J = m.config.latent_dim;
  g.mu = tape.slice_cols(enc_out, 0, J);
  g.log_var = tape.slice_cols(enc_out, J, 2 * J);
  const int kl = graph::kl_std_normal_node(tape, g.mu, g.log_var);
  g.z = graph::reparameterize_node(tape, g.mu, g.log_var, tape.constant(eps));

  const int mask_t_node = mask_t ? tape.constant(*mask_t) : -1;
  const int t_raw = mlp_apply(tape, g.dec_t, m.time_decoder.spec, g.z, mask_t_node);
  int alpha, lambda;
  if (m.config.time_family == TimeFamily::weibull) {
    alpha = graph::softplus_floor_node(tape, tape.slice_cols(t_raw, 0, 1));
    lambda = graph::softplus_floor_node(tape, tape.slice_cols(t_raw, 1, 2));
  } else {
    alpha = tape.constant(Matrix(n, 1, 1.0));
    lambda = graph::softplus_floor_node(tape, tape.slice_cols(t_raw, 0, 1));
  }
  const int log_tc = tape.constant(std::move(bd.log_tc));
  const int d_node = tape.constant(std::move(bd.d));
  const int ll_time = graph::censored_time_ll_node(tape, log_tc, d_node, alpha, lambda);

  const int mask_x_node = mask_x ? tape.constant(*mask_x) : -1;
  const int x_raw = mlp_apply(tape, g.dec_x, m.cov_decoder.spec, g.z, mask_x_node);
  const auto layout = head_layout(m.schema);
  int acc = tape.add(tape.affine(kl, -1.0, 0.0), ll_time);
  for (size_t fi = 0; fi < layout.size(); ++fi) {
    const HeadRange& h = layout[fi];
    const int raw = tape.slice_cols(x_raw, h.offset, h.offset + h.width);
    int ll = -1;
    switch (h.kind) {
      case FeatureKind::real: {
        const int mu_f = tape.slice_cols(raw, 0, 1);
        const int sigma = graph::softplus_floor_node(tape, tape.slice_cols(raw, 1, 2));
        ll = graph::gaussian_ll_node(tape, tape.constant(std::move(bd.target[fi])),
                                     mu_f, sigma);
        break;
      }
      case FeatureKind::binary: {
        const int beta = tape.sigmoid(raw);
        ll = graph::bernoulli_ll_node(
            tape, tape.constant(std::move(bd.target[fi])),
            tape.constant(std::move(bd.target_complement[fi])), beta);
        break;
      }
      case FeatureKind::categorical: {
        const int theta = tape.softmax_rows(raw);
        ll = graph::categorical_ll_node(
            tape, tape.constant(std::move(bd.target[fi])), theta);
        break;
      }
    }
    acc = tape.add(acc, ll);
  }
  g.per_sample = acc;
  g.elbo = tape.affine(tape.sum(acc), 1.0 / static_cast<double>(n), 0.0);
  return g;
}

void append_grads(const ad::Tape& tape, const MlpNodes& nodes, std::vector<double>& out) {
  for (int id : {nodes.w1, nodes.b1, nodes.w2, nodes.b2}) {
    const Matrix& g = tape.grad(id);
    out.insert(out.end(), g.a.begin(), g.a.end());
  }
}

Matrix keep_mask(int rows, int cols, double keep_prob, std::mt19937_64& rng,
                 std::uniform_real_distribution<double>& unif) {
  Matrix m(rows, cols);
  const double scale = 1.0 / keep_prob;
  for (double& v : m.a) v = unif(rng) < keep_prob ? scale : 0.0;
  return m;
}

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.a.size())
    throw std::runtime_error("model file: matrix data length mismatch");
  m.a = data;
  return m;
}

json mlp_to_json(const MlpParams& p) {
  return json{{"w1", matrix_to_json(p.w1)},
              {"b1", matrix_to_json(p.b1)},
              {"w2", matrix_to_json(p.w2)},
              {"b2", matrix_to_json(p.b2)}};
}

MlpParams mlp_from_json(const json& j, const LayerSpec& spec) {
  MlpParams p;
  p.spec = spec;
  p.w1 = matrix_from_json(j.at("w1"));
  p.b1 = matrix_from_json(j.at("b1"));
  p.w2 = matrix_from_json(j.at("w2"));
  p.b2 = matrix_from_json(j.at("b2"));
  p.validate();
  return p;
}

}  // namespace

std::vector<double> flatten_weights(const SurvivalVae& m) {
  std::vector<double> flat;
  m.encoder.append_flat(flat);
  m.cov_decoder.append_flat(flat);
  m.time_decoder.append_flat(flat);
  return flat;
}

void unflatten_weights(SurvivalVae& m, std::span<const double> flat) {
  size_t off = 0;
  off = m.encoder.read_flat(flat, off);
  off = m.cov_decoder.read_flat(flat, off);
  off = m.time_decoder.read_flat(flat, off);
  if (off != flat.size())
    throw std::invalid_argument("unflatten_weights: length mismatch");
}

std::vector<double> elbo_loss_gradient(const SurvivalVae& m, const Dataset& ds,
                                       std::span<const int> batch, const Matrix& eps) {
  ad::Tape tape;
  const GraphRefs g =
      build_elbo_graph(tape, m, make_batch(m, ds, batch), eps, nullptr, nullptr);
  tape.backward(tape.affine(g.elbo, -1.0, 0.0));
  std::vector<double> grads;
  append_grads(tape, g.enc, grads);
  append_grads(tape, g.dec_x, grads);
  append_grads(tape, g.dec_t, grads);
  return grads;
}

void ModelConfig::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("config: latent_dim must be >= 1");
  if (hidden_width < 1) throw std::invalid_argument("config: hidden_width must be >= 1");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    throw std::invalid_argument("config: keep_prob must be in (0, 1]");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("config: max_epochs must be >= 1");
  if (patience < 0) throw std::invalid_argument("config: patience must be >= 0");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("config: learning_rate must be > 0");
  if (min_delta < 0.0) throw std::invalid_argument("config: min_delta must be >= 0");
  if (mc_inference_samples < 0)
    throw std::invalid_argument("config: mc_inference_samples must be >= 0");
}

std::vector<double> SurvivalVae::preprocess(const SurvivalRecord& rec,
                                           const Dataset& ds) const {
  // Records from other files carry their own level indices; map by name
  // into the training-time ordering before one-hot expansion.
  SurvivalRecord mapped = rec;
  int cat_slot = 0;
  for (size_t fi = 0; fi < schema.features.size(); ++fi) {
    if (schema.features[fi].kind != FeatureKind::categorical) continue;
    const auto& ds_levels = ds.category_levels[cat_slot];
    const auto& my_levels = category_levels[cat_slot];
    const std::string& name = ds_levels[static_cast<int>(rec.x[fi])];
    const auto it = std::find(my_levels.begin(), my_levels.end(), name);
    if (it == my_levels.end())
      throw std::invalid_argument("feature '" + schema.features[fi].name +
                                  "': level '" + name +
                                  "' was not present at training time");
    mapped.x[fi] = static_cast<double>(it - my_levels.begin());
    ++cat_slot;
  }
  return preprocessor.transform(mapped, schema);
}

LatentGaussian SurvivalVae::encode(std::span<const double> x_pre) const {
  const std::vector<double> out = mlp_forward(encoder, x_pre);
  const int J = config.latent_dim;
  LatentGaussian q;
  q.mu.assign(out.begin(), out.begin() + J);
  q.log_var.assign(out.begin() + J, out.begin() + 2 * J);
  return q;
}

TimeParams SurvivalVae::decode_time(std::span<const double> z) const {
  const std::vector<double> raw = mlp_forward(time_decoder, z);
  if (config.time_family == TimeFamily::weibull)
    return TimeParams::weibull(ad::stable_softplus(raw[0]) + 1e-3,
                               ad::stable_softplus(raw[1]) + 1e-3);
  return TimeParams::exponential(ad::stable_softplus(raw[0]) + 1e-3);
}

std::vector<FeatureParams> SurvivalVae::decode_covariates(
    std::span<const double> z) const {
  const std::vector<double> raw = mlp_forward(cov_decoder, z);
  std::vector<FeatureParams> out;
  for (const HeadRange& h : head_layout(schema)) {
    switch (h.kind) {
      case FeatureKind::real:
        out.emplace_back(GaussianParams{
            raw[h.offset], ad::stable_softplus(raw[h.offset + 1]) + 1e-3});
        break;
      case FeatureKind::binary:
        out.emplace_back(BernoulliParams{ad::stable_sigmoid(raw[h.offset])});
        break;
      case FeatureKind::categorical: {
        CategoricalParams c;
        c.theta.resize(h.width);
        ad::softmax_row_inplace(raw.data() + h.offset, c.theta.data(), h.width);
        out.emplace_back(std::move(c));
        break;
      }
    }
  }
  return out;
}

TimeParams SurvivalVae::predict_time_params(std::span<const double> x_pre) const {
  const LatentGaussian q = encode(x_pre);
  if (config.mc_inference_samples <= 0) return decode_time(q.mu);
  // Average the decoded parameters over latent draws; seeded so repeated
  // calls agree.
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> normal(0.0, 1.0);
  double alpha = 0.0, lambda = 0.0;
  std::vector<double> eps(q.mu.size());
  for (int s = 0; s < config.mc_inference_samples; ++s) {
    for (double& e : eps) e = normal(rng);
    const TimeParams p = decode_time(reparameterize(q, eps));
    alpha += p.alpha;
    lambda += p.lambda;
  }
  const double ns = static_cast<double>(config.mc_inference_samples);
  TimeParams p = config.time_family == TimeFamily::weibull
                     ? TimeParams::weibull(alpha / ns, lambda / ns)
                     : TimeParams::exponential(lambda / ns);
  return p;
}

Matrix SurvivalVae::predict_cdf_matrix(const Dataset& ds, std::span<const int> subjects,
                                      std::span<const double> grid) const {
  for (size_t g = 0; g < grid.size(); ++g) {
    if (grid[g] < 0.0)
      throw std::invalid_argument("predict_cdf_matrix: grid times must be >= 0");
    if (g > 0 && grid[g] < grid[g - 1])
      throw std::invalid_argument("predict_cdf_matrix: grid must be ascending");
  }
  Matrix f(static_cast<int>(subjects.size()), static_cast<int>(grid.size()));
  for (size_t i = 0; i < subjects.size(); ++i) {
    const TimeParams p =
        predict_time_params(preprocess(ds.records[subjects[i]], ds));
    for (size_t g = 0; g < grid.size(); ++g)
      f(static_cast<int>(i), static_cast<int>(g)) =
          weibull_cdf(grid[g] / time_scale, p);
  }
  return f;
}

double SurvivalVae::elbo_batch(const Dataset& ds, std::span<const int> batch,
                              const Matrix& eps) const {
  if (batch.empty()) throw std::invalid_argument("elbo_batch: empty batch");
  if (eps.rows != static_cast<int>(batch.size()) || eps.cols != config.latent_dim)
    throw std::invalid_argument("elbo_batch: eps is " + eps.shape_str() +
                                ", expected " + std::to_string(batch.size()) + "x" +
                                std::to_string(config.latent_dim));
  ad::Tape tape;
  const GraphRefs g =
      build_elbo_graph(tape, *this, make_batch(*this, ds, batch), eps, nullptr, nullptr);
  const double v = tape.value(g.elbo)(0, 0);
  if (!std::isfinite(v)) {
    const Matrix& per_sample = tape.value(g.per_sample);
    for (int r = 0; r < per_sample.rows; ++r)
      if (!std::isfinite(per_sample(r, 0)))
        throw std::runtime_error("elbo_batch: non-finite ELBO for record " +
                                 std::to_string(batch[r]) + " (t=" +
                                 std::to_string(ds.records[batch[r]].t) + ", d=" +
                                 std::to_string(ds.records[batch[r]].d) + ")");
    throw std::runtime_error("elbo_batch: non-finite ELBO (" + std::to_string(v) + ")");
  }
  return v;
}

std::pair<SurvivalVae, TrainHistory> train_model(const Dataset& ds,
                                                std::span<const int> train_idx,
                                                std::span<const int> val_idx,
                                                const ModelConfig& config) {
  config.validate();
  ds.schema.validate();
  if (train_idx.empty() || val_idx.empty())
    throw std::invalid_argument("train_model: train and validation must be nonempty");

  SurvivalVae model;
  model.config = config;
  model.schema = ds.schema;
  model.category_levels = ds.category_levels;
  model.preprocessor = fit_preprocessor(ds, train_idx);
  model.time_scale = 0.0;
  for (int i : train_idx) model.time_scale = std::max(model.time_scale, ds.records[i].t);

  std::mt19937_64 rng(config.seed);
  model.encoder = glorot_init(encoder_spec(ds.schema, config), rng);
  model.cov_decoder = glorot_init(cov_decoder_spec(ds.schema, config), rng);
  model.time_decoder = glorot_init(time_decoder_spec(config), rng);

  std::vector<double> flat = flatten_weights(model);
  AdamState adam(flat.size(), AdamConfig{config.learning_rate});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const bool use_dropout = config.keep_prob < 1.0;
  const int J = config.latent_dim;
  const int hidden = config.hidden_width;
  const int n_train = static_cast<int>(train_idx.size());

  TrainHistory history;
  double best_val = -std::numeric_limits<double>::infinity();
  double stop_ref = -std::numeric_limits<double>::infinity();
  int last_improve_epoch = 0;
  MlpParams best_enc, best_dec_x, best_dec_t;
  std::vector<int> order(train_idx.begin(), train_idx.end());
  const Matrix eps_zero_val(static_cast<int>(val_idx.size()), J, 0.0);

  history.stop_reason = "max_epochs";
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_elbo = 0.0;
    int batch_no = 0;
    for (int start = 0; start < n_train; start += config.batch_size, ++batch_no) {
      const int b = std::min(config.batch_size, n_train - start);
      const std::span<const int> batch(order.data() + start, static_cast<size_t>(b));
      Matrix eps(b, J);
      for (double& e : eps.a) e = normal(rng);
      Matrix mask_x, mask_t;
      if (use_dropout) {
        mask_x = keep_mask(b, hidden, config.keep_prob, rng, unif);
        mask_t = keep_mask(b, hidden, config.keep_prob, rng, unif);
      }
      ad::Tape tape;
      const GraphRefs g = build_elbo_graph(tape, model, make_batch(model, ds, batch),
                                           eps, use_dropout ? &mask_x : nullptr,
                                           use_dropout ? &mask_t : nullptr);
      const double batch_elbo = tape.value(g.elbo)(0, 0);
      if (!std::isfinite(batch_elbo))
        throw std::runtime_error("train_model: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_no));
      const int loss = tape.affine(g.elbo, -1.0, 0.0);
      tape.backward(loss);
      std::vector<double> grads;
      grads.reserve(flat.size());
      append_grads(tape, g.enc, grads);
      append_grads(tape, g.dec_x, grads);
      append_grads(tape, g.dec_t, grads);
      flat = flatten_weights(model);
      try {
        adam_step(flat, grads, adam);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("train_model: epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_no) + ": " + e.what());
      }
      unflatten_weights(model, flat);
      epoch_elbo += batch_elbo * b;
    }
    history.train_elbo.push_back(epoch_elbo / n_train);

    const double val_elbo = model.elbo_batch(ds, val_idx, eps_zero_val);
    history.val_elbo.push_back(val_elbo);

    if (val_elbo > best_val) {
      best_val = val_elbo;
      history.best_epoch = epoch - 1;
      best_enc = model.encoder;
      best_dec_x = model.cov_decoder;
      best_dec_t = model.time_decoder;
    }
    if (val_elbo > stop_ref + config.min_delta) {
      stop_ref = val_elbo;
      last_improve_epoch = epoch;
    }
    if (epoch - last_improve_epoch >= config.patience) {
      history.stop_reason = "early_stop";
      break;
    }
  }

  model.encoder = std::move(best_enc);
  model.cov_decoder = std::move(best_dec_x);
  model.time_decoder = std::move(best_dec_t);
  return {std::move(model), std::move(history)};
}

namespace {
constexpr const char* kModelFormatVersion = "1.0";

std::string time_family_name(TimeFamily f) {
  return f == TimeFamily::weibull ? "weibull" : "exponential";
}

TimeFamily time_family_from(const std::string& s) {
  if (s == "weibull") return TimeFamily::weibull;
  if (s == "exponential") return TimeFamily::exponential;
  throw std::runtime_error("unknown time family: " + s);
}

void check_major_version(const std::string& version, const std::string& what) {
  const auto dot = version.find('.');
  const std::string major = version.substr(0, dot);
  const std::string expected(kModelFormatVersion);
  if (major != expected.substr(0, expected.find('.')))
    throw std::runtime_error(what + ": unsupported format version " + version);
}
}  // namespace

void SurvivalVae::save(const std::string& path) const {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = "vaesurv-model";
  j["config"] = {{"latent_dim", config.latent_dim},
                 {"hidden_width", config.hidden_width},
                 {"keep_prob", config.keep_prob},
                 {"max_epochs", config.max_epochs},
                 {"batch_size", config.batch_size},
                 {"learning_rate", config.learning_rate},
                 {"patience", config.patience},
                 {"min_delta", config.min_delta},
                 {"time_family", time_family_name(config.time_family)},
                 {"seed", config.seed},
                 {"mc_inference_samples", config.mc_inference_samples}};
  j["schema"] = json::parse(schema.to_json_string());
  j["schema_hash"] = schema.hash();
  j["category_levels"] = category_levels;
  j["preprocessor"] = {{"mean", preprocessor.mean}, {"sd", preprocessor.sd}};
  j["time_scale"] = time_scale;
  j["weights"] = {{"encoder", mlp_to_json(encoder)},
                  {"cov_decoder", mlp_to_json(cov_decoder)},
                  {"time_decoder", mlp_to_json(time_decoder)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << j.dump(2) << "\n";
}

SurvivalVae SurvivalVae::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("model file " + path + ": " + e.what());
  }
  check_major_version(j.at("format_version").get<std::string>(), "model file " + path);

  SurvivalVae m;
  const json& jc = j.at("config");
  m.config.latent_dim = jc.at("latent_dim").get<int>();
  m.config.hidden_width = jc.at("hidden_width").get<int>();
  m.config.keep_prob = jc.at("keep_prob").get<double>();
  m.config.max_epochs = jc.at("max_epochs").get<int>();
  m.config.batch_size = jc.at("batch_size").get<int>();
  m.config.learning_rate = jc.at("learning_rate").get<double>();
  m.config.patience = jc.at("patience").get<int>();
  m.config.min_delta = jc.at("min_delta").get<double>();
  m.config.time_family = time_family_from(jc.at("time_family").get<std::string>());
  m.config.seed = jc.at("seed").get<uint64_t>();
  m.config.mc_inference_samples = jc.at("mc_inference_samples").get<int>();
  m.config.validate();

  {
    // Round-trip the schema through a temporary file-less parse.
    const json& js = j.at("schema");
    m.schema.time_column = js.at("time_column").get<std::string>();
    m.schema.event_column = js.at("event_column").get<std::string>();
    m.schema.time_unit = js.value("time_unit", "");
    for (const auto& jf : js.at("features")) {
      Feature f;
      f.name = jf.at("name").get<std::string>();
      const std::string kind = jf.at("kind").get<std::string>();
      f.kind = kind == "real" ? FeatureKind::real
               : kind == "binary" ? FeatureKind::binary
                                  : FeatureKind::categorical;
      if (f.kind == FeatureKind::categorical) f.levels = jf.at("levels").get<int>();
      m.schema.features.push_back(std::move(f));
    }
    m.schema.validate();
  }
  if (j.at("schema_hash").get<uint64_t>() != m.schema.hash())
    throw std::runtime_error("model file " + path + ": schema hash mismatch");

  m.category_levels = j.at("category_levels").get<std::vector<std::vector<std::string>>>();
  m.preprocessor.mean = j.at("preprocessor").at("mean").get<std::vector<double>>();
  m.preprocessor.sd = j.at("preprocessor").at("sd").get<std::vector<double>>();
  m.time_scale = j.at("time_scale").get<double>();
  m.encoder = mlp_from_json(j.at("weights").at("encoder"),
                            encoder_spec(m.schema, m.config));
  m.cov_decoder = mlp_from_json(j.at("weights").at("cov_decoder"),
                                cov_decoder_spec(m.schema, m.config));
  m.time_decoder =
      mlp_from_json(j.at("weights").at("time_decoder"), time_decoder_spec(m.config));
  return m;
}

}  // namespace vaesurv
