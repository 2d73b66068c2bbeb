#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vaesurv/data.hpp"
#include "vaesurv/metrics.hpp"
#include "vaesurv/model.hpp"
#include "vaesurv/results.hpp"

namespace fs = std::filesystem;
using namespace vaesurv;

namespace {

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

void add_model_flags(CLI::App* cmd, ModelConfig& mc, std::string& family) {
  cmd->add_option("--latent-dim", mc.latent_dim, "latent dimension J");
  cmd->add_option("--hidden", mc.hidden_width, "hidden layer width");
  cmd->add_option("--keep-prob", mc.keep_prob, "dropout keep-probability");
  cmd->add_option("--epochs", mc.max_epochs, "maximum training epochs");
  cmd->add_option("--batch-size", mc.batch_size, "mini-batch size");
  cmd->add_option("--lr", mc.learning_rate, "Adam learning rate");
  cmd->add_option("--patience", mc.patience, "early-stop patience in epochs");
  cmd->add_option("--min-delta", mc.min_delta, "early-stop min improvement");
  cmd->add_option("--family", family, "time family: weibull or exponential")
      ->check(CLI::IsMember({"weibull", "exponential"}));
  cmd->add_option("--mc-samples", mc.mc_inference_samples,
                  "average predicted parameters over this many latent draws");
}

TimeFamily family_of(const std::string& s) {
  return s == "exponential" ? TimeFamily::exponential : TimeFamily::weibull;
}

struct DatasetMetrics {
  double c_index = -1.0;
  double ibs_value = 0.0;
};

DatasetMetrics evaluate_on(const SurvivalVae& model, const Dataset& ds,
                           int ibs_grid_points) {
  std::vector<int> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> times;
  std::vector<int> events;
  double t_max = 0.0;
  std::vector<double> c_grid;
  for (const auto& r : ds.records) {
    times.push_back(r.t);
    events.push_back(r.d);
    t_max = std::max(t_max, r.t);
    if (r.d == 1) c_grid.push_back(r.t);
  }
  std::sort(c_grid.begin(), c_grid.end());
  c_grid.erase(std::unique(c_grid.begin(), c_grid.end()), c_grid.end());

  DatasetMetrics out;
  const auto c =
      td_c_index(model.predict_cdf_matrix(ds, idx, c_grid), c_grid, times, events);
  out.c_index = c.value_or(-1.0);
  const auto grid = ibs_grid(t_max, ibs_grid_points);
  Matrix surv = model.predict_cdf_matrix(ds, idx, grid);
  for (double& v : surv.a) v = 1.0 - v;
  out.ibs_value = ibs(surv, grid, times, events, censoring_survival(times, events));
  return out;
}

int cmd_cv(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  if (cfg.dataset_name.empty()) cfg.dataset_name = stem_of(cfg.dataset_path);
  cfg.validate();
  const Dataset ds = load_dataset(cfg.dataset_path, cfg.schema_path);
  fs::create_directories(cfg.output_dir);
  const ResultsFile results = run_cv(cfg, ds);
  results.save((fs::path(cfg.output_dir) / "results.json").string());
  print_results_table(results);
  std::printf("results written to %s\n",
              (fs::path(cfg.output_dir) / "results.json").string().c_str());
  return results.status == "ok" ? 0 : 1;
}

int cmd_train(const std::string& dataset_path, const std::string& schema_path,
              const std::string& out_dir, double val_fraction, ModelConfig mc) {
  const Dataset ds = load_dataset(dataset_path, schema_path);
  std::vector<int> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto [train_idx, val_idx] = stratified_holdout(ds, idx, val_fraction, mc.seed);
  auto [model, history] = train_model(ds, train_idx, val_idx, mc);
  fs::create_directories(out_dir);
  model.save((fs::path(out_dir) / "model.json").string());
  nlohmann::json jh;
  jh["format_version"] = "1.0";
  jh["train_elbo"] = history.train_elbo;
  jh["val_elbo"] = history.val_elbo;
  jh["best_epoch"] = history.best_epoch;
  jh["stop_reason"] = history.stop_reason;
  std::ofstream out(fs::path(out_dir) / "history.json");
  out << jh.dump(2) << "\n";
  std::printf("trained %zu epochs (best %d, %s); model written to %s\n",
              history.val_elbo.size(), history.best_epoch,
              history.stop_reason.c_str(),
              (fs::path(out_dir) / "model.json").string().c_str());
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& dataset_path,
             const std::string& schema_path, const std::string& out_dir,
             int ibs_grid_points) {
  const SurvivalVae model = SurvivalVae::load(model_path);
  const FeatureSchema schema = FeatureSchema::load_file(schema_path);
  if (schema.hash() != model.schema_hash())
    throw std::runtime_error("eval: dataset schema does not match the model's schema");
  const Dataset ds = load_dataset(dataset_path, schema);
  const DatasetMetrics m = evaluate_on(model, ds, ibs_grid_points);

  fs::create_directories(out_dir);
  std::ofstream pred(fs::path(out_dir) / "predictions.csv");
  pred << "subject,alpha,lambda\n";
  for (int i = 0; i < ds.size(); ++i) {
    const TimeParams p = to_original_units(
        model.predict_time_params(model.preprocess(ds.records[i], ds)),
        model.time_scale);
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", i, p.alpha, p.lambda);
    pred << buf;
  }
  nlohmann::json je;
  je["format_version"] = "1.0";
  je["c_index"] = m.c_index;
  je["ibs"] = m.ibs_value;
  je["n"] = ds.size();
  je["time_unit"] = schema.time_unit;
  std::ofstream out(fs::path(out_dir) / "eval.json");
  out << je.dump(2) << "\n";
  std::printf("n=%d  C-index=%.4f  IBS=%.4f  (times in %s)\n", ds.size(), m.c_index,
              m.ibs_value, schema.time_unit.empty() ? "?" : schema.time_unit.c_str());
  return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_base) {
  const SynthResult res = synth_generate(spec);
  fs::create_directories(fs::path(out_base).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out_base).parent_path());
  write_synth(res, out_base);
  std::printf("synthetic dataset: n=%d p=%d censored=%.1f%% -> %s.csv\n", spec.n,
              spec.p, 100.0 * res.dataset.censored_fraction(), out_base.c_str());
  return 0;
}

int cmd_compare(const std::vector<std::string>& ours_files,
                const std::string& ours_csv, const std::string& ours_name,
                const std::string& baselines_csv, const std::string& out_dir) {
  std::vector<MetricRow> rows;
  for (const auto& f : ours_files) {
    const ResultsFile r = ResultsFile::load(f);
    const auto extra = rows_from_results(r, ours_name);
    rows.insert(rows.end(), extra.begin(), extra.end());
  }
  if (!ours_csv.empty()) {
    const auto extra = load_metrics_csv(ours_csv);
    rows.insert(rows.end(), extra.begin(), extra.end());
  }
  const auto base = load_metrics_csv(baselines_csv);
  rows.insert(rows.end(), base.begin(), base.end());
  const CompareReport rep = compare_models(rows, ours_name);
  print_compare_tables(rep);
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "compare.json");
  out << rep.to_json_string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational autoencoder toolkit for censored time-to-event data"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read defaults from a config file");

  // cv
  RunConfig cv_cfg;
  std::string cv_family = "weibull";
  auto* cv = app.add_subcommand("cv", "cross-validated train + evaluate protocol");
  cv->add_option("--dataset", cv_cfg.dataset_path, "dataset CSV")->required();
  cv->add_option("--schema", cv_cfg.schema_path, "schema JSON")->required();
  cv->add_option("--name", cv_cfg.dataset_name, "dataset name for reports");
  cv->add_option("--out", cv_cfg.output_dir, "output directory")
      ->envname("VAESURV_OUT");
  cv->add_option("--k", cv_cfg.k_folds, "number of folds");
  cv->add_option("--seeds", cv_cfg.seed_count, "seeds per fold");
  cv->add_option("--best", cv_cfg.best_seed_count, "best seeds to average");
  cv->add_option("--ibs-grid", cv_cfg.ibs_grid_points, "IBS integration grid size");
  cv->add_option("--seed", cv_cfg.seed, "master seed");
  cv->add_option("--jobs", cv_cfg.jobs, "parallel workers (0 = auto)");
  std::string select_by = "validation";
  cv->add_option("--select-by", select_by, "seed ranking metric")
      ->check(CLI::IsMember({"validation", "test"}));
  add_model_flags(cv, cv_cfg.model, cv_family);

  // train
  std::string tr_dataset, tr_schema, tr_out = ".";
  double tr_val_fraction = 0.2;
  ModelConfig tr_cfg;
  std::string tr_family = "weibull";
  auto* tr = app.add_subcommand("train", "train one model on an explicit split");
  tr->add_option("--dataset", tr_dataset, "dataset CSV")->required();
  tr->add_option("--schema", tr_schema, "schema JSON")->required();
  tr->add_option("--out", tr_out, "output directory")->envname("VAESURV_OUT");
  tr->add_option("--val-fraction", tr_val_fraction, "validation fraction");
  tr->add_option("--seed", tr_cfg.seed, "training seed");
  add_model_flags(tr, tr_cfg, tr_family);

  // eval
  std::string ev_model, ev_dataset, ev_schema, ev_out = ".";
  int ev_ibs_grid = 100;
  auto* ev = app.add_subcommand("eval", "evaluate a saved model on a dataset");
  ev->add_option("--model", ev_model, "model JSON")->required();
  ev->add_option("--dataset", ev_dataset, "dataset CSV")->required();
  ev->add_option("--schema", ev_schema, "schema JSON")->required();
  ev->add_option("--out", ev_out, "output directory")->envname("VAESURV_OUT");
  ev->add_option("--ibs-grid", ev_ibs_grid, "IBS integration grid size");

  // synth
  SynthSpec sy_spec;
  std::string sy_out = "synth";
  std::vector<double> sy_beta;
  auto* sy = app.add_subcommand("synth", "generate a synthetic dataset with truth");
  sy->add_option("--n", sy_spec.n, "number of subjects");
  sy->add_option("--p", sy_spec.p, "number of real covariates");
  sy->add_option("--alpha", sy_spec.alpha_true, "true Weibull shape");
  sy->add_option("--lambda0", sy_spec.lambda0, "baseline scale");
  sy->add_option("--beta", sy_beta, "coefficients (defaults to alternating +-0.15)");
  sy->add_option("--censoring", sy_spec.censor_fraction, "target censoring fraction");
  sy->add_option("--seed", sy_spec.seed, "generator seed");
  sy->add_option("--out", sy_out, "output base path (writes .csv/.schema.json/.truth.json)")
      ->envname("VAESURV_OUT");

  // compare
  std::vector<std::string> cp_ours;
  std::string cp_ours_csv, cp_ours_name = "vaesurv", cp_baselines, cp_out = ".";
  auto* cp = app.add_subcommand("compare", "rank models and test mean differences");
  cp->add_option("--ours", cp_ours, "results.json files of this toolkit (repeatable)");
  cp->add_option("--ours-csv", cp_ours_csv,
                 "alternatively, our per-fold metrics as CSV rows");
  cp->add_option("--ours-name", cp_ours_name, "model name used for our rows");
  cp->add_option("--baselines", cp_baselines,
                 "CSV with columns model,dataset,fold,c_index,ibs")
      ->required();
  cp->add_option("--out", cp_out, "output directory")->envname("VAESURV_OUT");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cv->parsed()) {
      cv_cfg.model.time_family = family_of(cv_family);
      cv_cfg.select_by = select_by == "test" ? SeedSelection::by_test
                                             : SeedSelection::by_validation;
      return cmd_cv(cv_cfg);
    }
    if (tr->parsed()) {
      tr_cfg.time_family = family_of(tr_family);
      return cmd_train(tr_dataset, tr_schema, tr_out, tr_val_fraction, tr_cfg);
    }
    if (ev->parsed()) return cmd_eval(ev_model, ev_dataset, ev_schema, ev_out, ev_ibs_grid);
    if (sy->parsed()) {
      sy_spec.beta = sy_beta;
      return cmd_synth(sy_spec, sy_out);
    }
    if (cp->parsed())
      return cmd_compare(cp_ours, cp_ours_csv, cp_ours_name, cp_baselines, cp_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
