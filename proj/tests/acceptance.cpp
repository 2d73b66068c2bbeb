// Acceptance suite: runs every gate criterion end to end and prints one
// PASS/FAIL/SKIP line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "vaesurv/autodiff.hpp"
#include "vaesurv/data.hpp"
#include "vaesurv/distributions.hpp"
#include "vaesurv/metrics.hpp"
#include "vaesurv/model.hpp"
#include "vaesurv/results.hpp"

using namespace vaesurv;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  std::printf("[%s] %d. %s (%s)\n", pass ? "PASS" : "FAIL", id, what.c_str(),
              detail.c_str());
  if (!pass) ++g_failures;
}

void report_skip(int id, const std::string& what, const std::string& why) {
  std::printf("[SKIP] %d. %s (%s)\n", id, what.c_str(), why.c_str());
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Dataset gradient_check_dataset(int n, uint64_t seed) {
  Dataset ds;
  ds.schema.features = {{"a", FeatureKind::real, 0},
                        {"b", FeatureKind::real, 0},
                        {"flag", FeatureKind::binary, 0},
                        {"grade", FeatureKind::categorical, 3}};
  ds.schema.time_column = "time";
  ds.schema.event_column = "event";
  ds.schema.time_unit = "days";
  ds.category_levels.push_back({"g0", "g1", "g2"});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    SurvivalRecord r;
    r.x = {normal(rng), normal(rng), u(rng) < 0.5 ? 1.0 : 0.0,
           std::floor(u(rng) * 3.0)};
    r.t = 0.5 + 4.0 * u(rng);
    r.d = u(rng) < 0.65 ? 1 : 0;
    ds.records.push_back(r);
  }
  return ds;
}

// ---- criterion 1: gradient correctness --------------------------------

void criterion_1() {
  const double t0 = now_seconds();
  const Dataset ds = gradient_check_dataset(16, 101);
  std::vector<int> idx(16);
  std::iota(idx.begin(), idx.end(), 0);
  ModelConfig cfg;
  cfg.latent_dim = 2;
  cfg.hidden_width = 8;
  cfg.max_epochs = 1;
  cfg.patience = 0;
  cfg.batch_size = 16;
  cfg.seed = 7;
  const std::vector<int> tr(idx.begin(), idx.begin() + 14);
  const std::vector<int> va(idx.begin() + 14, idx.end());
  const SurvivalVae model = train_model(ds, tr, va, cfg).first;

  std::mt19937_64 rng(55);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix eps(16, 2);
  for (double& e : eps.a) e = normal(rng);

  const auto analytic = elbo_loss_gradient(model, ds, idx, eps);
  auto f = [&](const std::vector<double>& p) {
    SurvivalVae probe = model;
    unflatten_weights(probe, p);
    return -probe.elbo_batch(ds, idx, eps);
  };
  const auto numeric = ad::finite_diff_gradient(f, flatten_weights(model), 1e-5);
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) /
                                std::max(1.0, std::fabs(numeric[i])));
  const double elapsed = now_seconds() - t0;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "max rel err %.3g over %zu params, %.2f s", worst, analytic.size(),
                elapsed);
  report(1, worst < 1e-4 && elapsed < 10.0, "gradient matches finite differences",
         detail);
}

// ---- criterion 2: KL identity ------------------------------------------

void criterion_2() {
  const bool zero_exact = kl_std_normal({{0.0}, {0.0}}) == 0.0;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> um(-2.0, 2.0), us(0.5, 2.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    const double mu = um(rng), sigma = us(rng);
    const double lv = std::log(sigma * sigma);
    double acc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n / 2; ++i) {
      const double e = normal(rng);
      for (double u : {e, -e}) {
        const double z = mu + sigma * u;
        acc += (-0.5 * lv - 0.5 * u * u) - (-0.5 * z * z);
      }
    }
    worst = std::max(worst, std::fabs(kl_std_normal({{mu}, {lv}}) - acc / n));
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "max |analytic - MC| = %.3g over 20 cases; KL(0,1) exact: %s", worst,
                zero_exact ? "yes" : "no");
  report(2, worst < 5e-3 && zero_exact, "closed-form KL matches Monte Carlo", detail);
}

// ---- criterion 3: Weibull identity --------------------------------------

void criterion_3() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.2, 4.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double t = u(rng), a = u(rng), lam = u(rng);
    const double direct = std::log(a) - std::log(lam) +
                          (a - 1.0) * std::log(t / lam) - std::pow(t / lam, a);
    worst = std::max(worst, std::fabs(censored_time_loglik(
                                t, 1, TimeParams::weibull(a, lam)) -
                            direct));
  }
  bool exp_bitwise = true;
  for (int i = 0; i < 200; ++i) {
    const double t = u(rng), lam = u(rng);
    const auto pw = TimeParams::weibull(1.0, lam);
    const auto pe = TimeParams::exponential(lam);
    exp_bitwise = exp_bitwise &&
                  censored_time_loglik(t, 1, pw) == censored_time_loglik(t, 1, pe) &&
                  weibull_cdf(t, pw) == weibull_cdf(t, pe) &&
                  weibull_log_survival(t, pw) == weibull_log_survival(t, pe);
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "max |log p - (log h + log S)| = %.3g; exponential bitwise: %s", worst,
                exp_bitwise ? "yes" : "no");
  report(3, worst < 1e-10 && exp_bitwise, "hazard-survival factorization", detail);
}

// ---- criterion 4: metric sanity ------------------------------------------

void criterion_4() {
  bool ok = true;
  std::string detail;

  {  // perfectly ordered risks
    const int n = 80;
    std::vector<double> times(n), grid;
    std::vector<int> events(n, 1);
    for (int i = 0; i < n; ++i) {
      times[i] = i + 1.0;
      grid.push_back(i + 1.0);
    }
    Matrix f(n, n);
    for (int i = 0; i < n; ++i)
      for (int g = 0; g < n; ++g)
        f(i, g) = weibull_cdf(grid[g], TimeParams::weibull(1.0, times[i]));
    const auto c = td_c_index(f, grid, times, events);
    ok = ok && c && std::fabs(*c - 1.0) < 1e-12;
    detail += "perfect C=" + std::to_string(c.value_or(-1));
  }
  {  // random risks, N = 10,000
    const int n = 10000;
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> ur(0.5, 2.0);
    std::vector<double> times(n), grid;
    std::vector<int> events(n, 1);
    std::vector<double> rate(n);
    for (int i = 0; i < n; ++i) {
      times[i] = static_cast<double>(i % 100 + 1);
      rate[i] = ur(rng);
    }
    for (int g = 1; g <= 100; ++g) grid.push_back(g);
    Matrix f(n, 100);
    for (int i = 0; i < n; ++i)
      for (int g = 0; g < 100; ++g) f(i, g) = 1.0 - std::exp(-rate[i] * grid[g]);
    const auto c = td_c_index(f, grid, times, events);
    ok = ok && c && std::fabs(*c - 0.5) < 0.02;
    detail += ", random C=" + std::to_string(c.value_or(-1));
  }
  {  // hand-computed KM
    const KMCurve km = kaplan_meier(std::vector<double>{1, 2, 3, 4},
                                    std::vector<int>{1, 0, 1, 0});
    ok = ok && std::fabs(km.eval(1) - 0.75) < 1e-15 &&
         std::fabs(km.eval(2) - 0.75) < 1e-15 && std::fabs(km.eval(3) - 0.375) < 1e-15;
  }
  {  // hand-computed IPCW Brier toy
    const std::vector<double> times{1, 2, 3};
    const std::vector<int> events{1, 0, 1};
    const KMCurve g = censoring_survival(times, events);
    const std::vector<double> s{0.2, 0.5, 0.8};
    const double want = (0.2 * 0.2 / 1.0 + (1.0 - 0.8) * (1.0 - 0.8) / 0.5) / 3.0;
    const double got = brier_score(s, times, events, g, 2.5);
    ok = ok && std::fabs(got - want) < 1e-12;
    detail += ", brier toy |err|=" + std::to_string(std::fabs(got - want));
  }
  report(4, ok, "metric sanity checks", detail);
}

// ---- criterion 5 + 8: synthetic end-to-end and determinism ---------------

struct SynthRun {
  double c_star = 0.0;
  double i_star = 0.0;
  ResultsFile results;
  double elapsed = 0.0;
};

SynthRun run_synthetic_protocol() {
  SynthRun out;
  SynthSpec spec;
  spec.n = 2000;
  spec.p = 5;
  spec.alpha_true = 1.5;
  spec.censor_fraction = 0.3;
  spec.seed = 424242;
  const SynthResult synth = synth_generate(spec);
  const Dataset& ds = synth.dataset;

  RunConfig cfg;
  cfg.dataset_name = "synthetic-oracle";
  cfg.k_folds = 5;
  cfg.seed_count = 10;
  cfg.best_seed_count = 3;
  cfg.seed = 20240817;
  cfg.jobs = 0;

  // True-model metrics over the same folds the protocol will use.
  const FoldPlan plan = kfold_split(ds, cfg.k_folds, cfg.seed);
  double c_sum = 0.0, i_sum = 0.0;
  for (int f = 0; f < cfg.k_folds; ++f) {
    const auto& test_idx = plan.test[f];
    std::vector<double> times;
    std::vector<int> events;
    double t_max = 0.0;
    for (int i : test_idx) {
      times.push_back(ds.records[i].t);
      events.push_back(ds.records[i].d);
      t_max = std::max(t_max, ds.records[i].t);
    }
    std::vector<double> c_grid;
    for (int i : test_idx)
      if (ds.records[i].d == 1) c_grid.push_back(ds.records[i].t);
    std::sort(c_grid.begin(), c_grid.end());
    c_grid.erase(std::unique(c_grid.begin(), c_grid.end()), c_grid.end());

    Matrix f_true(static_cast<int>(test_idx.size()), static_cast<int>(c_grid.size()));
    for (size_t i = 0; i < test_idx.size(); ++i)
      for (size_t g = 0; g < c_grid.size(); ++g)
        f_true(static_cast<int>(i), static_cast<int>(g)) = weibull_cdf(
            c_grid[g],
            TimeParams::weibull(spec.alpha_true, synth.true_lambda[test_idx[i]]));
    c_sum += td_c_index(f_true, c_grid, times, events).value();

    const auto grid = ibs_grid(t_max, cfg.ibs_grid_points);
    Matrix surv(static_cast<int>(test_idx.size()), static_cast<int>(grid.size()));
    for (size_t i = 0; i < test_idx.size(); ++i)
      for (size_t g = 0; g < grid.size(); ++g)
        surv(static_cast<int>(i), static_cast<int>(g)) =
            std::exp(weibull_log_survival(
                grid[g], TimeParams::weibull(spec.alpha_true,
                                             synth.true_lambda[test_idx[i]])));
    i_sum += ibs(surv, grid, times, events, censoring_survival(times, events));
  }
  out.c_star = c_sum / cfg.k_folds;
  out.i_star = i_sum / cfg.k_folds;

  const double t0 = now_seconds();
  out.results = run_cv(cfg, ds);
  out.elapsed = now_seconds() - t0;
  return out;
}

void criterion_5_and_8() {
  const SynthRun run1 = run_synthetic_protocol();
  const double mean_c = run1.results.report.cindex.mean;
  const double mean_i = run1.results.report.ibs.mean;
  bool early_stopped = true;
  for (const auto& s : run1.results.report.seeds)
    early_stopped = early_stopped && s.epochs_run < 3000;
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "C=%.4f vs C*=%.4f (floor %.4f); IBS=%.4f vs I*=%.4f (cap %.4f); "
                "%.0f s, status %s, all runs early-stopped: %s",
                mean_c, run1.c_star, run1.c_star - 0.05, mean_i, run1.i_star,
                run1.i_star + 0.03, run1.elapsed, run1.results.status.c_str(),
                early_stopped ? "yes" : "no");
  const bool pass5 = run1.results.status == "ok" && mean_c >= run1.c_star - 0.05 &&
                     mean_i <= run1.i_star + 0.03 && run1.elapsed < 600.0 &&
                     early_stopped;
  report(5, pass5, "synthetic end-to-end protocol", detail);
  if (const char* out_dir = std::getenv("VAESURV_OUT")) {
    fs::create_directories(out_dir);
    run1.results.save((fs::path(out_dir) / "acceptance_results.json").string());
  }

  const SynthRun run2 = run_synthetic_protocol();
  const bool same = run1.results.canonical_content() == run2.results.canonical_content();
  report(8, same, "repeated protocol run is bit-identical",
         same ? "canonical results content matches"
              : "canonical results content differs");
}

// ---- criterion 6: paper-scale reproduction (conditional) ------------------

struct Band {
  const char* name;
  double c_lo, c_hi;
  bool check_ibs;
  double i_lo, i_hi;
};

void criterion_6() {
  const char* env = std::getenv("VAESURV_DATA_DIR");
  const std::string data_dir = env ? env : "data";
  const Band bands[] = {{"gbsg", 0.62, 0.72, true, 0.14, 0.22},
                        {"metabric", 0.53, 0.70, false, 0, 0},
                        {"flchain", 0.75, 0.83, false, 0, 0}};
  bool any = false;
  for (const Band& b : bands) {
    const std::string csv = data_dir + "/" + b.name + ".csv";
    const std::string schema = data_dir + "/" + b.name + ".schema.json";
    if (!fs::exists(csv) || !fs::exists(schema)) continue;
    any = true;
    RunConfig cfg;
    cfg.dataset_path = csv;
    cfg.schema_path = schema;
    cfg.dataset_name = b.name;
    cfg.seed = 20240817;
    const Dataset ds = load_dataset(csv, schema);
    const ResultsFile res = run_cv(cfg, ds);
    const double c = res.report.cindex.mean, i = res.report.ibs.mean;
    const bool ok = res.status == "ok" && c >= b.c_lo && c <= b.c_hi &&
                    (!b.check_ibs || (i >= b.i_lo && i <= b.i_hi));
    char detail[160];
    std::snprintf(detail, sizeof(detail), "%s: C=%.3f in [%.2f, %.2f]%s", b.name, c,
                  b.c_lo, b.c_hi,
                  b.check_ibs ? (" IBS=" + std::to_string(i)).c_str() : "");
    report(6, ok, "benchmark reproduction band", detail);
  }
  if (!any)
    report_skip(6, "benchmark reproduction band",
                "no benchmark CSVs found under " + data_dir +
                    "; supply <name>.csv and <name>.schema.json to enable");
}

// ---- criterion 7: mean-reciprocal-rank reproduction ------------------------

void criterion_7() {
  // Published mean C-indexes: 9 datasets x 4 models, candidate last.
  const double table[9][4] = {
      {0.74, 0.78, 0.89, 0.74}, {0.58, 0.57, 0.55, 0.61}, {0.66, 0.67, 0.66, 0.67},
      {0.69, 0.67, 0.78, 0.79}, {0.71, 0.70, 0.72, 0.71}, {0.59, 0.61, 0.56, 0.61},
      {0.81, 0.80, 0.80, 0.81}, {0.60, 0.60, 0.59, 0.59}, {0.62, 0.65, 0.67, 0.65}};
  const char* models[4] = {"coxph", "deepsurv", "deephit", "candidate"};
  const char* datasets[9] = {"whas", "support", "gbsg",     "flchain", "nwtco",
                             "metabric", "pbc",  "std",     "pneumon"};
  std::vector<MetricRow> rows;
  for (int d = 0; d < 9; ++d)
    for (int m = 0; m < 4; ++m)
      rows.push_back({models[m], datasets[d], 0, table[d][m], 0.0});
  const CompareReport rep = compare_models(rows, "candidate");
  const double got = rep.models[0].mrr_cindex;
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "candidate MRR %.4f vs published 0.76 +- 0.05; ties share the "
                "minimum rank, so rounded means land slightly below the "
                "published value",
                got);
  report(7, std::fabs(got - 0.76) < 0.05, "mean reciprocal rank reproduction",
         detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5_and_8();
  criterion_6();
  criterion_7();
  if (g_failures > 0) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed (conditional ones may be skipped)\n");
  return 0;
}
