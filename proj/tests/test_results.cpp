#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "doctest.h"
#include "vaesurv/data.hpp"
#include "vaesurv/results.hpp"

using namespace vaesurv;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_run_config() {
  RunConfig cfg;
  cfg.dataset_name = "tiny";
  cfg.k_folds = 3;
  cfg.seed_count = 2;
  cfg.best_seed_count = 1;
  cfg.ibs_grid_points = 50;
  cfg.seed = 99;
  cfg.jobs = 1;
  cfg.model.latent_dim = 2;
  cfg.model.hidden_width = 8;
  cfg.model.max_epochs = 40;
  cfg.model.patience = 8;
  cfg.model.batch_size = 32;
  return cfg;
}

Dataset tiny_synth() {
  SynthSpec spec;
  spec.n = 150;
  spec.p = 3;
  spec.censor_fraction = 0.25;
  spec.seed = 5;
  return synth_generate(spec).dataset;
}

// Student-t upper tail by Simpson quadrature, independent of the library's
// incomplete-beta route.
double t_pdf(double x, double dof) {
  return std::exp(std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof)) /
         std::sqrt(dof * M_PI) * std::pow(1.0 + x * x / dof, -0.5 * (dof + 1.0));
}

double t_upper_tail(double t, double dof) {
  const double b = std::fabs(t);
  const int n = 4000;
  double integral = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x0 = b * i / n, x1 = b * (i + 1) / n;
    integral += (x1 - x0) / 6.0 *
                (t_pdf(x0, dof) + 4.0 * t_pdf(0.5 * (x0 + x1), dof) + t_pdf(x1, dof));
  }
  return t >= 0.0 ? 0.5 - integral : 0.5 + integral;
}

}  // namespace

TEST_CASE("cross-validation runner") {
  const Dataset ds = tiny_synth();
  const RunConfig cfg = tiny_run_config();
  const ResultsFile res = run_cv(cfg, ds);

  SUBCASE("all jobs complete and the fold aggregate structure is sound") {
    CHECK(res.status == "ok");
    CHECK(res.failures.empty());
    CHECK(res.report.seeds.size() == 6);  // 3 folds x 2 seeds
    REQUIRE(res.report.folds.size() == 3);
    int selected = 0;
    for (const auto& s : res.report.seeds) selected += s.selected;
    CHECK(selected == 3);  // best 1 per fold
    CHECK(res.report.cindex.min <= res.report.cindex.mean);
    CHECK(res.report.cindex.mean <= res.report.cindex.max);
  }
  SUBCASE("aggregates recompute exactly from the stored per-seed entries") {
    EvalReport copy;
    copy.seeds = res.report.seeds;
    copy.recompute_aggregates(cfg.best_seed_count);
    REQUIRE(copy.folds.size() == res.report.folds.size());
    for (size_t f = 0; f < copy.folds.size(); ++f) {
      CHECK(copy.folds[f].cindex == res.report.folds[f].cindex);
      CHECK(copy.folds[f].ibs == res.report.folds[f].ibs);
    }
    CHECK(copy.cindex.mean == res.report.cindex.mean);
  }
  SUBCASE("rerunning with the same config gives identical canonical content") {
    const ResultsFile res2 = run_cv(cfg, ds);
    CHECK(res.canonical_content() == res2.canonical_content());
  }
  SUBCASE("seed count one with best one degenerates to plain k-fold") {
    RunConfig c1 = tiny_run_config();
    c1.seed_count = 1;
    c1.best_seed_count = 1;
    const ResultsFile r1 = run_cv(c1, ds);
    CHECK(r1.report.seeds.size() == 3);
    for (const auto& s : r1.report.seeds) CHECK(s.selected);
    for (size_t f = 0; f < r1.report.folds.size(); ++f)
      CHECK(r1.report.folds[f].cindex == r1.report.seeds[f].test_cindex);
  }
  SUBCASE("results files round trip through json") {
    const std::string text = res.to_json_string();
    const ResultsFile back = ResultsFile::from_json_string(text);
    CHECK(back.canonical_content() == res.canonical_content());
    CHECK(back.config.seed == cfg.seed);
  }
  SUBCASE("unknown major version is rejected") {
    std::string text = res.to_json_string();
    const auto pos = text.find("\"format_version\": \"1.0\"");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, std::string("\"format_version\": \"1.0\"").size(),
                 "\"format_version\": \"9.1\"");
    CHECK_THROWS_WITH_AS(ResultsFile::from_json_string(text),
                         doctest::Contains("version"), std::runtime_error);
  }
}

TEST_CASE("failing folds leave a machine-readable marker") {
  // Every observed time identical: no admissible C-index pairs anywhere, so
  // every job fails its test evaluation.
  Dataset ds;
  ds.schema.features = {{"x0", FeatureKind::real, 0}};
  ds.schema.time_column = "time";
  ds.schema.event_column = "event";
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 60; ++i) {
    SurvivalRecord r;
    r.x = {normal(rng)};
    r.t = 5.0;
    r.d = i % 2;
    ds.records.push_back(r);
  }
  RunConfig cfg = tiny_run_config();
  cfg.k_folds = 2;
  cfg.seed_count = 1;
  cfg.best_seed_count = 1;
  cfg.model.max_epochs = 3;
  const ResultsFile res = run_cv(cfg, ds);
  CHECK(res.status == "partial_failure");
  CHECK(res.failures.size() == 2);
  CHECK(res.failures[0].error.find("admissible") != std::string::npos);
  // The failure marker survives serialization.
  const ResultsFile back = ResultsFile::from_json_string(res.to_json_string());
  CHECK(back.status == "partial_failure");
  REQUIRE(back.failures.size() == 2);
}

TEST_CASE("the worker pool matches the serial path") {
  const Dataset ds = tiny_synth();
  RunConfig cfg = tiny_run_config();
  cfg.jobs = 1;
  const ResultsFile serial = run_cv(cfg, ds);
  cfg.jobs = 3;
  const ResultsFile parallel = run_cv(cfg, ds);
  CHECK(serial.canonical_content() == parallel.canonical_content());
}

TEST_CASE("comparison tables") {
  SUBCASE("a results set against itself gives p = 0.5 and equal MRR") {
    std::vector<MetricRow> rows;
    for (int f = 0; f < 5; ++f) {
      rows.push_back({"ours", "synthA", f, 0.70 + 0.01 * f, 0.15 + 0.005 * f});
      rows.push_back({"twin", "synthA", f, 0.70 + 0.01 * f, 0.15 + 0.005 * f});
    }
    const CompareReport rep = compare_models(rows, "ours");
    REQUIRE(rep.baselines.size() == 1);
    CHECK(rep.p_cindex[0][0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.p_ibs[0][0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.models[0].mrr_cindex == rep.models[1].mrr_cindex);
  }
  SUBCASE("hand-built two-model, two-dataset, five-fold table") {
    std::vector<MetricRow> rows;
    const double ours_c[2][5] = {{0.71, 0.69, 0.72, 0.70, 0.68},
                                 {0.62, 0.60, 0.64, 0.61, 0.63}};
    const double base_c[2][5] = {{0.66, 0.67, 0.65, 0.68, 0.66},
                                 {0.63, 0.61, 0.65, 0.62, 0.64}};
    const double ours_i[2][5] = {{0.15, 0.16, 0.14, 0.15, 0.16},
                                 {0.21, 0.22, 0.20, 0.21, 0.22}};
    const double base_i[2][5] = {{0.18, 0.19, 0.17, 0.18, 0.19},
                                 {0.20, 0.21, 0.19, 0.20, 0.21}};
    const char* names[2] = {"dsA", "dsB"};
    for (int d = 0; d < 2; ++d)
      for (int f = 0; f < 5; ++f) {
        rows.push_back({"ours", names[d], f, ours_c[d][f], ours_i[d][f]});
        rows.push_back({"cox", names[d], f, base_c[d][f], base_i[d][f]});
      }
    const CompareReport rep = compare_models(rows, "ours");

    // Independent Welch + quadrature oracle per dataset and metric.
    auto welch_p = [&](const double* cand, const double* base, bool flip) {
      double mc = 0, mb = 0;
      for (int i = 0; i < 5; ++i) {
        mc += flip ? -cand[i] : cand[i];
        mb += flip ? -base[i] : base[i];
      }
      mc /= 5;
      mb /= 5;
      double vc = 0, vb = 0;
      for (int i = 0; i < 5; ++i) {
        const double c = (flip ? -cand[i] : cand[i]) - mc;
        const double b = (flip ? -base[i] : base[i]) - mb;
        vc += c * c;
        vb += b * b;
      }
      vc /= 4;
      vb /= 4;
      const double se2 = vc / 5 + vb / 5;
      const double t = (mc - mb) / std::sqrt(se2);
      const double dof =
          se2 * se2 / ((vc / 5) * (vc / 5) / 4 + (vb / 5) * (vb / 5) / 4);
      return t_upper_tail(t, dof);
    };
    for (int d = 0; d < 2; ++d) {
      const auto it = std::find(rep.datasets.begin(), rep.datasets.end(), names[d]);
      REQUIRE(it != rep.datasets.end());
      const size_t di = it - rep.datasets.begin();
      CHECK(std::fabs(rep.p_cindex[0][di] - welch_p(ours_c[d], base_c[d], false)) <
            1e-6);
      CHECK(std::fabs(rep.p_ibs[0][di] - welch_p(ours_i[d], base_i[d], true)) < 1e-6);
    }
    // dsA: ours clearly better on C-index; dsB: cox slightly better.
    CHECK(rep.p_cindex[0][0] < 0.05);
    CHECK(rep.models[0].mrr_cindex == doctest::Approx((1.0 + 0.5) / 2.0));
  }
  SUBCASE("dataset coverage mismatches abort with a listing") {
    std::vector<MetricRow> rows;
    for (int f = 0; f < 3; ++f) {
      rows.push_back({"ours", "dsA", f, 0.7, 0.2});
      rows.push_back({"cox", "dsB", f, 0.6, 0.2});
    }
    CHECK_THROWS_WITH_AS(compare_models(rows, "ours"), doctest::Contains("dsB"),
                         std::invalid_argument);
  }
}

TEST_CASE("metrics csv loader") {
  const fs::path dir =
      fs::temp_directory_path() / ("vaesurv_results_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  SUBCASE("well-formed file with reordered columns") {
    std::ofstream out(dir / "ok.csv");
    out << "dataset,model,c_index,ibs,fold\n";
    out << "gbsg,cox,0.66,0.182,0\n";
    out << "gbsg,cox,0.61,0.19,1\n";
    out.close();
    const auto rows = load_metrics_csv((dir / "ok.csv").string());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].model == "cox");
    CHECK(rows[0].dataset == "gbsg");
    CHECK(rows[1].fold == 1);
    CHECK(rows[1].c_index == doctest::Approx(0.61));
  }
  SUBCASE("missing columns are rejected") {
    std::ofstream out(dir / "bad.csv");
    out << "model,dataset,fold,c_index\n";
    out << "cox,gbsg,0,0.66\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_metrics_csv((dir / "bad.csv").string()),
                         doctest::Contains("ibs"), std::invalid_argument);
  }
  fs::remove_all(dir);
}

TEST_CASE("rows_from_results uses the per-fold best-seed aggregates") {
  ResultsFile r;
  r.dataset_name = "synthA";
  r.report.folds = {{0, 0.71, 0.15}, {1, 0.69, 0.16}};
  const auto rows = rows_from_results(r, "ours");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].model == "ours");
  CHECK(rows[0].dataset == "synthA");
  CHECK(rows[1].c_index == 0.69);
}
