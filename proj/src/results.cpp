#include "vaesurv/results.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "vaesurv/data.hpp"

#ifndef VAESURV_COMMIT
#define VAESURV_COMMIT "unknown"
#endif

namespace vaesurv {

using nlohmann::json;

namespace {

uint64_t mix_seed(uint64_t a, uint64_t b) {
  // splitmix64 over the combined value
  uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

std::vector<double> event_time_grid(const Dataset& ds, std::span<const int> idx) {
  std::vector<double> grid;
  for (int i : idx)
    if (ds.records[i].d == 1) grid.push_back(ds.records[i].t);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::string utc_now_string() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// The config echo holds everything the results are a function of; worker
// count and output location are execution policy and live in meta.
json run_config_to_json(const RunConfig& c) {
  return json{{"dataset_path", c.dataset_path},
              {"schema_path", c.schema_path},
              {"dataset_name", c.dataset_name},
              {"k_folds", c.k_folds},
              {"seed_count", c.seed_count},
              {"best_seed_count", c.best_seed_count},
              {"ibs_grid_points", c.ibs_grid_points},
              {"seed", c.seed},
              {"select_by",
               c.select_by == SeedSelection::by_validation ? "validation" : "test"},
              {"model",
               {{"latent_dim", c.model.latent_dim},
                {"hidden_width", c.model.hidden_width},
                {"keep_prob", c.model.keep_prob},
                {"max_epochs", c.model.max_epochs},
                {"batch_size", c.model.batch_size},
                {"learning_rate", c.model.learning_rate},
                {"patience", c.model.patience},
                {"min_delta", c.model.min_delta},
                {"time_family",
                 c.model.time_family == TimeFamily::weibull ? "weibull" : "exponential"},
                {"mc_inference_samples", c.model.mc_inference_samples}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.dataset_path = j.at("dataset_path").get<std::string>();
  c.schema_path = j.at("schema_path").get<std::string>();
  c.dataset_name = j.at("dataset_name").get<std::string>();
  c.k_folds = j.at("k_folds").get<int>();
  c.seed_count = j.at("seed_count").get<int>();
  c.best_seed_count = j.at("best_seed_count").get<int>();
  c.ibs_grid_points = j.at("ibs_grid_points").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  c.select_by = j.at("select_by").get<std::string>() == "test"
                    ? SeedSelection::by_test
                    : SeedSelection::by_validation;
  const json& jm = j.at("model");
  c.model.latent_dim = jm.at("latent_dim").get<int>();
  c.model.hidden_width = jm.at("hidden_width").get<int>();
  c.model.keep_prob = jm.at("keep_prob").get<double>();
  c.model.max_epochs = jm.at("max_epochs").get<int>();
  c.model.batch_size = jm.at("batch_size").get<int>();
  c.model.learning_rate = jm.at("learning_rate").get<double>();
  c.model.patience = jm.at("patience").get<int>();
  c.model.min_delta = jm.at("min_delta").get<double>();
  c.model.time_family = jm.at("time_family").get<std::string>() == "exponential"
                            ? TimeFamily::exponential
                            : TimeFamily::weibull;
  c.model.mc_inference_samples = jm.at("mc_inference_samples").get<int>();
  return c;
}

json body_json(const ResultsFile& r) {
  json j;
  j["format_version"] = r.format_version;
  j["kind"] = "vaesurv-results";
  j["dataset_name"] = r.dataset_name;
  j["config"] = run_config_to_json(r.config);
  j["seeds"] = json::array();
  for (const auto& s : r.report.seeds)
    j["seeds"].push_back({{"fold", s.fold},
                          {"seed_index", s.seed_index},
                          {"seed_value", s.seed_value},
                          {"val_cindex", s.val_cindex},
                          {"test_cindex", s.test_cindex},
                          {"test_ibs", s.test_ibs},
                          {"selected", s.selected},
                          {"best_epoch", s.best_epoch},
                          {"epochs_run", s.epochs_run}});
  j["folds"] = json::array();
  for (const auto& f : r.report.folds)
    j["folds"].push_back({{"fold", f.fold}, {"cindex", f.cindex}, {"ibs", f.ibs}});
  if (!r.report.folds.empty()) {
    j["summary"] = {{"cindex",
                     {{"mean", r.report.cindex.mean},
                      {"min", r.report.cindex.min},
                      {"max", r.report.cindex.max}}},
                    {"ibs",
                     {{"mean", r.report.ibs.mean},
                      {"min", r.report.ibs.min},
                      {"max", r.report.ibs.max}}}};
  }
  j["failures"] = json::array();
  for (const auto& f : r.failures)
    j["failures"].push_back(
        {{"fold", f.fold}, {"seed_index", f.seed_index}, {"error", f.error}});
  j["status"] = r.status;
  return j;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (k_folds < 2) throw std::invalid_argument("run config: k_folds must be >= 2");
  if (seed_count < 1) throw std::invalid_argument("run config: seed_count must be >= 1");
  if (best_seed_count < 1 || best_seed_count > seed_count)
    throw std::invalid_argument(
        "run config: best_seed_count must be in [1, seed_count]");
  if (ibs_grid_points < 2)
    throw std::invalid_argument("run config: ibs_grid_points must be >= 2");
  if (jobs < 0) throw std::invalid_argument("run config: jobs must be >= 0");
}

std::string ResultsFile::to_json_string(bool pretty) const {
  json j = body_json(*this);
  j["meta"] = {{"wall_clock_seconds", wall_clock_seconds},
               {"commit", commit},
               {"created_utc", created_utc},
               {"jobs", config.jobs},
               {"output_dir", config.output_dir}};
  return pretty ? j.dump(2) : j.dump();
}

std::string ResultsFile::canonical_content() const { return body_json(*this).dump(); }

ResultsFile ResultsFile::from_json_string(const std::string& s) {
  const json j = json::parse(s);
  const std::string version = j.at("format_version").get<std::string>();
  if (version.substr(0, version.find('.')) != "1")
    throw std::runtime_error("results file: unsupported format version " + version);
  ResultsFile r;
  r.format_version = version;
  r.dataset_name = j.at("dataset_name").get<std::string>();
  r.config = run_config_from_json(j.at("config"));
  for (const auto& js : j.at("seeds")) {
    SeedMetrics s;
    s.fold = js.at("fold").get<int>();
    s.seed_index = js.at("seed_index").get<int>();
    s.seed_value = js.at("seed_value").get<uint64_t>();
    s.val_cindex = js.at("val_cindex").get<double>();
    s.test_cindex = js.at("test_cindex").get<double>();
    s.test_ibs = js.at("test_ibs").get<double>();
    s.selected = js.at("selected").get<bool>();
    s.best_epoch = js.at("best_epoch").get<int>();
    s.epochs_run = js.at("epochs_run").get<int>();
    r.report.seeds.push_back(s);
  }
  for (const auto& jf : j.at("folds")) {
    FoldMetrics f;
    f.fold = jf.at("fold").get<int>();
    f.cindex = jf.at("cindex").get<double>();
    f.ibs = jf.at("ibs").get<double>();
    r.report.folds.push_back(f);
  }
  if (j.contains("summary")) {
    r.report.cindex = {j["summary"]["cindex"]["mean"].get<double>(),
                       j["summary"]["cindex"]["min"].get<double>(),
                       j["summary"]["cindex"]["max"].get<double>()};
    r.report.ibs = {j["summary"]["ibs"]["mean"].get<double>(),
                    j["summary"]["ibs"]["min"].get<double>(),
                    j["summary"]["ibs"]["max"].get<double>()};
  }
  for (const auto& jf : j.at("failures"))
    r.failures.push_back({jf.at("fold").get<int>(), jf.at("seed_index").get<int>(),
                          jf.at("error").get<std::string>()});
  r.status = j.at("status").get<std::string>();
  if (j.contains("meta")) {
    r.wall_clock_seconds = j["meta"].value("wall_clock_seconds", 0.0);
    r.commit = j["meta"].value("commit", "");
    r.created_utc = j["meta"].value("created_utc", "");
    r.config.jobs = j["meta"].value("jobs", 0);
    r.config.output_dir = j["meta"].value("output_dir", ".");
  }
  return r;
}

void ResultsFile::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write results file: " + path);
  out << to_json_string() << "\n";
}

ResultsFile ResultsFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

ResultsFile run_cv(const RunConfig& cfg, const Dataset& ds) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const FoldPlan plan = kfold_split(ds, cfg.k_folds, cfg.seed);

  struct Job {
    int fold;
    int seed_index;
  };
  std::vector<Job> jobs;
  for (int f = 0; f < cfg.k_folds; ++f)
    for (int s = 0; s < cfg.seed_count; ++s) jobs.push_back({f, s});

  // The validation split is fixed per fold so seeds compete on the same data.
  std::vector<std::vector<int>> fold_train(cfg.k_folds), fold_val(cfg.k_folds);
  for (int f = 0; f < cfg.k_folds; ++f) {
    auto [kept, held] =
        stratified_holdout(ds, plan.train[f], 0.2, mix_seed(cfg.seed, 1000 + f));
    fold_train[f] = std::move(kept);
    fold_val[f] = std::move(held);
  }

  std::vector<SeedMetrics> slots(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const size_t ji = next.fetch_add(1);
      if (ji >= jobs.size()) return;
      const Job job = jobs[ji];
      try {
        ModelConfig mc = cfg.model;
        mc.seed = mix_seed(cfg.seed, static_cast<uint64_t>(job.fold) * 1000 +
                                         static_cast<uint64_t>(job.seed_index));
        auto [model, history] =
            train_model(ds, fold_train[job.fold], fold_val[job.fold], mc);

        SeedMetrics sm;
        sm.fold = job.fold;
        sm.seed_index = job.seed_index;
        sm.seed_value = mc.seed;
        sm.best_epoch = history.best_epoch;
        sm.epochs_run = static_cast<int>(history.val_elbo.size());

        const auto& val_idx = fold_val[job.fold];
        std::vector<double> val_times;
        std::vector<int> val_events;
        for (int i : val_idx) {
          val_times.push_back(ds.records[i].t);
          val_events.push_back(ds.records[i].d);
        }
        const auto val_grid = event_time_grid(ds, val_idx);
        const auto val_c =
            td_c_index(model.predict_cdf_matrix(ds, val_idx, val_grid), val_grid,
                       val_times, val_events);
        sm.val_cindex = val_c.value_or(-1.0);

        const auto& test_idx = plan.test[job.fold];
        std::vector<double> test_times;
        std::vector<int> test_events;
        double t_max = 0.0;
        for (int i : test_idx) {
          test_times.push_back(ds.records[i].t);
          test_events.push_back(ds.records[i].d);
          t_max = std::max(t_max, ds.records[i].t);
        }
        const auto test_grid = event_time_grid(ds, test_idx);
        const auto test_c =
            td_c_index(model.predict_cdf_matrix(ds, test_idx, test_grid), test_grid,
                       test_times, test_events);
        if (!test_c)
          throw std::runtime_error("test C-index undefined: no admissible pairs");
        sm.test_cindex = *test_c;

        const auto grid = ibs_grid(t_max, cfg.ibs_grid_points);
        Matrix surv = model.predict_cdf_matrix(ds, test_idx, grid);
        for (double& v : surv.a) v = 1.0 - v;
        const KMCurve g = censoring_survival(test_times, test_events);
        sm.test_ibs = ibs(surv, grid, test_times, test_events, g);
        slots[ji] = sm;
      } catch (const std::exception& e) {
        errors[ji] = e.what();
      }
    }
  };

  int n_workers = cfg.jobs > 0 ? cfg.jobs
                               : static_cast<int>(std::thread::hardware_concurrency());
  n_workers = std::max(1, std::min<int>(n_workers, static_cast<int>(jobs.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ResultsFile results;
  results.dataset_name = cfg.dataset_name;
  results.config = cfg;
  for (size_t ji = 0; ji < jobs.size(); ++ji) {
    if (!errors[ji].empty())
      results.failures.push_back({jobs[ji].fold, jobs[ji].seed_index, errors[ji]});
    else
      results.report.seeds.push_back(slots[ji]);
  }
  if (!results.report.seeds.empty())
    results.report.recompute_aggregates(cfg.best_seed_count,
                                        cfg.select_by == SeedSelection::by_test);
  results.status = results.failures.empty() ? "ok" : "partial_failure";
  results.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  results.commit = VAESURV_COMMIT;
  results.created_utc = utc_now_string();
  return results;
}

void print_results_table(const ResultsFile& r) {
  std::printf("dataset: %s   status: %s\n", r.dataset_name.c_str(), r.status.c_str());
  std::printf("%-6s %-12s %-12s\n", "fold", "C-index", "IBS");
  for (const auto& f : r.report.folds)
    std::printf("%-6d %-12.4f %-12.4f\n", f.fold, f.cindex, f.ibs);
  if (!r.report.folds.empty()) {
    std::printf("mean   %-12.4f %-12.4f\n", r.report.cindex.mean, r.report.ibs.mean);
    std::printf("range  (%.4f, %.4f) (%.4f, %.4f)\n", r.report.cindex.min,
                r.report.cindex.max, r.report.ibs.min, r.report.ibs.max);
  }
  for (const auto& f : r.failures)
    std::printf("FAILED fold %d seed %d: %s\n", f.fold, f.seed_index, f.error.c_str());
}

std::vector<MetricRow> load_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (c != '\r' && c != ' ') {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  };
  const auto header = split(line);
  auto col_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::invalid_argument(path + ": missing column '" + name + "'");
    return static_cast<int>(it - header.begin());
  };
  const int c_model = col_of("model"), c_dataset = col_of("dataset"),
            c_fold = col_of("fold"), c_cindex = col_of("c_index"),
            c_ibs = col_of("ibs");
  std::vector<MetricRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() < header.size())
      throw std::invalid_argument(path + ": row " + std::to_string(line_no) +
                                  " has too few cells");
    MetricRow r;
    r.model = cells[c_model];
    r.dataset = cells[c_dataset];
    try {
      r.fold = std::stoi(cells[c_fold]);
      r.c_index = std::stod(cells[c_cindex]);
      r.ibs = std::stod(cells[c_ibs]);
    } catch (const std::exception&) {
      throw std::invalid_argument(path + ": row " + std::to_string(line_no) +
                                  ": cannot parse numeric cell");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricRow> rows_from_results(const ResultsFile& r,
                                         const std::string& model_name) {
  std::vector<MetricRow> rows;
  for (const auto& f : r.report.folds)
    rows.push_back({model_name, r.dataset_name, f.fold, f.cindex, f.ibs});
  return rows;
}

CompareReport compare_models(const std::vector<MetricRow>& rows,
                             const std::string& candidate) {
  if (rows.empty()) throw std::invalid_argument("compare: no metric rows");
  std::set<std::string> model_set, dataset_set;
  for (const auto& r : rows) {
    model_set.insert(r.model);
    dataset_set.insert(r.dataset);
  }
  if (!model_set.count(candidate))
    throw std::invalid_argument("compare: candidate model '" + candidate +
                                "' has no rows");

  // Every model must cover the same datasets.
  std::vector<std::string> mismatches;
  for (const auto& m : model_set)
    for (const auto& d : dataset_set) {
      const bool has = std::any_of(rows.begin(), rows.end(), [&](const MetricRow& r) {
        return r.model == m && r.dataset == d;
      });
      if (!has) mismatches.push_back(m + " is missing dataset '" + d + "'");
    }
  if (!mismatches.empty()) {
    std::string msg = "compare: dataset coverage mismatch:";
    for (const auto& s : mismatches) msg += "\n  " + s;
    throw std::invalid_argument(msg);
  }

  CompareReport rep;
  rep.datasets.assign(dataset_set.begin(), dataset_set.end());
  std::vector<std::string> models;
  models.push_back(candidate);
  for (const auto& m : model_set)
    if (m != candidate) models.push_back(m);

  auto fold_values = [&](const std::string& m, const std::string& d) {
    std::pair<std::vector<double>, std::vector<double>> v;
    for (const auto& r : rows)
      if (r.model == m && r.dataset == d) {
        v.first.push_back(r.c_index);
        v.second.push_back(r.ibs);
      }
    return v;
  };
  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };

  // Mean per (model, dataset), then shared-minimum ranks per dataset.
  std::map<std::string, std::vector<double>> rr_c, rr_i;  // reciprocal ranks
  std::map<std::string, std::vector<double>> means_c, means_i;
  for (const auto& d : rep.datasets) {
    std::vector<double> mc, mi;
    for (const auto& m : models) {
      const auto v = fold_values(m, d);
      mc.push_back(mean_of(v.first));
      mi.push_back(mean_of(v.second));
    }
    const auto ranks_c = ranks_shared_min(mc, /*higher_better=*/true);
    const auto ranks_i = ranks_shared_min(mi, /*higher_better=*/false);
    for (size_t mi_ = 0; mi_ < models.size(); ++mi_) {
      rr_c[models[mi_]].push_back(1.0 / ranks_c[mi_]);
      rr_i[models[mi_]].push_back(1.0 / ranks_i[mi_]);
      means_c[models[mi_]].push_back(mc[mi_]);
      means_i[models[mi_]].push_back(mi[mi_]);
    }
  }
  for (const auto& m : models) {
    CompareEntry e;
    e.model = m;
    e.mean_cindex = mean_of(means_c[m]);
    e.mean_ibs = mean_of(means_i[m]);
    e.mrr_cindex = mean_of(rr_c[m]);
    e.mrr_ibs = mean_of(rr_i[m]);
    rep.models.push_back(e);
  }

  // One-sided tests of the candidate against each baseline per dataset.
  for (size_t bi = 1; bi < models.size(); ++bi) {
    rep.baselines.push_back(models[bi]);
    std::vector<double> pc_row, pi_row;
    for (const auto& d : rep.datasets) {
      const auto ours = fold_values(candidate, d);
      const auto theirs = fold_values(models[bi], d);
      if (ours.first.size() < 2 || theirs.first.size() < 2) {
        pc_row.push_back(-1.0);
        pi_row.push_back(-1.0);
        continue;
      }
      pc_row.push_back(one_sided_p_value(ours.first, theirs.first));
      // IBS is lower-is-better: flip signs so "candidate mean lower" is tested.
      std::vector<double> ours_neg(ours.second), theirs_neg(theirs.second);
      for (double& x : ours_neg) x = -x;
      for (double& x : theirs_neg) x = -x;
      pi_row.push_back(one_sided_p_value(ours_neg, theirs_neg));
    }
    rep.p_cindex.push_back(std::move(pc_row));
    rep.p_ibs.push_back(std::move(pi_row));
  }
  return rep;
}

std::string CompareReport::to_json_string() const {
  json j;
  j["format_version"] = "1.0";
  j["kind"] = "vaesurv-compare";
  j["datasets"] = datasets;
  j["models"] = json::array();
  for (const auto& m : models)
    j["models"].push_back({{"model", m.model},
                           {"mean_cindex", m.mean_cindex},
                           {"mean_ibs", m.mean_ibs},
                           {"mrr_cindex", m.mrr_cindex},
                           {"mrr_ibs", m.mrr_ibs}});
  j["p_values"] = json::array();
  for (size_t b = 0; b < baselines.size(); ++b) {
    json jb;
    jb["baseline"] = baselines[b];
    for (size_t d = 0; d < datasets.size(); ++d) {
      jb["cindex"][datasets[d]] = p_cindex[b][d];
      jb["ibs"][datasets[d]] = p_ibs[b][d];
    }
    j["p_values"].push_back(jb);
  }
  return j.dump(2);
}

void print_compare_tables(const CompareReport& r) {
  std::printf("%-16s %-12s %-12s %-10s %-10s\n", "model", "mean C-idx", "mean IBS",
              "MRR(C)", "MRR(IBS)");
  for (const auto& m : r.models)
    std::printf("%-16s %-12.4f %-12.4f %-10.4f %-10.4f\n", m.model.c_str(),
                m.mean_cindex, m.mean_ibs, m.mrr_cindex, m.mrr_ibs);
  if (r.baselines.empty()) return;
  std::printf("\none-sided p-values (candidate better), C-index / IBS:\n");
  std::printf("%-16s", "baseline");
  for (const auto& d : r.datasets) std::printf(" %-21s", d.c_str());
  std::printf("\n");
  for (size_t b = 0; b < r.baselines.size(); ++b) {
    std::printf("%-16s", r.baselines[b].c_str());
    for (size_t d = 0; d < r.datasets.size(); ++d) {
      auto fmt = [](double p) {
        return p < 0 ? std::string("n/a") : std::to_string(p).substr(0, 7);
      };
      std::printf(" %-10s/%-10s", fmt(r.p_cindex[b][d]).c_str(),
                  fmt(r.p_ibs[b][d]).c_str());
    }
    std::printf("\n");
  }
}

}  // namespace vaesurv
