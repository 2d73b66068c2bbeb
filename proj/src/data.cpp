#include "vaesurv/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace vaesurv {

using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::real: return "real";
    case FeatureKind::binary: return "binary";
    case FeatureKind::categorical: return "categorical";
  }
  return "?";
}

FeatureKind kind_from_name(const std::string& s) {
  if (s == "real") return FeatureKind::real;
  if (s == "binary") return FeatureKind::binary;
  if (s == "categorical") return FeatureKind::categorical;
  throw std::invalid_argument("schema: unknown feature kind '" + s + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
  }
  return out;
}

double parse_real(const std::string& cell, int row, const std::string& col) {
  if (cell.empty())
    throw std::invalid_argument("row " + std::to_string(row) + ", column '" + col +
                                "': missing value");
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != cell.size())
    throw std::invalid_argument("row " + std::to_string(row) + ", column '" + col +
                                "': cannot parse '" + cell + "' as a number");
  return v;
}

}  // namespace

void FeatureSchema::validate() const {
  std::vector<std::string> names{time_column, event_column};
  for (const auto& f : features) {
    names.push_back(f.name);
    if (f.name.empty()) throw std::invalid_argument("schema: empty feature name");
    if (f.kind == FeatureKind::categorical && f.levels < 2)
      throw std::invalid_argument("schema: categorical '" + f.name +
                                  "' needs levels >= 2");
  }
  if (time_column.empty() || event_column.empty())
    throw std::invalid_argument("schema: time and event columns are required");
  auto sorted = names;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("schema: column names must be unique");
}

int FeatureSchema::encoder_input_width() const {
  int w = 0;
  for (const auto& f : features)
    w += f.kind == FeatureKind::categorical ? f.levels : 1;
  return w;
}

int FeatureSchema::decoder_output_width() const {
  int w = 0;
  for (const auto& f : features) {
    switch (f.kind) {
      case FeatureKind::real: w += 2; break;
      case FeatureKind::binary: w += 1; break;
      case FeatureKind::categorical: w += f.levels; break;
    }
  }
  return w;
}

std::string FeatureSchema::to_json_string() const {
  json j;
  j["time_column"] = time_column;
  j["event_column"] = event_column;
  j["time_unit"] = time_unit;
  j["features"] = json::array();
  for (const auto& f : features) {
    json jf;
    jf["name"] = f.name;
    jf["kind"] = kind_name(f.kind);
    if (f.kind == FeatureKind::categorical) jf["levels"] = f.levels;
    j["features"].push_back(jf);
  }
  return j.dump();
}

uint64_t FeatureSchema::hash() const {
  const std::string s = to_json_string();
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

FeatureSchema FeatureSchema::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("schema file " + path + ": " + e.what());
  }
  FeatureSchema s;
  s.time_column = j.at("time_column").get<std::string>();
  s.event_column = j.at("event_column").get<std::string>();
  s.time_unit = j.value("time_unit", "");
  for (const auto& jf : j.at("features")) {
    Feature f;
    f.name = jf.at("name").get<std::string>();
    f.kind = kind_from_name(jf.at("kind").get<std::string>());
    if (f.kind == FeatureKind::categorical) f.levels = jf.at("levels").get<int>();
    s.features.push_back(std::move(f));
  }
  s.validate();
  return s;
}

void FeatureSchema::save_file(const std::string& path) const {
  validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write schema file: " + path);
  out << json::parse(to_json_string()).dump(2) << "\n";
}

double Dataset::censored_fraction() const {
  if (records.empty()) return 0.0;
  int c = 0;
  for (const auto& r : records) c += r.d == 0;
  return static_cast<double>(c) / static_cast<double>(records.size());
}

Dataset load_dataset(const std::string& csv_path, const FeatureSchema& schema) {
  schema.validate();
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + csv_path);

  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("dataset " + csv_path + ": empty file");
  const auto header = split_csv_line(line);
  std::unordered_map<std::string, int> col_index;
  for (size_t i = 0; i < header.size(); ++i) col_index[header[i]] = static_cast<int>(i);

  auto require_col = [&](const std::string& name) {
    auto it = col_index.find(name);
    if (it == col_index.end())
      throw std::invalid_argument("dataset " + csv_path + ": missing column '" + name +
                                  "'");
    return it->second;
  };

  const int time_col = require_col(schema.time_column);
  const int event_col = require_col(schema.event_column);
  std::vector<int> feat_col;
  for (const auto& f : schema.features) feat_col.push_back(require_col(f.name));

  Dataset ds;
  ds.schema = schema;
  int n_cat = 0;
  for (const auto& f : schema.features) n_cat += f.kind == FeatureKind::categorical;
  ds.category_levels.resize(n_cat);
  std::vector<std::unordered_map<std::string, int>> level_index(n_cat);

  int row = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("row " + std::to_string(row) + ": expected " +
                                  std::to_string(header.size()) + " cells, got " +
                                  std::to_string(cells.size()));
    SurvivalRecord rec;
    rec.t = parse_real(cells[time_col], row, schema.time_column);
    if (!(rec.t > 0.0))
      throw std::invalid_argument("row " + std::to_string(row) + ", column '" +
                                  schema.time_column + "': time must be > 0, got " +
                                  cells[time_col]);
    const double dv = parse_real(cells[event_col], row, schema.event_column);
    if (dv != 0.0 && dv != 1.0)
      throw std::invalid_argument("row " + std::to_string(row) + ", column '" +
                                  schema.event_column + "': event must be 0 or 1, got " +
                                  cells[event_col]);
    rec.d = static_cast<int>(dv);

    int cat_slot = 0;
    for (size_t fi = 0; fi < schema.features.size(); ++fi) {
      const Feature& f = schema.features[fi];
      const std::string& cell = cells[feat_col[fi]];
      switch (f.kind) {
        case FeatureKind::real:
          rec.x.push_back(parse_real(cell, row, f.name));
          break;
        case FeatureKind::binary: {
          const double v = parse_real(cell, row, f.name);
          if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("row " + std::to_string(row) + ", column '" +
                                        f.name + "': binary value must be 0 or 1, got " +
                                        cell);
          rec.x.push_back(v);
          break;
        }
        case FeatureKind::categorical: {
          if (cell.empty())
            throw std::invalid_argument("row " + std::to_string(row) + ", column '" +
                                        f.name + "': missing value");
          auto& idx = level_index[cat_slot];
          auto it = idx.find(cell);
          int level;
          if (it != idx.end()) {
            level = it->second;
          } else {
            level = static_cast<int>(ds.category_levels[cat_slot].size());
            if (level >= f.levels)
              throw std::invalid_argument(
                  "row " + std::to_string(row) + ", column '" + f.name + "': level '" +
                  cell + "' exceeds the declared " + std::to_string(f.levels) +
                  " categories");
            idx.emplace(cell, level);
            ds.category_levels[cat_slot].push_back(cell);
          }
          rec.x.push_back(static_cast<double>(level));
          break;
        }
      }
      if (f.kind == FeatureKind::categorical) ++cat_slot;
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

Dataset load_dataset(const std::string& csv_path, const std::string& schema_path) {
  return load_dataset(csv_path, FeatureSchema::load_file(schema_path));
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (size_t fi = 0; fi < ds.schema.features.size(); ++fi)
    out << ds.schema.features[fi].name << ",";
  out << ds.schema.time_column << "," << ds.schema.event_column << "\n";
  for (const auto& rec : ds.records) {
    int cat_slot = 0;
    for (size_t fi = 0; fi < ds.schema.features.size(); ++fi) {
      const Feature& f = ds.schema.features[fi];
      if (f.kind == FeatureKind::categorical) {
        out << ds.category_levels[cat_slot][static_cast<int>(rec.x[fi])] << ",";
        ++cat_slot;
      } else {
        out << format_double(rec.x[fi]) << ",";
      }
    }
    out << format_double(rec.t) << "," << rec.d << "\n";
  }
}

std::vector<double> Preprocessor::transform(const SurvivalRecord& rec,
                                            const FeatureSchema& schema) const {
  if (rec.x.size() != schema.features.size())
    throw std::invalid_argument("transform: record arity " +
                                std::to_string(rec.x.size()) + " != schema arity " +
                                std::to_string(schema.features.size()));
  std::vector<double> out;
  out.reserve(schema.encoder_input_width());
  for (size_t fi = 0; fi < schema.features.size(); ++fi) {
    const Feature& f = schema.features[fi];
    switch (f.kind) {
      case FeatureKind::real:
        out.push_back((rec.x[fi] - mean[fi]) / sd[fi]);
        break;
      case FeatureKind::binary:
        out.push_back(rec.x[fi]);
        break;
      case FeatureKind::categorical: {
        const int level = static_cast<int>(rec.x[fi]);
        for (int k = 0; k < f.levels; ++k) out.push_back(k == level ? 1.0 : 0.0);
        break;
      }
    }
  }
  return out;
}

std::string Preprocessor::stats_digest() const {
  std::string s;
  for (size_t i = 0; i < mean.size(); ++i)
    s += format_double(mean[i]) + ":" + format_double(sd[i]) + ";";
  return s;
}

Preprocessor fit_preprocessor(const Dataset& ds, std::span<const int> train_idx) {
  if (train_idx.empty())
    throw std::invalid_argument("fit_preprocessor: empty training split");
  const size_t nf = ds.schema.features.size();
  Preprocessor p;
  p.mean.assign(nf, 0.0);
  p.sd.assign(nf, 1.0);
  const double n = static_cast<double>(train_idx.size());
  for (size_t fi = 0; fi < nf; ++fi) {
    if (ds.schema.features[fi].kind != FeatureKind::real) continue;
    double s = 0.0;
    for (int i : train_idx) s += ds.records[i].x[fi];
    const double mean = s / n;
    double ss = 0.0;
    for (int i : train_idx) {
      const double dlt = ds.records[i].x[fi] - mean;
      ss += dlt * dlt;
    }
    double sd = std::sqrt(ss / n);  // population convention
    if (sd == 0.0) {
      p.warnings.push_back("feature '" + ds.schema.features[fi].name +
                           "' has zero variance on the training split; sd set to 1");
      sd = 1.0;
    }
    p.mean[fi] = mean;
    p.sd[fi] = sd;
  }
  return p;
}

FoldPlan kfold_split(const Dataset& ds, int k, uint64_t seed) {
  const int n = ds.size();
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  if (k > n)
    throw std::invalid_argument("kfold_split: k=" + std::to_string(k) +
                                " exceeds dataset size " + std::to_string(n));
  std::vector<int> events, censored;
  for (int i = 0; i < n; ++i)
    (ds.records[i].d == 1 ? events : censored).push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(events.begin(), events.end(), rng);
  std::shuffle(censored.begin(), censored.end(), rng);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.test.assign(k, {});
  plan.train.assign(k, {});
  int slot = 0;
  for (int i : events) plan.test[slot++ % k].push_back(i);
  for (int i : censored) plan.test[slot++ % k].push_back(i);
  for (int f = 0; f < k; ++f) {
    std::sort(plan.test[f].begin(), plan.test[f].end());
    for (int g = 0; g < k; ++g)
      if (g != f)
        plan.train[f].insert(plan.train[f].end(), plan.test[g].begin(),
                             plan.test[g].end());
    std::sort(plan.train[f].begin(), plan.train[f].end());
  }
  return plan;
}

std::pair<std::vector<int>, std::vector<int>> stratified_holdout(
    const Dataset& ds, std::span<const int> idx, double held_fraction, uint64_t seed) {
  if (!(held_fraction > 0.0 && held_fraction < 1.0))
    throw std::invalid_argument("stratified_holdout: fraction must be in (0, 1)");
  std::vector<int> events, censored;
  for (int i : idx) (ds.records[i].d == 1 ? events : censored).push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(events.begin(), events.end(), rng);
  std::shuffle(censored.begin(), censored.end(), rng);
  std::vector<int> kept, held;
  for (auto* stratum : {&events, &censored}) {
    const int h = static_cast<int>(std::llround(held_fraction * stratum->size()));
    for (size_t i = 0; i < stratum->size(); ++i)
      (static_cast<int>(i) < h ? held : kept).push_back((*stratum)[i]);
  }
  std::sort(kept.begin(), kept.end());
  std::sort(held.begin(), held.end());
  if (kept.empty() || held.empty())
    throw std::invalid_argument("stratified_holdout: a split came out empty");
  return {kept, held};
}

void SynthSpec::validate() const {
  if (n < 1 || p < 1) throw std::invalid_argument("SynthSpec: n and p must be >= 1");
  if (!(alpha_true > 0.0) || !(lambda0 > 0.0))
    throw std::invalid_argument("SynthSpec: alpha_true and lambda0 must be > 0");
  if (!(censor_fraction >= 0.0 && censor_fraction < 1.0))
    throw std::invalid_argument("SynthSpec: censor_fraction must be in [0, 1)");
  if (!beta.empty() && static_cast<int>(beta.size()) != p)
    throw std::invalid_argument("SynthSpec: beta length " +
                                std::to_string(beta.size()) + " != p=" +
                                std::to_string(p));
}

std::vector<double> SynthSpec::default_beta(int p) {
  std::vector<double> b(p);
  for (int j = 0; j < p; ++j) b[j] = (j % 2 == 0 ? 0.15 : -0.15);
  return b;
}

SynthResult synth_generate(const SynthSpec& spec) {
  spec.validate();
  const std::vector<double> beta =
      spec.beta.empty() ? SynthSpec::default_beta(spec.p) : spec.beta;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SynthResult res;
  res.spec = spec;
  res.spec.beta = beta;
  std::vector<double> event_time(spec.n), censor_u(spec.n);
  res.true_lambda.resize(spec.n);

  Dataset& ds = res.dataset;
  ds.schema.time_column = "time";
  ds.schema.event_column = "event";
  ds.schema.time_unit = "units";
  for (int j = 0; j < spec.p; ++j)
    ds.schema.features.push_back({"x" + std::to_string(j), FeatureKind::real, 0});

  for (int i = 0; i < spec.n; ++i) {
    SurvivalRecord rec;
    double lin = 0.0;
    for (int j = 0; j < spec.p; ++j) {
      const double xv = normal(rng);
      rec.x.push_back(xv);
      lin += beta[j] * xv;
    }
    res.true_lambda[i] = spec.lambda0 * std::exp(lin);
    // Inverse-CDF Weibull draw: t = lambda * (-log U)^(1/alpha).
    const double u = std::max(unif(rng), 1e-300);
    event_time[i] = res.true_lambda[i] * std::pow(-std::log(u), 1.0 / spec.alpha_true);
    censor_u[i] = unif(rng);
    rec.t = event_time[i];
    rec.d = 1;
    ds.records.push_back(std::move(rec));
  }

  if (spec.censor_fraction > 0.0) {
    // Realized censoring fraction is monotone non-increasing in c_max;
    // bisect on pre-drawn uniforms so the calibration is deterministic.
    auto realized = [&](double c_max) {
      int c = 0;
      for (int i = 0; i < spec.n; ++i) c += event_time[i] > censor_u[i] * c_max;
      return static_cast<double>(c) / spec.n;
    };
    double lo = 1e-12, hi = 1.0;
    while (realized(hi) > spec.censor_fraction && hi < 1e12) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (realized(mid) > spec.censor_fraction)
        lo = mid;
      else
        hi = mid;
    }
    res.censor_max = hi;
    if (std::abs(realized(hi) - spec.censor_fraction) > 0.02)
      throw std::runtime_error(
          "synth_generate: cannot reach censoring fraction " +
          std::to_string(spec.censor_fraction) + " (closest realized: " +
          std::to_string(realized(hi)) + ")");
    for (int i = 0; i < spec.n; ++i) {
      const double c = censor_u[i] * res.censor_max;
      if (event_time[i] > c) {
        ds.records[i].t = c;
        ds.records[i].d = 0;
      }
    }
  }
  // Guard the t > 0 record invariant against an absurdly small draw.
  for (auto& rec : ds.records) rec.t = std::max(rec.t, 1e-12);
  return res;
}

void write_synth(const SynthResult& res, const std::string& base_path) {
  write_dataset_csv(res.dataset, base_path + ".csv");
  res.dataset.schema.save_file(base_path + ".schema.json");
  json truth;
  truth["format_version"] = "1.0";
  truth["spec"] = {{"n", res.spec.n},
                   {"p", res.spec.p},
                   {"beta", res.spec.beta},
                   {"alpha_true", res.spec.alpha_true},
                   {"lambda0", res.spec.lambda0},
                   {"censor_fraction", res.spec.censor_fraction},
                   {"seed", res.spec.seed}};
  truth["censor_max"] = res.censor_max;
  truth["true_lambda"] = res.true_lambda;
  std::ofstream out(base_path + ".truth.json");
  if (!out) throw std::runtime_error("cannot write sidecar: " + base_path + ".truth.json");
  out << truth.dump(2) << "\n";
}

}  // namespace vaesurv
