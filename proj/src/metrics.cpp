#include "vaesurv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vaesurv {

namespace {

constexpr double kIpcwFloor = 1e-4;

void check_survival_inputs(std::span<const double> times, std::span<const int> events) {
  if (times.empty()) throw std::invalid_argument("empty survival input");
  if (times.size() != events.size())
    throw std::invalid_argument("times and events lengths differ");
  for (size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0)
      throw std::invalid_argument("negative time at index " + std::to_string(i));
    if (events[i] != 0 && events[i] != 1)
      throw std::invalid_argument("event flag at index " + std::to_string(i) +
                                  " must be 0 or 1");
  }
}

// Regularized incomplete beta I_x(a, b) by the Lentz continued fraction.
double beta_cont_frac(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16, kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cont_frac(a, b, x) / a;
  return 1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b;
}

}  // namespace

double KMCurve::eval(double t) const {
  // Largest knot <= t; right-continuous step function.
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return 1.0;
  return survival[static_cast<size_t>(it - knots.begin()) - 1];
}

double KMCurve::eval_left(double t) const {
  auto it = std::lower_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return 1.0;
  return survival[static_cast<size_t>(it - knots.begin()) - 1];
}

KMCurve kaplan_meier(std::span<const double> times, std::span<const int> events) {
  check_survival_inputs(times, events);
  const size_t n = times.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return times[a] < times[b]; });

  KMCurve curve;
  double s = 1.0;
  size_t at_risk = n;
  size_t i = 0;
  while (i < n) {
    const double t = times[order[i]];
    int d = 0, c = 0;
    while (i < n && times[order[i]] == t) {
      if (events[order[i]]) ++d; else ++c;
      ++i;
    }
    curve.knots.push_back(t);
    curve.at_risk.push_back(static_cast<int>(at_risk));
    if (d > 0) s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
    curve.survival.push_back(s);
    at_risk -= static_cast<size_t>(d + c);
  }
  return curve;
}

KMCurve censoring_survival(std::span<const double> times, std::span<const int> events) {
  std::vector<int> flipped(events.size());
  for (size_t i = 0; i < events.size(); ++i) flipped[i] = 1 - events[i];
  return kaplan_meier(times, flipped);
}

std::optional<double> td_c_index(const Matrix& cdf, std::span<const double> grid,
                                 std::span<const double> times,
                                 std::span<const int> events) {
  check_survival_inputs(times, events);
  const int n = static_cast<int>(times.size());
  if (cdf.rows != n)
    throw std::invalid_argument("td_c_index: cdf has " + std::to_string(cdf.rows) +
                                " rows for " + std::to_string(n) + " subjects");
  if (static_cast<int>(grid.size()) != cdf.cols)
    throw std::invalid_argument("td_c_index: grid length " +
                                std::to_string(grid.size()) + " != cdf columns " +
                                std::to_string(cdf.cols));
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("td_c_index: grid must be ascending");

  // Column of each event time in the grid.
  std::vector<int> col(n, -1);
  for (int i = 0; i < n; ++i) {
    if (!events[i]) continue;
    auto it = std::lower_bound(grid.begin(), grid.end(), times[i]);
    if (it == grid.end() || *it != times[i])
      throw std::invalid_argument("td_c_index: grid does not cover event time " +
                                  std::to_string(times[i]));
    col[i] = static_cast<int>(it - grid.begin());
  }

  double concordant = 0.0;
  double admissible = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!events[i]) continue;
    const double ti = times[i];
    const double fi = cdf(i, col[i]);
    for (int j = 0; j < n; ++j) {
      if (times[j] <= ti) continue;
      admissible += 1.0;
      const double fj = cdf(j, col[i]);
      if (fi > fj)
        concordant += 1.0;
      else if (fi == fj)
        concordant += 0.5;
    }
  }
  if (admissible == 0.0) return std::nullopt;
  return concordant / admissible;
}

double brier_score(std::span<const double> survival_at_t,
                   std::span<const double> times, std::span<const int> events,
                   const KMCurve& G, double t) {
  check_survival_inputs(times, events);
  if (t < 0.0) throw std::invalid_argument("brier_score: t must be >= 0");
  if (survival_at_t.size() != times.size())
    throw std::invalid_argument("brier_score: survival vector length mismatch");
  const double n = static_cast<double>(times.size());
  const double g_t = std::max(G.eval(t), kIpcwFloor);
  double sum = 0.0;
  for (size_t i = 0; i < times.size(); ++i) {
    const double s = survival_at_t[i];
    if (!(s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("brier_score: survival probability " +
                                  std::to_string(s) + " outside [0, 1] at index " +
                                  std::to_string(i));
    if (times[i] < t && events[i] == 1) {
      const double g = std::max(G.eval_left(times[i]), kIpcwFloor);
      sum += s * s / g;
    } else if (times[i] >= t) {
      sum += (1.0 - s) * (1.0 - s) / g_t;
    }
    // Censored before t: no contribution.
  }
  return sum / n;
}

std::vector<double> ibs_grid(double t_max, int points) {
  if (!(t_max > 0.0)) throw std::invalid_argument("ibs_grid: t_max must be > 0");
  if (points < 2) throw std::invalid_argument("ibs_grid: need at least 2 points");
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i)
    grid[i] = t_max * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

double ibs(const Matrix& survival, std::span<const double> grid,
           std::span<const double> times, std::span<const int> events,
           const KMCurve& G) {
  if (grid.size() < 2) throw std::invalid_argument("ibs: grid needs >= 2 points");
  const double t_max = grid.back();
  if (!(t_max > 0.0)) throw std::invalid_argument("ibs: t_max must be > 0");
  if (survival.cols != static_cast<int>(grid.size()))
    throw std::invalid_argument("ibs: survival columns != grid length");
  std::vector<double> bs(grid.size());
  std::vector<double> s_col(survival.rows);
  for (size_t g = 0; g < grid.size(); ++g) {
    for (int i = 0; i < survival.rows; ++i) s_col[i] = survival(i, static_cast<int>(g));
    bs[g] = brier_score(s_col, times, events, G, grid[g]);
  }
  double integral = 0.0;
  for (size_t g = 1; g < grid.size(); ++g)
    integral += 0.5 * (bs[g - 1] + bs[g]) * (grid[g] - grid[g - 1]);
  return integral / t_max;
}

double mrr(std::span<const int> ranks) {
  if (ranks.empty()) throw std::invalid_argument("mrr: empty rank list");
  double sum = 0.0;
  for (int r : ranks) {
    if (r < 1) throw std::invalid_argument("mrr: ranks must be >= 1");
    sum += 1.0 / static_cast<double>(r);
  }
  return sum / static_cast<double>(ranks.size());
}

std::vector<int> ranks_shared_min(std::span<const double> scores, bool higher_better) {
  std::vector<int> ranks(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    int better = 0;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (higher_better ? scores[j] > scores[i] : scores[j] < scores[i]) ++better;
    }
    ranks[i] = better + 1;
  }
  return ranks;
}

double student_t_cdf(double t, double dof) {
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * reg_inc_beta(0.5 * dof, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

double one_sided_p_value(std::span<const double> candidate,
                         std::span<const double> baseline) {
  if (candidate.size() < 2 || baseline.size() < 2)
    throw std::invalid_argument("one_sided_p_value: both samples need size >= 2");
  auto mean_var = [](std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair<double, double>{m, ss / (n - 1.0)};
  };
  const auto [mc, vc] = mean_var(candidate);
  const auto [mb, vb] = mean_var(baseline);
  const double nc = static_cast<double>(candidate.size());
  const double nb = static_cast<double>(baseline.size());
  const double se2 = vc / nc + vb / nb;
  if (se2 == 0.0) {
    if (mc == mb) return 0.5;
    return mc > mb ? 0.0 : 1.0;
  }
  const double t = (mc - mb) / std::sqrt(se2);
  const double dof = se2 * se2 /
                     ((vc / nc) * (vc / nc) / (nc - 1.0) +
                      (vb / nb) * (vb / nb) / (nb - 1.0));
  return 1.0 - student_t_cdf(t, dof);
}

MetricSummary MetricSummary::of(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("MetricSummary: empty input");
  MetricSummary s;
  s.mean = 0.0;
  s.min = values[0];
  s.max = values[0];
  for (double v : values) {
    s.mean += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean /= static_cast<double>(values.size());
  return s;
}

void EvalReport::recompute_aggregates(int best_seed_count, bool rank_by_test) {
  folds.clear();
  std::vector<int> fold_ids;
  for (const auto& s : seeds)
    if (std::find(fold_ids.begin(), fold_ids.end(), s.fold) == fold_ids.end())
      fold_ids.push_back(s.fold);
  std::sort(fold_ids.begin(), fold_ids.end());

  for (int f : fold_ids) {
    // Select the top seeds by the ranking metric; ties break on seed index.
    std::vector<const SeedMetrics*> in_fold;
    for (auto& s : seeds)
      if (s.fold == f) in_fold.push_back(&s);
    std::sort(in_fold.begin(), in_fold.end(), [&](const auto* a, const auto* b) {
      const double ka = rank_by_test ? a->test_cindex : a->val_cindex;
      const double kb = rank_by_test ? b->test_cindex : b->val_cindex;
      if (ka != kb) return ka > kb;
      return a->seed_index < b->seed_index;
    });
    const int keep = std::min<int>(best_seed_count, static_cast<int>(in_fold.size()));
    FoldMetrics fm;
    fm.fold = f;
    for (auto& s : seeds)
      if (s.fold == f) s.selected = false;
    for (int i = 0; i < keep; ++i) {
      auto* sm = const_cast<SeedMetrics*>(in_fold[i]);
      sm->selected = true;
      fm.cindex += sm->test_cindex;
      fm.ibs += sm->test_ibs;
    }
    fm.cindex /= keep;
    fm.ibs /= keep;
    folds.push_back(fm);
  }
  std::vector<double> cs, is;
  for (const auto& f : folds) {
    cs.push_back(f.cindex);
    is.push_back(f.ibs);
  }
  cindex = MetricSummary::of(cs);
  ibs = MetricSummary::of(is);
}

}  // namespace vaesurv
