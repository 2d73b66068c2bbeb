#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vaesurv/matrix.hpp"

namespace vaesurv {

// Kaplan-Meier product-limit curve: a right-continuous step function over
// the distinct observed times. Evaluation before the first knot is 1.
struct KMCurve {
  std::vector<double> knots;
  std::vector<double> survival;  // value at and after each knot
  std::vector<int> at_risk;      // number at risk just before each knot

  double eval(double t) const;       // S(t)
  double eval_left(double t) const;  // S(t-), the left limit
};

KMCurve kaplan_meier(std::span<const double> times, std::span<const int> events);

// KM of the censoring distribution G: same estimator with flipped flags.
KMCurve censoring_survival(std::span<const double> times, std::span<const int> events);

// Time-dependent concordance: over pairs with d_i = 1 and t_i < t_j, the
// pair is concordant when F(t_i|x_i) > F(t_i|x_j); ties in F count 1/2.
// `cdf` has one row per subject; `grid` must contain every event time.
// Returns nullopt when there are no admissible pairs.
std::optional<double> td_c_index(const Matrix& cdf, std::span<const double> grid,
                                 std::span<const double> times,
                                 std::span<const int> events);

// IPCW Brier score at time t. `survival_at_t` holds S(t|x_i) per subject.
// G is evaluated at t_i- for past events and at t for at-risk subjects,
// clamped at 1e-4 before dividing.
double brier_score(std::span<const double> survival_at_t,
                   std::span<const double> times, std::span<const int> events,
                   const KMCurve& G, double t);

// Trapezoidal average of the Brier score over an equally spaced grid on
// [0, t_max]; `survival` is subjects x grid.
double ibs(const Matrix& survival, std::span<const double> grid,
           std::span<const double> times, std::span<const int> events,
           const KMCurve& G);

// Equally spaced grid of `points` values covering [0, t_max].
std::vector<double> ibs_grid(double t_max, int points);

// Mean reciprocal rank, (1/Q) sum 1/rank_i.
double mrr(std::span<const int> ranks);

// Competition ranks with ties sharing the minimum (best) rank.
std::vector<int> ranks_shared_min(std::span<const double> scores, bool higher_better);

// Welch's one-sided t-test of H0: mean(baseline) >= mean(candidate); a
// small p supports the candidate being better. Both zero-variance with
// equal means gives p = 0.5 by convention.
double one_sided_p_value(std::span<const double> candidate,
                         std::span<const double> baseline);

// Student's t CDF via the regularized incomplete beta function.
double student_t_cdf(double t, double dof);

struct MetricSummary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;

  static MetricSummary of(std::span<const double> values);
};

struct SeedMetrics {
  int fold = 0;
  int seed_index = 0;
  uint64_t seed_value = 0;
  double val_cindex = 0.0;
  double test_cindex = 0.0;
  double test_ibs = 0.0;
  bool selected = false;
  int best_epoch = 0;
  int epochs_run = 0;
};

struct FoldMetrics {
  int fold = 0;
  double cindex = 0.0;  // mean over the selected seeds
  double ibs = 0.0;
};

struct EvalReport {
  std::vector<SeedMetrics> seeds;  // per-(fold, seed) breakdown
  std::vector<FoldMetrics> folds;
  MetricSummary cindex;  // over fold means
  MetricSummary ibs;

  // Re-derives fold aggregates and the summary from `seeds`. Seeds are
  // ranked by validation C-index (or test C-index when `rank_by_test`);
  // aggregates always average the test metrics of the selected seeds.
  void recompute_aggregates(int best_seed_count, bool rank_by_test = false);
};

}  // namespace vaesurv
