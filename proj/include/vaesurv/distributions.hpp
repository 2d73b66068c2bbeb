#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vaesurv {

// Closed-form log-likelihoods, hazard/survival/CDF functions, the
// censoring-aware time likelihood, the diagonal-Gaussian KL term, and the
// reparameterization map. Everything here is a pure function; the same
// formulas are composed on the autodiff tape in elbo_graph.hpp, in the same
// evaluation order, so the two paths agree to the last bits.
//
// Adding another time family means providing a (log-hazard, log-survival)
// pair below and a decoder head mapping in model.cpp; nothing else changes.

inline constexpr double kProbEps = 1e-7;   // Bernoulli/Categorical floor
inline constexpr double kTimeEps = 1e-8;   // guards t^(alpha-1) as t -> 0
inline constexpr double kSqrt2Pi = 2.5066282746310002;

enum class TimeFamily { weibull, exponential };

struct TimeParams {
  TimeFamily family = TimeFamily::weibull;
  double alpha = 1.0;  // shape; fixed at 1 for the exponential family
  double lambda = 1.0;  // scale, in normalized time units

  static TimeParams weibull(double alpha, double lambda) {
    return {TimeFamily::weibull, alpha, lambda};
  }
  static TimeParams exponential(double lambda) {
    return {TimeFamily::exponential, 1.0, lambda};
  }
};

struct GaussianParams {
  double mu = 0.0;
  double sigma = 1.0;
};

struct BernoulliParams {
  double beta = 0.5;  // P(x = 1)
};

struct CategoricalParams {
  std::vector<double> theta;  // probability vector, length K
};

struct LatentGaussian {
  std::vector<double> mu;
  std::vector<double> log_var;
};

inline void check_time_params(const TimeParams& p) {
  if (!(p.alpha > 0.0) || !(p.lambda > 0.0))
    throw std::invalid_argument("TimeParams: alpha and lambda must be > 0 (got alpha=" +
                                std::to_string(p.alpha) + ", lambda=" +
                                std::to_string(p.lambda) + ")");
}

/// -log(sigma sqrt(2 pi)) - ((x - mu) / sigma)^2 / 2
inline double gaussian_loglik(double x, const GaussianParams& p) {
  if (!(p.sigma > 0.0))
    throw std::invalid_argument("gaussian_loglik: sigma must be > 0, got " +
                                std::to_string(p.sigma));
  const double z = (x - p.mu) / p.sigma;
  return -std::log(p.sigma * kSqrt2Pi) - 0.5 * (z * z);
}

/// x log(beta) + (1 - x) log(1 - beta), with beta clamped to [1e-7, 1 - 1e-7].
inline double bernoulli_loglik(int x, const BernoulliParams& p) {
  if (x != 0 && x != 1)
    throw std::invalid_argument("bernoulli_loglik: x must be 0 or 1, got " +
                                std::to_string(x));
  const double b = std::min(std::max(p.beta, kProbEps), 1.0 - kProbEps);
  const double xd = static_cast<double>(x);
  return xd * std::log(b) + (1.0 - xd) * std::log(1.0 - b);
}

/// log(theta_x) after flooring every theta_k at 1e-7 and renormalizing.
inline double categorical_loglik(int x, const CategoricalParams& p) {
  const int k = static_cast<int>(p.theta.size());
  if (x < 0 || x >= k)
    throw std::invalid_argument("categorical_loglik: index " + std::to_string(x) +
                                " out of range for K=" + std::to_string(k));
  double sum = 0.0;
  for (double t : p.theta) sum += std::max(t, kProbEps);
  return std::log(std::max(p.theta[x], kProbEps) / sum);
}

/// log(alpha/lambda) + (alpha - 1) log(t/lambda); t below 1e-8 is clamped.
inline double weibull_log_hazard(double t, const TimeParams& p) {
  check_time_params(p);
  const double tc = std::max(t, kTimeEps);
  return (std::log(p.alpha) - std::log(p.lambda)) +
         (p.alpha - 1.0) * (std::log(tc) - std::log(p.lambda));
}

/// -(t/lambda)^alpha, evaluated as -exp(alpha (log t - log lambda)).
inline double weibull_log_survival(double t, const TimeParams& p) {
  check_time_params(p);
  if (t < 0.0)
    throw std::invalid_argument("weibull_log_survival: t must be >= 0, got " +
                                std::to_string(t));
  if (t == 0.0) return 0.0;
  return -std::exp(p.alpha * (std::log(t) - std::log(p.lambda)));
}

/// 1 - exp(-(t/lambda)^alpha), in [0, 1].
inline double weibull_cdf(double t, const TimeParams& p) {
  return -std::expm1(weibull_log_survival(t, p));
}

/// d log h(t) + log S(t): the exact log-density when d = 1, log-survival
/// when d = 0. t is clamped at 1e-8 in both terms.
inline double censored_time_loglik(double t, int d, const TimeParams& p) {
  if (d != 0 && d != 1)
    throw std::invalid_argument("censored_time_loglik: d must be 0 or 1, got " +
                                std::to_string(d));
  check_time_params(p);
  const double tc = std::max(t, kTimeEps);
  const double log_s = -std::exp(p.alpha * (std::log(tc) - std::log(p.lambda)));
  if (d == 0) return log_s;
  const double log_h = (std::log(p.alpha) - std::log(p.lambda)) +
                       (p.alpha - 1.0) * (std::log(tc) - std::log(p.lambda));
  return log_h + log_s;
}

/// KL(q || N(0, I)) = sum_j (mu_j^2 + var_j - log var_j - 1) / 2, >= 0.
inline double kl_std_normal(const LatentGaussian& q) {
  if (q.mu.size() != q.log_var.size())
    throw std::invalid_argument("kl_std_normal: mu and log_var lengths differ");
  double sum = 0.0;
  for (size_t j = 0; j < q.mu.size(); ++j) {
    const double term =
        ((q.mu[j] * q.mu[j] + std::exp(q.log_var[j])) - q.log_var[j]) - 1.0;
    sum += term;
  }
  return 0.5 * sum;
}

/// z_j = mu_j + exp(log_var_j / 2) eps_j
inline std::vector<double> reparameterize(const LatentGaussian& q,
                                          std::span<const double> eps) {
  if (eps.size() != q.mu.size())
    throw std::invalid_argument("reparameterize: eps length " +
                                std::to_string(eps.size()) + " != latent dim " +
                                std::to_string(q.mu.size()));
  std::vector<double> z(q.mu.size());
  for (size_t j = 0; j < z.size(); ++j)
    z[j] = q.mu[j] + std::exp(0.5 * q.log_var[j]) * eps[j];
  return z;
}

}  // namespace vaesurv
