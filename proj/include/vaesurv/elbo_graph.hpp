#pragma once

#include <limits>

#include "vaesurv/autodiff.hpp"
#include "vaesurv/distributions.hpp"

namespace vaesurv::graph {

// Tape-side counterparts of the closed forms in distributions.hpp. Each
// builder composes primitives in the same order as the scalar code so that
// values agree bitwise; keep the two in sync when touching either.

/// 0.5 * rowsum(mu^2 + exp(lv) - lv - 1), per sample (r x 1).
inline int kl_std_normal_node(ad::Tape& t, int mu, int log_var) {
  const int s1 = t.add(t.square(mu), t.exp(log_var));
  const int s3 = t.affine(t.sub(s1, log_var), 1.0, -1.0);
  return t.affine(t.row_sum(s3), 0.5, 0.0);
}

/// z = mu + exp(lv / 2) * eps
inline int reparameterize_node(ad::Tape& t, int mu, int log_var, int eps) {
  return t.add(mu, t.mul(t.exp(t.affine(log_var, 0.5, 0.0)), eps));
}

/// d * log h + log S for Weibull(alpha, lambda); log_tc holds log(max(t, 1e-8)).
inline int censored_time_ll_node(ad::Tape& t, int log_tc, int d, int alpha, int lambda) {
  const int log_lam = t.log(lambda);
  const int lr = t.sub(log_tc, log_lam);                      // log(t / lambda)
  const int log_s = t.affine(t.exp(t.mul(alpha, lr)), -1.0, 0.0);
  const int h1 = t.sub(t.log(alpha), log_lam);
  const int h2 = t.mul(t.affine(alpha, 1.0, -1.0), lr);
  const int log_h = t.add(h1, h2);
  return t.add(t.mul(d, log_h), log_s);
}

/// -log(sigma sqrt(2 pi)) - ((x - mu) / sigma)^2 / 2
inline int gaussian_ll_node(ad::Tape& t, int x, int mu, int sigma) {
  const int t1 = t.affine(t.log(t.affine(sigma, kSqrt2Pi, 0.0)), -1.0, 0.0);
  const int z = t.div(t.sub(x, mu), sigma);
  return t.sub(t1, t.affine(t.square(z), 0.5, 0.0));
}

/// x log(b) + (1 - x) log(1 - b), b clamped to [1e-7, 1 - 1e-7].
inline int bernoulli_ll_node(ad::Tape& t, int x, int one_minus_x, int beta) {
  const int b = t.clamp(beta, kProbEps, 1.0 - kProbEps);
  const int lterm = t.mul(x, t.log(b));
  const int rterm = t.mul(one_minus_x, t.log(t.affine(b, -1.0, 1.0)));
  return t.add(lterm, rterm);
}

/// log(theta_x) with the 1e-7 floor and renormalization; `onehot` selects x.
inline int categorical_ll_node(ad::Tape& t, int onehot, int theta) {
  const int floored = t.clamp(theta, kProbEps, std::numeric_limits<double>::infinity());
  const int renorm = t.div(floored, t.row_sum(floored));
  return t.row_sum(t.mul(t.log(renorm), onehot));
}

/// softplus(raw) + 1e-3, the positivity map for scale-like decoder outputs.
inline int softplus_floor_node(ad::Tape& t, int raw) {
  return t.affine(t.softplus(raw), 1.0, 1e-3);
}

}  // namespace vaesurv::graph
