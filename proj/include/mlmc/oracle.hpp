#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mlmc/model.hpp"
#include "mlmc/trainer.hpp"

namespace mlmc {

// Closed-form undiscounted expected call payoff under GBM:
// s0 e^{mu T} Phi(d1) - K Phi(d2). For sigma sqrt(T) = 0 the deterministic
// limit max(s0 e^{mu T} - K, 0); for K = 0 exactly s0 e^{mu T}.
double bs_expected_payoff(const ParamVector& y);

struct ErrorReport {
  long n_test = 0;
  double linf = 0.0;
  double l1 = 0.0;
  ParamVector argmax_point;
  std::uint64_t seed = 0;
};

using Evaluator = std::function<double(const ParamVector&)>;

// Monte Carlo error of an approximation against the closed form: n_test
// points uniform on the box, L-inf (with argmax) and L1. Deterministic given
// (seed, n_test), independent of n_threads.
ErrorReport measure_error(const Evaluator& approx, const TrainingBox& box,
                          long n_test, std::uint64_t seed, int n_threads = 1);

struct BatchStudyRow {
  long long batch_size = 0;
  double mean_linf = 0.0;
  double std_linf = 0.0;
  double reduction = 0.0;  // NaN on the first row
};

// Repeated trainings per batch size; per-repetition seeds derived from
// base.seed, per-size rows with mean/std of the L-inf error and successive
// mean reductions.
std::vector<BatchStudyRow> batch_convergence_study(
    const TrainingBox& box, const std::vector<long long>& batch_list,
    int repetitions, const TrainConfig& base, long n_test);

struct VarianceReductionReport {
  double mean_linf_plain = 0.0;
  double mean_linf_is = 0.0;
  double error_ratio = 0.0;
  // Direct estimator-variance ratios Var[IS]/Var[plain] at the two s0
  // corners of the box (all other coordinates at their lower bounds).
  double variance_ratio_lo = 0.0;
  double variance_ratio_hi = 0.0;
};

// Paired trainings (plain vs importance-sampled targets) on shared
// substreams, plus directly measured estimator-variance ratios.
VarianceReductionReport variance_reduction_study(const TrainingBox& box,
                                                 long long batch, int repetitions,
                                                 const TrainConfig& base, long n_test,
                                                 long n_variance_samples = 1000000);

// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// |E[P_h] - oracle| for h = T / 2^level, measured as the mean of
// P_h - V(S_T^exact) with the exact terminal value driven by the same
// Brownian path. The coupled control variate leaves only O(h) variance, so
// the O(h) bias is resolved at moderate sample counts.
double weak_bias(const ParamVector& y, int level, long n_samples,
                 std::uint64_t seed, int n_threads = 1);

struct SlopeFitReport {
  double weak_error_slope = 0.0;      // |E[P_h] - oracle| vs h
  double level_variance_slope = 0.0;  // V[Y_l] vs h_l
  std::vector<double> weak_h, weak_bias;
  std::vector<double> var_h, var_value;
};

// Weak-order and level-variance slope fits at a fixed point: bias for
// h = T/2^l, l = 1..6; variances from pilot estimates at levels 1..5.
SlopeFitReport slope_fit_study(const ParamVector& y, long n_weak, long n_variance,
                               std::uint64_t seed, int n_threads = 1);

// Single estimator-variance comparison used by the variance-reduction study:
// Var[importance_sampled_payoff] / Var[plain exact-law payoff] at y.
double is_variance_ratio(const ParamVector& y, long n_samples, std::uint64_t seed,
                         int n_threads = 1);

}  // namespace mlmc
