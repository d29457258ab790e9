#include "mlmc/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mlmc/parallel.hpp"
#include "mlmc/rng.hpp"
#include "mlmc/sde.hpp"

namespace mlmc {

double bs_expected_payoff(const ParamVector& y) {
  if (!(y.s0 > 0.0))
    throw std::invalid_argument("bs_expected_payoff: s0 must be > 0");
  if (!(y.strike >= 0.0))
    throw std::invalid_argument("bs_expected_payoff: strike must be >= 0");
  const double forward_value = y.s0 * std::exp(y.mu * y.maturity);
  if (y.strike == 0.0) return forward_value;
  const double vol_sq = y.sigma * std::sqrt(y.maturity);
  if (!(vol_sq > 0.0)) return call_payoff(forward_value, y.strike);
  const double d1 = (std::log(y.s0 / y.strike) +
                     (y.mu + 0.5 * y.sigma * y.sigma) * y.maturity) /
                    vol_sq;
  const double d2 = d1 - vol_sq;
  return forward_value * normal_cdf(d1) - y.strike * normal_cdf(d2);
}

ErrorReport measure_error(const Evaluator& approx, const TrainingBox& box,
                          long n_test, std::uint64_t seed, int n_threads) {
  if (n_test < 1) throw std::invalid_argument("measure_error: n_test must be >= 1");
  validate_box(box);

  struct LanePartial {
    double sum_abs = 0.0;
    double max_abs = -1.0;
    long max_index = -1;
    ParamVector max_point;
  };
  std::vector<LanePartial> partials(static_cast<std::size_t>(kLanes));

  run_lanes(kLanes, n_threads, [&](int lane) {
    LanePartial p;
    for (long i = lane; i < n_test; i += kLanes) {
      RngStream s = seed_stream(
          seed, substream_id(StreamPhase::Evaluation, 0,
                             static_cast<std::uint64_t>(i)));
      ParamVector y = sample_uniform_box(s, box);
      double err = std::fabs(bs_expected_payoff(y) - approx(y));
      p.sum_abs += err;
      if (err > p.max_abs || (err == p.max_abs && i < p.max_index)) {
        p.max_abs = err;
        p.max_index = i;
        p.max_point = y;
      }
    }
    partials[static_cast<std::size_t>(lane)] = p;
  });

  tree_combine(kLanes, [&](int dst, int src) {
    auto& a = partials[static_cast<std::size_t>(dst)];
    const auto& b = partials[static_cast<std::size_t>(src)];
    a.sum_abs += b.sum_abs;
    if (b.max_abs > a.max_abs ||
        (b.max_abs == a.max_abs && b.max_index >= 0 &&
         (a.max_index < 0 || b.max_index < a.max_index))) {
      a.max_abs = b.max_abs;
      a.max_index = b.max_index;
      a.max_point = b.max_point;
    }
  });

  ErrorReport report;
  report.n_test = n_test;
  report.linf = partials[0].max_abs;
  report.l1 = partials[0].sum_abs / static_cast<double>(n_test);
  report.argmax_point = partials[0].max_point;
  report.seed = seed;
  return report;
}

namespace {

// Distinct training seeds per (study row, repetition); splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  double mean = sum / static_cast<double>(v.size());
  double m2 = 0.0;
  for (double x : v) m2 += (x - mean) * (x - mean);
  double std = v.size() > 1 ? std::sqrt(m2 / static_cast<double>(v.size() - 1)) : 0.0;
  return {mean, std};
}

}  // namespace

std::vector<BatchStudyRow> batch_convergence_study(
    const TrainingBox& box, const std::vector<long long>& batch_list,
    int repetitions, const TrainConfig& base, long n_test) {
  if (batch_list.empty())
    throw std::invalid_argument("batch_convergence_study: empty batch list");
  for (std::size_t i = 1; i < batch_list.size(); ++i)
    if (batch_list[i] <= batch_list[i - 1])
      throw std::invalid_argument("batch_convergence_study: batch list must increase");
  if (repetitions < 1)
    throw std::invalid_argument("batch_convergence_study: repetitions must be >= 1");

  std::vector<BatchStudyRow> rows;
  double prev_mean = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t bi = 0; bi < batch_list.size(); ++bi) {
    std::vector<double> errs;
    for (int rep = 0; rep < repetitions; ++rep) {
      TrainConfig cfg = base;
      cfg.box = box;
      cfg.batch_size = batch_list[bi];
      cfg.seed = mix_seed(base.seed, bi * 1000 + static_cast<std::uint64_t>(rep));
      TrainedNet net = train_single_level(cfg);
      ErrorReport report = measure_error(
          [&](const ParamVector& y) { return net.evaluate(y); }, box, n_test,
          base.seed, base.n_threads);
      errs.push_back(report.linf);
    }
    MeanStd ms = mean_std(errs);
    BatchStudyRow row;
    row.batch_size = batch_list[bi];
    row.mean_linf = ms.mean;
    row.std_linf = ms.std;
    row.reduction = bi == 0 ? std::numeric_limits<double>::quiet_NaN()
                            : ms.mean / prev_mean;
    prev_mean = ms.mean;
    rows.push_back(row);
  }
  return rows;
}

double is_variance_ratio(const ParamVector& y, long n_samples, std::uint64_t seed,
                         int n_threads) {
  struct Acc {
    long long n = 0;
    double mean = 0.0, m2 = 0.0;
    void add(double x) {
      ++n;
      double d = x - mean;
      mean += d / static_cast<double>(n);
      m2 += d * (x - mean);
    }
    void combine(const Acc& o) {
      if (o.n == 0) return;
      if (n == 0) {
        *this = o;
        return;
      }
      double d = o.mean - mean;
      long long t = n + o.n;
      mean += d * static_cast<double>(o.n) / static_cast<double>(t);
      m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) /
                       static_cast<double>(t);
      n = t;
    }
  };
  std::vector<Acc> plain(static_cast<std::size_t>(kLanes));
  std::vector<Acc> weighted(static_cast<std::size_t>(kLanes));
  run_lanes(kLanes, n_threads, [&](int lane) {
    Acc p, w;
    for (long i = lane; i < n_samples; i += kLanes) {
      RngStream s = seed_stream(
          seed, substream_id(StreamPhase::Study, 0, static_cast<std::uint64_t>(i)));
      p.add(call_payoff(exact_gbm_terminal(y, s), y.strike));
      w.add(importance_sampled_payoff(y, s));
    }
    plain[static_cast<std::size_t>(lane)] = p;
    weighted[static_cast<std::size_t>(lane)] = w;
  });
  tree_combine(kLanes, [&](int dst, int src) {
    plain[static_cast<std::size_t>(dst)].combine(plain[static_cast<std::size_t>(src)]);
    weighted[static_cast<std::size_t>(dst)].combine(
        weighted[static_cast<std::size_t>(src)]);
  });
  double var_plain = plain[0].m2 / static_cast<double>(plain[0].n - 1);
  double var_is = weighted[0].m2 / static_cast<double>(weighted[0].n - 1);
  return var_is / var_plain;
}

VarianceReductionReport variance_reduction_study(const TrainingBox& box,
                                                 long long batch, int repetitions,
                                                 const TrainConfig& base, long n_test,
                                                 long n_variance_samples) {
  if (!(box.strike.lo > 0.0))
    throw std::invalid_argument("variance_reduction_study: box needs strike > 0");
  std::vector<double> plain_errs, is_errs;
  for (int rep = 0; rep < repetitions; ++rep) {
    TrainConfig cfg = base;
    cfg.box = box;
    cfg.batch_size = batch;
    cfg.seed = mix_seed(base.seed, 5000 + static_cast<std::uint64_t>(rep));
    cfg.data_mode = DataMode::SinglePath;
    TrainedNet plain_net = train_single_level(cfg);
    cfg.data_mode = DataMode::ImportanceSampled;  // same substreams as the pair
    TrainedNet is_net = train_single_level(cfg);
    plain_errs.push_back(
        measure_error([&](const ParamVector& y) { return plain_net.evaluate(y); },
                      box, n_test, base.seed, base.n_threads)
            .linf);
    is_errs.push_back(
        measure_error([&](const ParamVector& y) { return is_net.evaluate(y); },
                      box, n_test, base.seed, base.n_threads)
            .linf);
  }

  VarianceReductionReport report;
  report.mean_linf_plain = mean_std(plain_errs).mean;
  report.mean_linf_is = mean_std(is_errs).mean;
  report.error_ratio = report.mean_linf_is / report.mean_linf_plain;

  ParamVector corner_lo{box.mu.lo, box.sigma.lo, box.s0.lo, box.maturity.lo,
                        box.strike.lo};
  ParamVector corner_hi = corner_lo;
  corner_hi.s0 = box.s0.hi;
  report.variance_ratio_lo =
      is_variance_ratio(corner_lo, n_variance_samples, mix_seed(base.seed, 7001),
                        base.n_threads);
  report.variance_ratio_hi =
      is_variance_ratio(corner_hi, n_variance_samples, mix_seed(base.seed, 7002),
                        base.n_threads);
  return report;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_loglog_slope: need at least two points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw std::invalid_argument("fit_loglog_slope: nonpositive point");
    double lx = std::log(x[i]);
    double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double weak_bias(const ParamVector& y, int level, long n_samples,
                 std::uint64_t seed, int n_threads) {
  validate_params(y);
  LevelSpec spec{level, 2, 1};
  const long n_steps = spec.fine_steps();
  const double h = spec.step_width(y.maturity);
  const double sqrt_h = std::sqrt(h);
  const GbmDynamics dyn{y.mu, y.sigma};
  const double drift_exact = (y.mu - 0.5 * y.sigma * y.sigma) * y.maturity;

  std::vector<double> lane_sum(static_cast<std::size_t>(kLanes), 0.0);
  run_lanes(kLanes, n_threads, [&](int lane) {
    double sum = 0.0;
    for (long i = lane; i < n_samples; i += kLanes) {
      RngStream s = seed_stream(
          seed, substream_id(StreamPhase::Study, static_cast<unsigned>(level),
                             static_cast<std::uint64_t>(i)));
      double state = y.s0;
      double brownian = 0.0;
      for (long k = 0; k < n_steps; ++k) {
        double dw = sqrt_h * s.next_normal();
        brownian += dw;
        state = milstein_step_dw(dyn, state, h, dw);
      }
      double exact = y.s0 * std::exp(drift_exact + y.sigma * brownian);
      sum += call_payoff(state, y.strike) - call_payoff(exact, y.strike);
    }
    lane_sum[static_cast<std::size_t>(lane)] = sum;
  });
  tree_combine(kLanes, [&](int dst, int src) {
    lane_sum[static_cast<std::size_t>(dst)] += lane_sum[static_cast<std::size_t>(src)];
  });
  return std::fabs(lane_sum[0] / static_cast<double>(n_samples));
}

SlopeFitReport slope_fit_study(const ParamVector& y, long n_weak, long n_variance,
                               std::uint64_t seed, int n_threads) {
  validate_params(y);
  SlopeFitReport report;

  for (int level = 1; level <= 6; ++level) {
    report.weak_h.push_back(LevelSpec{level, 2, 1}.step_width(y.maturity));
    report.weak_bias.push_back(weak_bias(y, level, n_weak, seed, n_threads));
  }
  report.weak_error_slope = fit_loglog_slope(report.weak_h, report.weak_bias);

  for (int level = 1; level <= 5; ++level) {
    LevelSpec spec{level, 2, 1};
    LevelStats stats =
        pilot_level_stats(y, spec, n_variance, mix_seed(seed, 9000 + level),
                          n_threads);
    report.var_h.push_back(spec.step_width(y.maturity));
    report.var_value.push_back(stats.variance);
  }
  report.level_variance_slope = fit_loglog_slope(report.var_h, report.var_value);
  return report;
}

}  // namespace mlmc
