#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlmc/oracle.hpp"
#include "mlmc/rng.hpp"
#include "mlmc/sde.hpp"

using namespace mlmc;

namespace {

const ParamVector kPoint{0.05, 0.2, 100.0, 1.0, 110.0};
const TrainingBox kPaperBox{{0.02, 0.05}, {0.1, 0.2}, {80, 120}, {0.9, 1.0},
                            {109, 110}};

// Simpson quadrature of the payoff against the standard normal density; an
// oracle that never touches the library's normal CDF.
double price_by_quadrature(const ParamVector& y) {
  const int n = 200000;  // even
  const double lo = -14.0, hi = 14.0;
  const double dz = (hi - lo) / n;
  auto f = [&](double z) {
    double terminal = y.s0 * std::exp((y.mu - 0.5 * y.sigma * y.sigma) * y.maturity +
                                      y.sigma * std::sqrt(y.maturity) * z);
    double payoff = terminal > y.strike ? terminal - y.strike : 0.0;
    return payoff * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::acos(-1.0));
  };
  double sum = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) sum += f(lo + i * dz) * (i % 2 ? 4.0 : 2.0);
  return sum * dz / 3.0;
}

TrainConfig tiny_study_config() {
  TrainConfig cfg;
  cfg.structure = {kParamDim, {4}};
  cfg.schedule = {0.05, 0.1, 200};
  cfg.steps = 150;
  cfg.batch_size = 50;
  cfg.level_spec = {0, 2, 1};
  cfg.seed = 4321;
  return cfg;
}

}  // namespace

TEST_CASE("closed form agrees with an independent quadrature oracle") {
  // Frozen from two independent oracles (quadrature of the lognormal density
  // and a large exact-law Monte Carlo run), matching to 9 digits.
  CHECK(bs_expected_payoff(kPoint) == doctest::Approx(6.3497700703).epsilon(1e-9));
  for (ParamVector y : {ParamVector{0.03, 0.15, 95, 0.95, 109.5},
                        ParamVector{0.02, 0.1, 80, 0.9, 110},
                        ParamVector{0.05, 0.2, 120, 1.0, 109}})
    CHECK(bs_expected_payoff(y) == doctest::Approx(price_by_quadrature(y)).epsilon(1e-8));
}

TEST_CASE("closed form limits") {
  CHECK(bs_expected_payoff({0.05, 0.2, 100, 1, 0}) ==
        doctest::Approx(100.0 * std::exp(0.05)).epsilon(1e-15));
  // sigma -> 0, out of the money: deterministic forward below the strike.
  CHECK(bs_expected_payoff({0.05, 0.0, 100, 1, 110}) == 0.0);
  // sigma -> 0, in the money.
  CHECK(bs_expected_payoff({0.05, 0.0, 100, 1, 90}) ==
        doctest::Approx(100.0 * std::exp(0.05) - 90.0).epsilon(1e-12));
  CHECK_THROWS_AS(bs_expected_payoff({0.05, 0.2, 0, 1, 110}), std::invalid_argument);
  CHECK_THROWS_AS(bs_expected_payoff({0.05, 0.2, 100, 1, -1}), std::invalid_argument);
}

TEST_CASE("closed form is monotone and bounded on the training set") {
  RngStream s = seed_stream(5150, 0);
  for (int i = 0; i < 2000; ++i) {
    ParamVector y = sample_uniform_box(s, kPaperBox);
    double price = bs_expected_payoff(y);
    CHECK(price >= 0.0);
    CHECK(price <= y.s0 * std::exp(y.mu * y.maturity));
    ParamVector up = y;
    up.s0 += 1.0;
    CHECK(bs_expected_payoff(up) >= price);
    ParamVector worse = y;
    worse.strike += 0.5;
    CHECK(bs_expected_payoff(worse) <= price);
  }
}

TEST_CASE("closed form matches exact-law Monte Carlo at random points") {
  RngStream pts = seed_stream(616, 0);
  const long n = 200000;
  for (int trial = 0; trial < 5; ++trial) {
    ParamVector y = sample_uniform_box(pts, kPaperBox);
    double sum = 0, sum2 = 0;
    for (long i = 0; i < n; ++i) {
      RngStream s = seed_stream(617 + trial, static_cast<std::uint64_t>(i));
      double v = call_payoff(exact_gbm_terminal(y, s), y.strike);
      sum += v;
      sum2 += v * v;
    }
    double mean = sum / n;
    double se = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::fabs(mean - bs_expected_payoff(y)) < 4.0 * se);
  }
}

TEST_CASE("measure_error on the oracle itself is zero") {
  ErrorReport r = measure_error([](const ParamVector& y) { return bs_expected_payoff(y); },
                                kPaperBox, 20000, 99);
  CHECK(r.linf == 0.0);
  CHECK(r.l1 == 0.0);
  CHECK(r.n_test == 20000);
}

TEST_CASE("measure_error sees a constant shift exactly") {
  ErrorReport r = measure_error(
      [](const ParamVector& y) { return bs_expected_payoff(y) + 0.5; }, kPaperBox,
      20000, 99);
  CHECK(r.linf == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.l1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.l1 <= r.linf);
}

TEST_CASE("measure_error is deterministic and thread-count independent") {
  auto approx = [](const ParamVector& y) { return 0.25 * y.s0; };
  ErrorReport a = measure_error(approx, kPaperBox, 50000, 7, 1);
  ErrorReport b = measure_error(approx, kPaperBox, 50000, 7, 8);
  CHECK(a.linf == b.linf);
  CHECK(a.l1 == b.l1);
  CHECK(a.argmax_point.s0 == b.argmax_point.s0);
  ErrorReport c = measure_error(approx, kPaperBox, 50000, 8, 1);
  CHECK(a.linf != c.linf);  // different seed, different test points
}

TEST_CASE("zero surrogate error equals the sampled maximum of the price") {
  ErrorReport r = measure_error([](const ParamVector&) { return 0.0; }, kPaperBox,
                                100000, 31);
  // Grid scan of the maximum: the price is monotone per coordinate so the
  // grid includes the maximizing corner.
  double grid_max = 0.0;
  const int g = 10;
  for (int a = 0; a <= g; ++a)
    for (int b = 0; b <= g; ++b)
      for (int c = 0; c <= g; ++c)
        for (int d = 0; d <= g; ++d)
          for (int e = 0; e <= g; ++e) {
            ParamVector y{0.02 + 0.03 * a / g, 0.1 + 0.1 * b / g, 80.0 + 40.0 * c / g,
                          0.9 + 0.1 * d / g, 109.0 + 1.0 * e / g};
            grid_max = std::max(grid_max, bs_expected_payoff(y));
          }
  CHECK(r.linf <= grid_max + 1e-9);
  CHECK(r.linf >= grid_max - 0.5);
  CHECK(r.argmax_point.s0 > 115.0);
}

TEST_CASE("batch study reports decreasing means and bookkeeping columns") {
  TrainConfig cfg = tiny_study_config();
  TrainingBox slice{{0.05, 0.05}, {0.2, 0.2}, {100, 104}, {1, 1}, {110, 110}};
  auto rows = batch_convergence_study(slice, {50, 200}, 3, cfg, 2000);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].batch_size == 50);
  CHECK(std::isnan(rows[0].reduction));
  CHECK(rows[1].reduction ==
        doctest::Approx(rows[1].mean_linf / rows[0].mean_linf).epsilon(1e-12));
  CHECK(rows[0].std_linf >= 0.0);

  auto single = batch_convergence_study(slice, {50}, 2, cfg, 1000);
  REQUIRE(single.size() == 1);
  CHECK(std::isnan(single[0].reduction));

  CHECK_THROWS_AS(batch_convergence_study(slice, {200, 50}, 2, cfg, 1000),
                  std::invalid_argument);
}

TEST_CASE("doubling repetitions shrinks the standard error of the mean") {
  TrainConfig cfg = tiny_study_config();
  TrainingBox slice{{0.05, 0.05}, {0.2, 0.2}, {100, 104}, {1, 1}, {110, 110}};
  auto few = batch_convergence_study(slice, {50}, 4, cfg, 1000);
  auto many = batch_convergence_study(slice, {50}, 8, cfg, 1000);
  double se_few = few[0].std_linf / std::sqrt(4.0);
  double se_many = many[0].std_linf / std::sqrt(8.0);
  // Loose: the std estimate itself is noisy at this repetition count.
  CHECK(se_many < se_few * 1.2);
}

TEST_CASE("variance reduction study degenerates to ratio one as K -> 0") {
  ParamVector y = kPoint;
  y.strike = 1e-6;
  double ratio = is_variance_ratio(y, 200000, 12);
  CHECK(ratio == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("conditioning reduces the estimator variance at the study corners") {
  double lo = is_variance_ratio({0.05, 0.2, 100, 1, 110}, 200000, 13);
  double hi = is_variance_ratio({0.05, 0.2, 104, 1, 110}, 200000, 14);
  CHECK(lo < 1.0);
  CHECK(hi < 1.0);
  CHECK(lo < hi);  // variance ratio grows with s0 on this slice
}

TEST_CASE("variance reduction study trains a cheaper surrogate with IS targets") {
  TrainConfig cfg = tiny_study_config();
  TrainingBox slice{{0.05, 0.05}, {0.2, 0.2}, {100, 104}, {1, 1}, {110, 110}};
  auto report = variance_reduction_study(slice, 50, 2, cfg, 1000, 100000);
  CHECK(report.mean_linf_plain > 0.0);
  CHECK(report.mean_linf_is > 0.0);
  CHECK(report.error_ratio ==
        doctest::Approx(report.mean_linf_is / report.mean_linf_plain).epsilon(1e-12));
  CHECK(report.variance_ratio_lo > 0.0);
  CHECK(report.variance_ratio_lo < 1.0);
  CHECK(report.variance_ratio_hi > report.variance_ratio_lo);
}

TEST_CASE("slope fits recover first-order weak error and second-order variance") {
  SlopeFitReport report = slope_fit_study(kPoint, 100000, 40000, 2718);
  CHECK(report.weak_error_slope > 0.7);
  CHECK(report.weak_error_slope < 1.3);
  CHECK(report.level_variance_slope > 1.6);
  CHECK(report.level_variance_slope < 2.4);
  REQUIRE(report.weak_h.size() == 6);
  REQUIRE(report.var_h.size() == 5);
}

TEST_CASE("log-log slope fitting") {
  std::vector<double> x = {1.0, 0.5, 0.25, 0.125};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * v * v);
  CHECK(fit_loglog_slope(x, y) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(fit_loglog_slope({1.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(fit_loglog_slope({1.0, -1.0}, {1.0, 1.0}), std::invalid_argument);
}
