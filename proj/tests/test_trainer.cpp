#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mlmc/oracle.hpp"
#include "mlmc/trainer.hpp"

using namespace mlmc;

namespace {

const TrainingBox kPaperBox{{0.02, 0.05}, {0.1, 0.2}, {80, 120}, {0.9, 1.0},
                            {109, 110}};

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.structure = {kParamDim, {8}};
  cfg.schedule = {0.01, 0.1, 1000};
  cfg.steps = 10;
  cfg.batch_size = 16;
  cfg.level_spec = {0, 2, 1};
  cfg.box = kPaperBox;
  cfg.seed = 1234;
  return cfg;
}

AllocationPlan single_level_plan(long long batch, long long steps) {
  AllocationPlan plan;
  plan.levels = 0;
  plan.samples = {batch};
  plan.batch_sizes = {batch};
  plan.train_steps = {steps};
  plan.step_widths = {1.0};
  plan.variances = {0.0};
  return plan;
}

}  // namespace

TEST_CASE("input scaling maps the box onto the unit cube") {
  double out[kParamDim];
  scale_input(kPaperBox, {0.02, 0.2, 100, 0.9, 110}, out);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 1.0);
  CHECK(out[2] == 0.5);
  CHECK(out[3] == 0.0);
  CHECK(out[4] == 1.0);

  TrainingBox degenerate = kPaperBox;
  degenerate.maturity = {1.0, 1.0};
  scale_input(degenerate, {0.02, 0.2, 100, 1.0, 110}, out);
  CHECK(out[3] == 0.5);
}

TEST_CASE("one gradient step on a fresh batch lowers the loss on that batch") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 1;
  cfg.batch_size = 1;
  TrainedNet net = train_single_level(cfg);

  // Rebuild the step-0 batch from the documented substream allocation.
  RngStream data = seed_stream(cfg.seed, substream_id(StreamPhase::TrainData, 0, 0));
  ParamVector y = sample_uniform_box(data, cfg.box);
  double target = simulate_payoff_path(y, cfg.level_spec, data);

  RngStream init = seed_stream(cfg.seed, substream_id(StreamPhase::WeightInit, 0, 0));
  Weights before = init_weights(cfg.structure, init);

  double scaled[kParamDim];
  scale_input(cfg.box, y, scaled);
  std::span<const double> x(scaled, kParamDim);
  double loss_before = std::pow(forward(cfg.structure, before, x) - target, 2);
  double loss_after = std::pow(forward(cfg.structure, net.weights, x) - target, 2);
  CHECK(loss_after < loss_before);
  CHECK(net.log.size() == 1);
  CHECK(net.log[0].loss == doctest::Approx(loss_before).epsilon(1e-12));
}

TEST_CASE("training fits a constant deterministic target") {
  // sigma = 0 and zero strike on a single-point box: the payoff is the
  // deterministic product and the net must learn that constant.
  TrainConfig cfg;
  cfg.structure = {kParamDim, {16, 16}};
  cfg.schedule = {0.05, 0.1, 4000};
  cfg.steps = 10000;
  cfg.batch_size = 8;
  cfg.level_spec = {0, 2, 1};
  cfg.box = TrainingBox{{0.05, 0.05}, {0, 0}, {100, 100}, {1, 1}, {0, 0}};
  cfg.seed = 77;
  TrainedNet net = train_single_level(cfg);
  double target = 105.0;  // one Milstein step at sigma = 0
  CHECK(std::fabs(net.evaluate({0.05, 0.0, 100, 1, 0}) - target) < 0.01);
}

TEST_CASE("an L=0 plan reproduces single-level training bit for bit") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 25;
  cfg.batch_size = 32;
  TrainedNet single = train_single_level(cfg);
  MultilevelNet multi = train_multilevel(single_level_plan(32, 25), cfg);
  REQUIRE(multi.nets.size() == 1);
  CHECK(single.weights == multi.nets[0].weights);
}

TEST_CASE("training is reproducible and thread-count independent") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 20;
  cfg.batch_size = 200;
  TrainedNet a = train_single_level(cfg);
  cfg.n_threads = 8;
  TrainedNet b = train_single_level(cfg);
  CHECK(a.weights == b.weights);
}

TEST_CASE("retraining with a different step count on one level leaves others alone") {
  TrainConfig cfg = tiny_config();
  AllocationPlan plan;
  plan.levels = 1;
  plan.samples = {64, 16};
  plan.batch_sizes = {64, 16};
  plan.train_steps = {12, 12};
  plan.step_widths = {1.0, 0.5};
  plan.variances = {0, 0};
  MultilevelNet base = train_multilevel(plan, cfg);
  plan.train_steps[1] = 30;  // perturb only level 1
  MultilevelNet changed = train_multilevel(plan, cfg);
  CHECK(base.nets[0].weights == changed.nets[0].weights);
  CHECK(base.nets[1].weights != changed.nets[1].weights);
}

TEST_CASE("multilevel evaluation sums its components") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 5;
  TrainedNet net = train_single_level(cfg);
  MultilevelNet single{{net}, cfg.level_spec};
  ParamVector y{0.03, 0.15, 90, 0.95, 109.5};
  CHECK(evaluate_multilevel(single, y) == net.evaluate(y));

  // A component with its output head negated cancels the original exactly.
  TrainedNet negated = net;
  std::size_t head = net.structure.parameter_count() - 8 - 1;  // 8x1 matrix + bias
  for (std::size_t k = head; k < negated.weights.size(); ++k)
    negated.weights[k] = -negated.weights[k];
  MultilevelNet cancelling{{net, negated}, cfg.level_spec};
  for (double s0 : {85.0, 100.0, 115.0})
    CHECK(evaluate_multilevel(cancelling, {0.03, 0.15, s0, 0.95, 109.5}) == 0.0);
}

TEST_CASE("a sum of zero-weight nets evaluates to zero everywhere") {
  TrainedNet zero;
  zero.structure = {kParamDim, {16, 16}};
  zero.weights.assign(zero.structure.parameter_count(), 0.0);
  zero.box = kPaperBox;
  MultilevelNet net{{zero, zero, zero}, {0, 2, 1}};
  RngStream s = seed_stream(303, 0);
  for (int i = 0; i < 100; ++i)
    CHECK(evaluate_multilevel(net, sample_uniform_box(s, kPaperBox)) == 0.0);
}

TEST_CASE("component order does not change the evaluated sum") {
  // Constant nets with exactly representable outputs keep the sum exact under
  // any ordering.
  auto constant_net = [&](double value) {
    TrainedNet net;
    net.structure = {kParamDim, {}};
    net.weights.assign(net.structure.parameter_count(), 0.0);
    net.weights.back() = value;  // affine bias
    net.box = kPaperBox;
    return net;
  };
  TrainedNet a = constant_net(1.5), b = constant_net(2.25), c = constant_net(-0.75);
  MultilevelNet abc{{a, b, c}, {0, 2, 1}};
  MultilevelNet cba{{c, b, a}, {0, 2, 1}};
  ParamVector y{0.03, 0.15, 90, 0.95, 109.5};
  CHECK(evaluate_multilevel(abc, y) == 3.0);
  CHECK(evaluate_multilevel(cba, y) == 3.0);
}

TEST_CASE("single-path training targets are unbiased for the discretized price") {
  // Justifies regressing on single paths: the sample mean over many target
  // draws approaches the level-h expectation, here cross-checked against the
  // closed form plus the measured weak bias margin.
  ParamVector y{0.05, 0.2, 100, 1, 110};
  LevelSpec spec{5, 2, 1};
  const long n = 200000;
  double sum = 0, sum2 = 0;
  for (long i = 0; i < n; ++i) {
    RngStream s = seed_stream(909, static_cast<std::uint64_t>(i));
    double v = simulate_payoff_path(y, spec, s);
    sum += v;
    sum2 += v * v;
  }
  double mean = sum / n;
  double se = std::sqrt((sum2 / n - mean * mean) / n);
  // The h = 1/32 discretization bias is well under 0.02 here.
  CHECK(std::fabs(mean - bs_expected_payoff(y)) < 0.02 + 3.0 * se);
}

TEST_CASE("importance-sampled targets are rejected above level zero") {
  TrainConfig cfg = tiny_config();
  cfg.data_mode = DataMode::ImportanceSampled;
  cfg.level_spec = {1, 2, 1};
  AllocationPlan plan;
  plan.levels = 1;
  plan.samples = {8, 8};
  plan.batch_sizes = {8, 8};
  plan.train_steps = {2, 2};
  plan.step_widths = {1.0, 0.5};
  plan.variances = {0, 0};
  cfg.level_spec = {0, 2, 1};
  CHECK_THROWS_AS(train_multilevel(plan, cfg), std::runtime_error);
  // Single-level importance sampling trains fine.
  cfg.steps = 3;
  CHECK_NOTHROW(train_single_level(cfg));
}

TEST_CASE("inner-mean targets average several coupled paths") {
  TrainConfig cfg = tiny_config();
  cfg.data_mode = DataMode::InnerMean;
  cfg.inner_samples = 4;
  cfg.steps = 3;
  CHECK_NOTHROW(train_single_level(cfg));
  cfg.inner_samples = 0;
  CHECK_THROWS_AS(train_single_level(cfg), std::invalid_argument);
}

TEST_CASE("a diverging run aborts with step diagnostics and a partial log") {
  TrainConfig cfg = tiny_config();
  cfg.schedule = {1e25, 1.0, 1000};  // guaranteed blow-up
  cfg.steps = 50;
  cfg.log_every = 1;
  try {
    train_single_level(cfg);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
    CHECK(e.level == 0);
    CHECK(!e.partial_log.empty());
    CHECK(!std::isfinite(e.partial_log.back().loss));
  }
}

TEST_CASE("simulation overflow in batch generation aborts cleanly under threads") {
  TrainConfig cfg = tiny_config();
  cfg.box = TrainingBox{{1e3, 1e3}, {0, 0}, {1e306, 1e306}, {1, 1}, {0, 0}};
  cfg.steps = 3;
  cfg.batch_size = 256;
  for (int threads : {1, 4}) {
    cfg.n_threads = threads;
    CHECK_THROWS_AS(train_single_level(cfg), TrainingError);
  }
}

TEST_CASE("plan and single-level path-step cost accounting") {
  LevelSpec geom{0, 2, 1};
  AllocationPlan plan;
  plan.levels = 2;
  plan.samples = {100, 50, 25};
  plan.batch_sizes = {100, 50, 25};
  plan.train_steps = {10, 10, 10};
  // level 0: 10*100*1, level 1: 10*50*(2+1), level 2: 10*25*(4+2)
  CHECK(plan_path_step_cost(plan, geom) == 1000 + 1500 + 1500);
  CHECK(single_level_path_step_cost(10, 100, geom.at_level(2)) == 4000);
}
