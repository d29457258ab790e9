#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlmc/net.hpp"

using namespace mlmc;

namespace {

Batch random_batch(const NetworkStructure& s, long size, RngStream& stream,
                   double target_scale = 1.0) {
  Batch b;
  b.size = size;
  b.input_dim = s.input_dim;
  b.inputs.resize(static_cast<std::size_t>(size) * s.input_dim);
  b.targets.resize(static_cast<std::size_t>(size));
  for (auto& x : b.inputs) x = 2.0 * stream.next_uniform() - 1.0;
  for (auto& t : b.targets) t = target_scale * (2.0 * stream.next_uniform() - 1.0);
  return b;
}

// Central finite differences on the batch loss.
Weights fd_gradient(const NetworkStructure& s, const Weights& theta, const Batch& b,
                    double step = 1e-6) {
  Weights grad(theta.size());
  Weights probe = theta;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    probe[k] = theta[k] + step;
    double up = loss_and_grad(s, probe, b).loss;
    probe[k] = theta[k] - step;
    double down = loss_and_grad(s, probe, b).loss;
    probe[k] = theta[k];
    grad[k] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace

TEST_CASE("parameter count matches the layer-by-layer layout") {
  NetworkStructure production{5, {50, 50}};
  CHECK(production.parameter_count() == 2901);  // 300 + 2550 + 51
  NetworkStructure tiny{1, {1}};
  CHECK(tiny.parameter_count() == 4);
  NetworkStructure deep{3, {4, 3}};
  CHECK(deep.parameter_count() == 3 * 4 + 4 + 4 * 3 + 3 + 3 + 1);
}

TEST_CASE("init_weights is deterministic with zero biases and bounded entries") {
  NetworkStructure s{5, {50, 50}};
  RngStream a = seed_stream(1, 0);
  RngStream b = seed_stream(1, 0);
  Weights wa = init_weights(s, a);
  Weights wb = init_weights(s, b);
  CHECK(wa == wb);
  CHECK(wa.size() == 2901);

  // Biases sit after each matrix block and must be exactly zero.
  auto check_layer = [&](std::size_t off, int fan_in, int fan_out) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int k = 0; k < fan_in * fan_out; ++k) {
      CHECK(std::fabs(wa[off + static_cast<std::size_t>(k)]) <= bound);
    }
    for (int k = 0; k < fan_out; ++k)
      CHECK(wa[off + static_cast<std::size_t>(fan_in) * fan_out + static_cast<std::size_t>(k)] == 0.0);
    return off + static_cast<std::size_t>(fan_in) * fan_out + static_cast<std::size_t>(fan_out);
  };
  std::size_t off = check_layer(0, 5, 50);
  off = check_layer(off, 50, 50);
  check_layer(off, 50, 1);
}

TEST_CASE("forward of the zero network is zero") {
  NetworkStructure s{5, {50, 50}};
  Weights zero(s.parameter_count(), 0.0);
  double x[5] = {0.3, -0.2, 0.9, 0.0, 1.0};
  CHECK(forward(s, zero, std::span<const double>(x, 5)) == 0.0);
}

TEST_CASE("forward matches a hand-evaluated single logistic unit") {
  NetworkStructure s{1, {1}};
  // W1 = 1, b1 = 0, W2 = 2, b2 = 1; input 0 -> 2 * logistic(0) + 1 = 2.
  Weights theta = {1.0, 0.0, 2.0, 1.0};
  double x = 0.0;
  CHECK(forward(s, theta, std::span<const double>(&x, 1)) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("forward saturates but stays finite for huge inputs") {
  NetworkStructure s{5, {8, 8}};
  RngStream stream = seed_stream(3, 0);
  Weights theta = init_weights(s, stream);
  double x[5] = {1e3, -1e3, 1e3, -1e3, 1e3};
  CHECK(std::isfinite(forward(s, theta, std::span<const double>(x, 5))));
}

TEST_CASE("loss and gradient vanish at a perfect fit") {
  NetworkStructure s{3, {4}};
  RngStream stream = seed_stream(5, 0);
  Weights theta = init_weights(s, stream);
  Batch b = random_batch(s, 6, stream);
  for (long i = 0; i < b.size; ++i)
    b.targets[static_cast<std::size_t>(i)] = forward(s, theta, b.input_row(i));
  LossGrad lg = loss_and_grad(s, theta, b);
  CHECK(lg.loss == 0.0);
  for (double g : lg.grad) CHECK(g == 0.0);
}

TEST_CASE("backprop matches central finite differences") {
  RngStream stream = seed_stream(8, 0);
  for (int trial = 0; trial < 5; ++trial) {
    NetworkStructure s{3, {4, 3}};
    Weights theta = init_weights(s, stream);
    Batch b = random_batch(s, 8, stream, 2.0);
    LossGrad lg = loss_and_grad(s, theta, b);
    Weights fd = fd_gradient(s, theta, b);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      double denom = std::max(std::fabs(fd[k]), 1e-4);
      CHECK(std::fabs(lg.grad[k] - fd[k]) / denom < 1e-5);
    }
  }
}

TEST_CASE("duplicating every batch element leaves loss and gradient unchanged") {
  NetworkStructure s{2, {3}};
  RngStream stream = seed_stream(9, 0);
  Weights theta = init_weights(s, stream);
  Batch b = random_batch(s, 8, stream);
  Batch doubled;
  doubled.size = 2 * b.size;
  doubled.input_dim = b.input_dim;
  doubled.inputs = b.inputs;
  doubled.inputs.insert(doubled.inputs.end(), b.inputs.begin(), b.inputs.end());
  doubled.targets = b.targets;
  doubled.targets.insert(doubled.targets.end(), b.targets.begin(), b.targets.end());

  LossGrad once = loss_and_grad(s, theta, b);
  LossGrad twice = loss_and_grad(s, theta, doubled);
  CHECK(once.loss == twice.loss);
  CHECK(once.grad == twice.grad);
}

TEST_CASE("loss is invariant under batch permutation") {
  NetworkStructure s{2, {3}};
  RngStream stream = seed_stream(10, 0);
  Weights theta = init_weights(s, stream);
  Batch b = random_batch(s, 16, stream);
  Batch reversed = b;
  for (long i = 0; i < b.size; ++i) {
    long j = b.size - 1 - i;
    for (int d = 0; d < b.input_dim; ++d)
      reversed.inputs[static_cast<std::size_t>(i) * b.input_dim + static_cast<std::size_t>(d)] =
          b.inputs[static_cast<std::size_t>(j) * b.input_dim + static_cast<std::size_t>(d)];
    reversed.targets[static_cast<std::size_t>(i)] = b.targets[static_cast<std::size_t>(j)];
  }
  LossGrad fwd = loss_and_grad(s, theta, b);
  LossGrad rev = loss_and_grad(s, theta, reversed);
  CHECK(fwd.loss == doctest::Approx(rev.loss).epsilon(1e-14));
}

TEST_CASE("loss_and_grad is independent of the thread count") {
  NetworkStructure s{5, {16, 16}};
  RngStream stream = seed_stream(11, 0);
  Weights theta = init_weights(s, stream);
  Batch b = random_batch(s, 1000, stream);
  LossGrad serial = loss_and_grad(s, theta, b, 1);
  LossGrad parallel = loss_and_grad(s, theta, b, 8);
  CHECK(serial.loss == parallel.loss);
  CHECK(serial.grad == parallel.grad);
}

TEST_CASE("sgd_step arithmetic") {
  CHECK(sgd_step({1.0, 1.0}, {1.0, -1.0}, 1.0) == Weights{0.0, 2.0});
  Weights theta{0.5, -0.25};
  CHECK(sgd_step(theta, {0.0, 0.0}, 0.1) == theta);
  CHECK_THROWS_AS(sgd_step({1.0}, {1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sgd_step({1.0}, {1.0, 2.0}, 0.1), std::invalid_argument);
}

TEST_CASE("two small steps differ from one summed step off a quadratic") {
  // Gradients re-evaluated after moving differ, so the updates differ too.
  NetworkStructure s{2, {3}};
  RngStream stream = seed_stream(12, 0);
  Weights theta = init_weights(s, stream);
  Batch b = random_batch(s, 4, stream);
  double rate = 0.25;

  LossGrad g0 = loss_and_grad(s, theta, b);
  Weights after_one = sgd_step(theta, g0.grad, rate);
  LossGrad g1 = loss_and_grad(s, after_one, b);
  Weights two_steps = sgd_step(after_one, g1.grad, rate);

  Weights summed = sgd_step(theta, g0.grad, 2.0 * rate);
  bool differs = false;
  for (std::size_t k = 0; k < theta.size(); ++k)
    if (two_steps[k] != summed[k]) differs = true;
  CHECK(differs);
}

TEST_CASE("learning rate decays with a continuous exponent") {
  LrSchedule table_one{0.01, 0.1, 40000};
  CHECK(learning_rate(table_one, 0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(learning_rate(table_one, 40000) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(learning_rate(table_one, 150000) ==
        doctest::Approx(1.7782794100389227e-6).epsilon(1e-10));
  // Continuous, not staircase: strictly decreasing between multiples.
  CHECK(learning_rate(table_one, 20000) < learning_rate(table_one, 19999));
  CHECK_THROWS_AS(learning_rate(table_one, -1), std::invalid_argument);
}

TEST_CASE("adam_step reduces a simple quadratic") {
  // Minimize (theta - 3)^2 elementwise.
  Weights theta{0.0, 10.0};
  AdamState state;
  for (int i = 0; i < 2000; ++i) {
    Weights grad{2.0 * (theta[0] - 3.0), 2.0 * (theta[1] - 3.0)};
    adam_step(theta, grad, 0.05, state);
  }
  CHECK(theta[0] == doctest::Approx(3.0).epsilon(0.01));
  CHECK(theta[1] == doctest::Approx(3.0).epsilon(0.01));
}

TEST_CASE("structure validation") {
  CHECK_THROWS_AS(validate_structure({0, {4}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_structure({5, {0}}), std::invalid_argument);
  CHECK_NOTHROW(validate_structure({5, {}}));  // affine model is allowed
}
