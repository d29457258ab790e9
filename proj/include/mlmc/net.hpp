#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mlmc/rng.hpp"

namespace mlmc {

// Feed-forward structure: affine layers with logistic activations on every
// hidden layer and a scalar affine output head.
struct NetworkStructure {
  int input_dim = kParamDim;
  std::vector<int> hidden;  // widths, each >= 1

  // [input_dim, hidden..., 1]
  std::vector<int> layer_dims() const;
  std::size_t parameter_count() const;
};

NetworkStructure validate_structure(const NetworkStructure& s);

// Flat weight vector. Layout per layer: the (fan_out x fan_in) matrix in
// row-major order, then the fan_out bias entries.
using Weights = std::vector<double>;

// rate(step) = initial_rate * decay_rate^(step / step_rate), continuous
// exponent (no staircase).
struct LrSchedule {
  double initial_rate = 0.01;
  double decay_rate = 0.1;
  long step_rate = 40000;
};

double learning_rate(const LrSchedule& schedule, long step);

// Matrices uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)] drawn in layout
// order; biases exactly zero. Consumes one tick per matrix entry.
Weights init_weights(const NetworkStructure& structure, RngStream& stream);

double forward(const NetworkStructure& structure, const Weights& theta,
               std::span<const double> input);

// Training batch; inputs flat row-major (size x input_dim).
struct Batch {
  long size = 0;
  int input_dim = kParamDim;
  std::vector<double> inputs;
  std::vector<double> targets;

  std::span<const double> input_row(long i) const {
    return {inputs.data() + static_cast<std::size_t>(i) * input_dim,
            static_cast<std::size_t>(input_dim)};
  }
};

struct LossGrad {
  double loss = 0.0;
  Weights grad;
};

// Mean squared error over the batch and its exact gradient via
// backpropagation. Accumulation runs over kLanes fixed lanes combined by a
// pairwise tree, so the result is independent of n_threads.
LossGrad loss_and_grad(const NetworkStructure& structure, const Weights& theta,
                       const Batch& batch, int n_threads = 1);

// theta - rate * grad, elementwise.
Weights sgd_step(Weights theta, const Weights& grad, double rate);

// Adaptive-moment update, kept behind a trainer flag; plain SGD is the
// default everywhere.
struct AdamState {
  Weights m;
  Weights v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(Weights& theta, const Weights& grad, double rate, AdamState& state);

}  // namespace mlmc
