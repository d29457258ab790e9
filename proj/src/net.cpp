#include "mlmc/net.hpp"

#include <cmath>
#include <stdexcept>

#include "mlmc/parallel.hpp"

namespace mlmc {

std::vector<int> NetworkStructure::layer_dims() const {
  std::vector<int> dims;
  dims.reserve(hidden.size() + 2);
  dims.push_back(input_dim);
  for (int w : hidden) dims.push_back(w);
  dims.push_back(1);
  return dims;
}

std::size_t NetworkStructure::parameter_count() const {
  auto dims = layer_dims();
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    auto fan_in = static_cast<std::size_t>(dims[i]);
    auto fan_out = static_cast<std::size_t>(dims[i + 1]);
    count += fan_in * fan_out + fan_out;
  }
  return count;
}

NetworkStructure validate_structure(const NetworkStructure& s) {
  if (s.input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  for (int w : s.hidden)
    if (w < 1) throw std::invalid_argument("hidden widths must be >= 1");
  return s;
}

double learning_rate(const LrSchedule& schedule, long step) {
  if (step < 0) throw std::invalid_argument("learning_rate: step must be >= 0");
  double exponent =
      static_cast<double>(step) / static_cast<double>(schedule.step_rate);
  return schedule.initial_rate * std::pow(schedule.decay_rate, exponent);
}

Weights init_weights(const NetworkStructure& structure, RngStream& stream) {
  validate_structure(structure);
  auto dims = structure.layer_dims();
  Weights theta(structure.parameter_count(), 0.0);
  std::size_t off = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    auto fan_in = static_cast<std::size_t>(dims[i]);
    auto fan_out = static_cast<std::size_t>(dims[i + 1]);
    double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t k = 0; k < fan_in * fan_out; ++k)
      theta[off + k] = (2.0 * stream.next_uniform() - 1.0) * scale;
    off += fan_in * fan_out + fan_out;  // biases stay zero
  }
  return theta;
}

namespace {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-worker scratch: activations of every layer (input excluded) plus one
// delta buffer of the widest layer.
struct Workspace {
  std::vector<double> acts;
  std::vector<double> delta;
  std::vector<double> delta_prev;
};

struct Plan {
  std::vector<int> dims;
  std::vector<std::size_t> offsets;  // start of each layer's parameters
  std::size_t n_params = 0;
  std::size_t act_size = 0;  // total activation slots, layers 1..s
  int max_width = 0;

  explicit Plan(const NetworkStructure& s) {
    dims = s.layer_dims();
    offsets.resize(dims.size() - 1);
    std::size_t off = 0;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      offsets[i] = off;
      off += static_cast<std::size_t>(dims[i]) * dims[i + 1] + dims[i + 1];
      if (i + 1 < dims.size()) act_size += static_cast<std::size_t>(dims[i + 1]);
    }
    n_params = off;
    for (int d : dims) max_width = d > max_width ? d : max_width;
  }

  Workspace make_workspace() const {
    Workspace ws;
    ws.acts.resize(act_size);
    ws.delta.resize(static_cast<std::size_t>(max_width));
    ws.delta_prev.resize(static_cast<std::size_t>(max_width));
    return ws;
  }
};

// Forward pass; leaves every layer's activation in ws.acts and returns the
// scalar output.
double forward_pass(const Plan& plan, const double* theta, const double* input,
                    Workspace& ws) {
  const auto& dims = plan.dims;
  const double* a_prev = input;
  std::size_t act_off = 0;
  double out = 0.0;
  for (std::size_t layer = 0; layer + 1 < dims.size(); ++layer) {
    const int fan_in = dims[layer];
    const int fan_out = dims[layer + 1];
    const double* w = theta + plan.offsets[layer];
    const double* b = w + static_cast<std::size_t>(fan_in) * fan_out;
    double* a = ws.acts.data() + act_off;
    const bool last = layer + 2 == dims.size();
    for (int r = 0; r < fan_out; ++r) {
      double z = b[r];
      const double* wr = w + static_cast<std::size_t>(r) * fan_in;
      for (int c = 0; c < fan_in; ++c) z += wr[c] * a_prev[c];
      a[r] = last ? z : logistic(z);
    }
    if (last) out = a[0];
    a_prev = a;
    act_off += static_cast<std::size_t>(fan_out);
  }
  return out;
}

// Backward pass for one sample; adds dloss_dout * dout/dtheta into grad.
// Requires ws.acts from the matching forward_pass.
void backward_pass(const Plan& plan, const double* theta, const double* input,
                   Workspace& ws, double dloss_dout, double* grad) {
  const auto& dims = plan.dims;
  const std::size_t n_layers = dims.size() - 1;
  ws.delta[0] = dloss_dout;

  std::size_t act_off = plan.act_size;
  for (std::size_t layer = n_layers; layer-- > 0;) {
    const int fan_in = dims[layer];
    const int fan_out = dims[layer + 1];
    act_off -= static_cast<std::size_t>(fan_out);
    const double* a_prev =
        layer == 0 ? input : ws.acts.data() + act_off - static_cast<std::size_t>(fan_in);
    const double* w = theta + plan.offsets[layer];
    double* gw = grad + plan.offsets[layer];
    double* gb = gw + static_cast<std::size_t>(fan_in) * fan_out;

    if (layer > 0)
      for (int c = 0; c < fan_in; ++c) ws.delta_prev[c] = 0.0;
    for (int r = 0; r < fan_out; ++r) {
      const double d = ws.delta[r];
      double* gwr = gw + static_cast<std::size_t>(r) * fan_in;
      const double* wr = w + static_cast<std::size_t>(r) * fan_in;
      for (int c = 0; c < fan_in; ++c) gwr[c] += d * a_prev[c];
      gb[r] += d;
      if (layer > 0)
        for (int c = 0; c < fan_in; ++c) ws.delta_prev[c] += d * wr[c];
    }
    if (layer > 0)
      for (int c = 0; c < fan_in; ++c) {
        double a = a_prev[c];
        ws.delta[c] = ws.delta_prev[c] * a * (1.0 - a);
      }
  }
}

}  // namespace

double forward(const NetworkStructure& structure, const Weights& theta,
               std::span<const double> input) {
  Plan plan(structure);
  if (input.size() != static_cast<std::size_t>(structure.input_dim))
    throw std::invalid_argument("forward: input length mismatch");
  if (theta.size() != plan.n_params)
    throw std::invalid_argument("forward: weight length mismatch");
  Workspace ws = plan.make_workspace();
  return forward_pass(plan, theta.data(), input.data(), ws);
}

LossGrad loss_and_grad(const NetworkStructure& structure, const Weights& theta,
                       const Batch& batch, int n_threads) {
  if (batch.size <= 0) throw std::invalid_argument("loss_and_grad: empty batch");
  if (batch.input_dim != structure.input_dim)
    throw std::invalid_argument("loss_and_grad: batch input_dim mismatch");
  Plan plan(structure);
  if (theta.size() != plan.n_params)
    throw std::invalid_argument("loss_and_grad: weight length mismatch");

  const int lanes = kLanes;
  std::vector<Weights> lane_grad(static_cast<std::size_t>(lanes));
  std::vector<double> lane_loss(static_cast<std::size_t>(lanes), 0.0);

  run_lanes(lanes, n_threads, [&](int lane) {
    Workspace ws = plan.make_workspace();
    Weights g(plan.n_params, 0.0);
    double loss = 0.0;
    for (long i = lane; i < batch.size; i += lanes) {
      const double* x =
          batch.inputs.data() + static_cast<std::size_t>(i) * batch.input_dim;
      double f = forward_pass(plan, theta.data(), x, ws);
      double r = f - batch.targets[static_cast<std::size_t>(i)];
      loss += r * r;
      backward_pass(plan, theta.data(), x, ws, r, g.data());
    }
    lane_grad[static_cast<std::size_t>(lane)] = std::move(g);
    lane_loss[static_cast<std::size_t>(lane)] = loss;
  });

  tree_combine(lanes, [&](int dst, int src) {
    lane_loss[static_cast<std::size_t>(dst)] += lane_loss[static_cast<std::size_t>(src)];
    auto& gd = lane_grad[static_cast<std::size_t>(dst)];
    const auto& gs = lane_grad[static_cast<std::size_t>(src)];
    for (std::size_t k = 0; k < gd.size(); ++k) gd[k] += gs[k];
  });

  const double inv_m = 1.0 / static_cast<double>(batch.size);
  LossGrad out;
  out.loss = lane_loss[0] * inv_m;
  out.grad = std::move(lane_grad[0]);
  const double scale = 2.0 * inv_m;
  for (double& g : out.grad) g *= scale;
  return out;
}

Weights sgd_step(Weights theta, const Weights& grad, double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("sgd_step: rate must be > 0");
  if (theta.size() != grad.size())
    throw std::invalid_argument("sgd_step: length mismatch");
  for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= rate * grad[k];
  return theta;
}

void adam_step(Weights& theta, const Weights& grad, double rate, AdamState& state) {
  if (state.m.empty()) {
    state.m.assign(theta.size(), 0.0);
    state.v.assign(theta.size(), 0.0);
  }
  if (theta.size() != grad.size() || state.m.size() != theta.size())
    throw std::invalid_argument("adam_step: length mismatch");
  ++state.t;
  const double b1 = state.beta1, b2 = state.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < theta.size(); ++k) {
    state.m[k] = b1 * state.m[k] + (1.0 - b1) * grad[k];
    state.v[k] = b2 * state.v[k] + (1.0 - b2) * grad[k] * grad[k];
    double mhat = state.m[k] / corr1;
    double vhat = state.v[k] / corr2;
    theta[k] -= rate * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace mlmc
