#include "mlmc/trainer.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "mlmc/parallel.hpp"
#include "mlmc/rng.hpp"

namespace mlmc {

void scale_input(const TrainingBox& box, const ParamVector& y,
                 std::span<double> out) {
  auto ivs = box.as_array();
  auto vals = y.as_array();
  for (int i = 0; i < kParamDim; ++i) {
    double w = ivs[i].width();
    out[static_cast<std::size_t>(i)] = w > 0.0 ? (vals[i] - ivs[i].lo) / w : 0.5;
  }
}

double TrainedNet::evaluate(const ParamVector& y) const {
  double scaled[kParamDim];
  scale_input(box, y, scaled);
  return forward(structure, weights, std::span<const double>(scaled, kParamDim));
}

namespace {

enum class TargetKind { PayoffPath, LevelEstimator };

double one_target(const ParamVector& y, const TrainConfig& cfg, TargetKind kind,
                  RngStream& stream) {
  switch (cfg.data_mode) {
    case DataMode::ImportanceSampled:
      return importance_sampled_payoff(y, stream);
    case DataMode::InnerMean: {
      double sum = 0.0;
      for (int j = 0; j < cfg.inner_samples; ++j)
        sum += kind == TargetKind::PayoffPath
                   ? simulate_payoff_path(y, cfg.level_spec, stream)
                   : simulate_level_sample(y, cfg.level_spec, stream).value;
      return sum / cfg.inner_samples;
    }
    case DataMode::SinglePath:
    default:
      return kind == TargetKind::PayoffPath
                 ? simulate_payoff_path(y, cfg.level_spec, stream)
                 : simulate_level_sample(y, cfg.level_spec, stream).value;
  }
}

void validate_config(const TrainConfig& cfg, TargetKind kind) {
  validate_structure(cfg.structure);
  if (cfg.structure.input_dim != kParamDim)
    throw std::invalid_argument("train: input_dim must equal the parameter dimension");
  if (cfg.steps < 1) throw std::invalid_argument("train: steps must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.inner_samples < 1) throw std::invalid_argument("train: inner_samples must be >= 1");
  validate_level_spec(cfg.level_spec);
  validate_box(cfg.box);
  if (cfg.data_mode == DataMode::ImportanceSampled) {
    if (kind == TargetKind::LevelEstimator && cfg.level_spec.level > 0)
      throw std::invalid_argument(
          "train: importance-sampled targets are only defined for level 0 / "
          "single-level training");
    if (!(cfg.box.sigma.lo > 0.0) || !(cfg.box.strike.lo > 0.0))
      throw std::invalid_argument(
          "train: importance sampling needs sigma > 0 and strike > 0 on the box");
  }
}

TrainedNet train_core(const TrainConfig& cfg, TargetKind kind) {
  validate_config(cfg, kind);
  const auto level = static_cast<unsigned>(cfg.level_spec.level);

  RngStream init_stream =
      seed_stream(cfg.seed, substream_id(StreamPhase::WeightInit, level, 0));
  Weights theta = init_weights(cfg.structure, init_stream);
  AdamState adam;

  Batch batch;
  batch.size = cfg.batch_size;
  batch.input_dim = cfg.structure.input_dim;
  batch.inputs.resize(static_cast<std::size_t>(cfg.batch_size) * kParamDim);
  batch.targets.resize(static_cast<std::size_t>(cfg.batch_size));

  std::vector<TrainLogEntry> log;
  for (long step = 0; step < cfg.steps; ++step) {
    try {
      run_lanes(kLanes, cfg.n_threads, [&](int lane) {
        for (long i = lane; i < cfg.batch_size; i += kLanes) {
          std::uint64_t index = static_cast<std::uint64_t>(step) *
                                    static_cast<std::uint64_t>(cfg.batch_size) +
                                static_cast<std::uint64_t>(i);
          RngStream s = seed_stream(
              cfg.seed, substream_id(StreamPhase::TrainData, level, index));
          ParamVector y = sample_uniform_box(s, cfg.box);
          batch.targets[static_cast<std::size_t>(i)] = one_target(y, cfg, kind, s);
          scale_input(cfg.box, y,
                      std::span<double>(
                          batch.inputs.data() + static_cast<std::size_t>(i) * kParamDim,
                          kParamDim));
        }
      });
    } catch (const SimulationError& e) {
      throw TrainingError("training data generation failed at step " +
                              std::to_string(step) + " (level " +
                              std::to_string(cfg.level_spec.level) + "): " + e.what(),
                          cfg.level_spec.level, std::move(log));
    }

    LossGrad lg = loss_and_grad(cfg.structure, theta, batch, cfg.n_threads);
    double rate = learning_rate(cfg.schedule, step);
    if (!std::isfinite(lg.loss)) {
      log.push_back({step, lg.loss, rate});
      throw TrainingError("training diverged: non-finite loss at step " +
                              std::to_string(step) + " (level " +
                              std::to_string(cfg.level_spec.level) +
                              ", learning rate " + std::to_string(rate) + ")",
                          cfg.level_spec.level, std::move(log));
    }
    if (step % cfg.log_every == 0 || step + 1 == cfg.steps)
      log.push_back({step, lg.loss, rate});
    if (cfg.optimizer == OptimizerKind::Sgd)
      theta = sgd_step(std::move(theta), lg.grad, rate);
    else
      adam_step(theta, lg.grad, rate, adam);
  }

  return {cfg.structure, std::move(theta), cfg.box, std::move(log)};
}

}  // namespace

TrainedNet train_single_level(const TrainConfig& config) {
  return train_core(config, TargetKind::PayoffPath);
}

MultilevelNet train_multilevel(
    const AllocationPlan& plan, const TrainConfig& base,
    const std::function<void(int, const TrainedNet&)>& on_level_trained) {
  const auto n_levels = static_cast<std::size_t>(plan.levels) + 1;
  if (plan.batch_sizes.size() != n_levels || plan.train_steps.size() != n_levels)
    throw std::invalid_argument(
        "train_multilevel: plan needs L+1 batch sizes and step counts");

  MultilevelNet net;
  net.level_spec = base.level_spec;
  for (int l = 0; l <= plan.levels; ++l) {
    TrainConfig cfg = base;
    cfg.level_spec = base.level_spec.at_level(l);
    cfg.batch_size = plan.batch_sizes[static_cast<std::size_t>(l)];
    cfg.steps = plan.train_steps[static_cast<std::size_t>(l)];
    try {
      net.nets.push_back(train_core(cfg, TargetKind::LevelEstimator));
    } catch (const TrainingError&) {
      throw;  // message already carries the level
    } catch (const std::exception& e) {
      throw std::runtime_error("level " + std::to_string(l) + ": " + e.what());
    }
    if (on_level_trained) on_level_trained(l, net.nets.back());
  }
  return net;
}

double evaluate_multilevel(const MultilevelNet& net, const ParamVector& y) {
  if (net.nets.empty())
    throw std::invalid_argument("evaluate_multilevel: no component networks");
  static std::atomic<int> warnings_left{8};
  double sum = 0.0;
  for (const auto& component : net.nets) {
    if (!component.box.contains(y) && warnings_left.fetch_sub(1) > 0)
      std::fprintf(stderr,
                   "warning: evaluating outside the stored training box "
                   "(s0=%g); extrapolation is unvalidated\n",
                   y.s0);
    sum += component.evaluate(y);
  }
  return sum;
}

long long plan_path_step_cost(const AllocationPlan& plan, const LevelSpec& geometry) {
  long long total = 0;
  for (int l = 0; l <= plan.levels; ++l) {
    LevelSpec spec = geometry.at_level(l);
    long long per_sample = spec.fine_steps() + (l > 0 ? spec.steps_at(l - 1) : 0);
    total += plan.train_steps[static_cast<std::size_t>(l)] *
             plan.batch_sizes[static_cast<std::size_t>(l)] * per_sample;
  }
  return total;
}

long long single_level_path_step_cost(long steps, long batch_size,
                                      const LevelSpec& spec) {
  return static_cast<long long>(steps) * batch_size * spec.fine_steps();
}

}  // namespace mlmc
