#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlmc/model.hpp"
#include "mlmc/net.hpp"
#include "mlmc/planner.hpp"
#include "mlmc/sde.hpp"

namespace mlmc {

// How one regression target is produced from a sampled input point.
//   SinglePath        one payoff path (single level) or one coupled
//                     level-estimator path (multilevel)
//   ImportanceSampled exact-law conditional sample; level 0 / single level only
//   InnerMean         mean of inner_samples SinglePath draws
enum class DataMode { SinglePath, ImportanceSampled, InnerMean };

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  NetworkStructure structure;
  LrSchedule schedule;
  long steps = 1;       // K
  long batch_size = 1;  // M
  LevelSpec level_spec;
  TrainingBox box;
  std::uint64_t seed = 0;
  DataMode data_mode = DataMode::SinglePath;
  int inner_samples = 1;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  int n_threads = 1;
  long log_every = 1000;
};

struct TrainLogEntry {
  long step = 0;
  double loss = 0.0;
  double rate = 0.0;
};

// Raised when a training run aborts (non-finite loss, simulation overflow in
// the data generator). Carries the log accumulated so far so callers can
// persist it.
struct TrainingError : std::runtime_error {
  TrainingError(const std::string& what, int level_in,
                std::vector<TrainLogEntry> log)
      : std::runtime_error(what), level(level_in), partial_log(std::move(log)) {}
  int level;
  std::vector<TrainLogEntry> partial_log;
};

// A trained component: structure, flat weights and the box that defines the
// stored per-coordinate rescaling onto [0,1].
struct TrainedNet {
  NetworkStructure structure;
  Weights weights;
  TrainingBox box;
  std::vector<TrainLogEntry> log;  // sampled every log_every steps; not persisted

  double evaluate(const ParamVector& y) const;
};

// Affine rescaling of y onto the unit cube; degenerate coordinates map
// to 0.5.
void scale_input(const TrainingBox& box, const ParamVector& y,
                 std::span<double> out);

// Beck-style single-level training: K steps, each drawing M fresh inputs
// uniform on the box with one payoff target each (per data_mode) at the
// config level's step width, then one optimizer step at learning_rate(step).
TrainedNet train_single_level(const TrainConfig& config);

struct MultilevelNet {
  std::vector<TrainedNet> nets;
  LevelSpec level_spec;
};

// Trains net l on level-estimator samples with batch M_l for K_l steps.
// Substreams are disjoint per (level, step, sample), so retraining one level
// never disturbs another and an L = 0 plan reproduces train_single_level
// bit for bit. on_level_trained, when set, runs after each level finishes
// (checkpointing); failures carry the level index.
MultilevelNet train_multilevel(
    const AllocationPlan& plan, const TrainConfig& base,
    const std::function<void(int, const TrainedNet&)>& on_level_trained = {});

// Sum of component evaluations. Points outside a stored box only warn.
double evaluate_multilevel(const MultilevelNet& net, const ParamVector& y);

// Simulated Milstein step counts (fine plus coupled coarse), for cost
// comparisons between plans and single-level runs.
long long plan_path_step_cost(const AllocationPlan& plan, const LevelSpec& geometry);
long long single_level_path_step_cost(long steps, long batch_size,
                                      const LevelSpec& spec);

}  // namespace mlmc
