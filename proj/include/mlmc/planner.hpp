#pragma once

#include <cstdint>
#include <vector>

#include "mlmc/model.hpp"
#include "mlmc/sde.hpp"

namespace mlmc {

// Pilot estimate for one level: sample mean and unbiased sample variance of
// the level estimator, plus the simulation cost of one sample in Milstein
// step units (fine path plus, above level 0, the coupled coarse path).
struct LevelStats {
  int level = 0;
  double mean = 0.0;
  double variance = 0.0;
  double cost_per_sample = 0.0;
};

// Per-level allocation for levels 0..L. step_widths and variances carry the
// pilot diagnostics into the serialized plan table.
struct AllocationPlan {
  double epsilon = 0.0;
  int levels = 0;  // L
  std::vector<long long> samples;      // N_l
  std::vector<long long> batch_sizes;  // M_l
  std::vector<long long> train_steps;  // K_l
  std::vector<double> step_widths;     // h_l
  std::vector<double> variances;       // pilot V_l
};

// n_pilot independent level-estimator draws at y; one substream per sample
// (StreamPhase::Pilot), Welford accumulation per lane with pairwise combine,
// so the result is independent of n_threads.
LevelStats pilot_level_stats(const ParamVector& y, const LevelSpec& spec,
                             long n_pilot, std::uint64_t seed, int n_threads = 1);

// Giles sample allocation: N_l = ceil(2 eps^-2 sqrt(V_l/C_l) sum_k
// sqrt(V_k C_k)), floored at one sample per level. Guarantees
// sum_l V_l/N_l <= eps^2/2 before the floor.
std::vector<long long> giles_allocation(double epsilon,
                                        const std::vector<LevelStats>& stats);

struct PlannerConfig {
  double epsilon = 0.01;
  long n_pilot = 100000;
  int refinement = 2;
  int base_steps = 1;
  double alpha = 1.0;  // weak order used by the bias stopping rule
  int level_cap = 12;
  std::uint64_t seed = 0;
  int n_threads = 1;
};

// Smallest L >= 2 with |mean_L| / (H^alpha - 1) <= epsilon / sqrt(2),
// extending `stats` with pilot estimates level by level. Throws with a
// diagnostic if L would exceed cfg.level_cap.
int choose_level_count(const ParamVector& y, const PlannerConfig& cfg,
                       std::vector<LevelStats>& stats);

// M_0 = m0, M_l = max(1, round-half-up(m0 N_l / N_0)).
std::vector<long long> batch_sizes_from_allocation(
    long long m0, const std::vector<long long>& samples);

enum class StepsMode { Constant, Table };

// Constant mode: L+1 copies of k0. Table mode: the user list, validated to
// length L+1.
std::vector<long long> train_steps_schedule(long long k0, int levels,
                                            StepsMode mode,
                                            const std::vector<long long>& table = {});

// Full planning pass: pilot levels 0..2, extend by the stopping rule, then
// translate sample counts into batch sizes and step counts.
struct PlanRequest {
  PlannerConfig planner;
  ParamVector point;  // representative y for the pilot
  long long m0 = 75000;
  long long k0 = 150000;
  StepsMode steps_mode = StepsMode::Constant;
  std::vector<long long> k_table;
  // Off by default: average pilot stats over points drawn from the box
  // instead of using the single representative point.
  bool average_over_box = false;
  TrainingBox box;
  int box_points = 8;
};

AllocationPlan make_plan(const PlanRequest& req);

}  // namespace mlmc
