#include "mlmc/planner.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mlmc/parallel.hpp"
#include "mlmc/rng.hpp"

namespace mlmc {

namespace {

// Welford accumulator with Chan's pairwise combination. Keeps the variance of
// bitwise-constant samples at exactly zero, which sequential sum-of-squares
// formulas do not.
struct Welford {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  void combine(const Welford& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    double d = o.mean - mean;
    long long total = n + o.n;
    mean += d * static_cast<double>(o.n) / static_cast<double>(total);
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) /
                     static_cast<double>(total);
    n = total;
  }
  double sample_variance() const {
    return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
  }
};

double level_cost(const LevelSpec& spec) {
  double cost = static_cast<double>(spec.fine_steps());
  if (spec.level > 0) cost += static_cast<double>(spec.steps_at(spec.level - 1));
  return cost;
}

Welford pilot_accumulate(const ParamVector& y, const LevelSpec& spec, long n_pilot,
                         std::uint64_t seed, int n_threads,
                         std::uint64_t index_offset) {
  std::vector<Welford> lane_acc(static_cast<std::size_t>(kLanes));
  run_lanes(kLanes, n_threads, [&](int lane) {
    Welford acc;
    for (long i = lane; i < n_pilot; i += kLanes) {
      RngStream s = seed_stream(
          seed, substream_id(StreamPhase::Pilot, static_cast<unsigned>(spec.level),
                             index_offset + static_cast<std::uint64_t>(i)));
      acc.add(simulate_level_sample(y, spec, s).value);
    }
    lane_acc[static_cast<std::size_t>(lane)] = acc;
  });
  tree_combine(kLanes, [&](int dst, int src) {
    lane_acc[static_cast<std::size_t>(dst)].combine(
        lane_acc[static_cast<std::size_t>(src)]);
  });
  return lane_acc[0];
}

}  // namespace

LevelStats pilot_level_stats(const ParamVector& y, const LevelSpec& spec,
                             long n_pilot, std::uint64_t seed, int n_threads) {
  if (n_pilot < 2) throw std::invalid_argument("pilot_level_stats: n_pilot must be >= 2");
  validate_level_spec(spec);
  validate_params(y);
  Welford acc = pilot_accumulate(y, spec, n_pilot, seed, n_threads, 0);
  return {spec.level, acc.mean, acc.sample_variance(), level_cost(spec)};
}

std::vector<long long> giles_allocation(double epsilon,
                                        const std::vector<LevelStats>& stats) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("giles_allocation: epsilon must be > 0");
  if (stats.empty()) throw std::invalid_argument("giles_allocation: no levels");
  double sum_vc = 0.0;
  for (const auto& s : stats) {
    if (!std::isfinite(s.variance) || s.variance < 0.0)
      throw std::invalid_argument("giles_allocation: invalid variance at level " +
                                  std::to_string(s.level));
    if (!(s.cost_per_sample > 0.0))
      throw std::invalid_argument("giles_allocation: invalid cost at level " +
                                  std::to_string(s.level));
    sum_vc += std::sqrt(s.variance * s.cost_per_sample);
  }
  std::vector<long long> n;
  n.reserve(stats.size());
  const double scale = 2.0 / (epsilon * epsilon);
  for (const auto& s : stats) {
    double raw = scale * std::sqrt(s.variance / s.cost_per_sample) * sum_vc;
    long long nl = static_cast<long long>(std::ceil(raw));
    n.push_back(nl < 1 ? 1 : nl);
  }
  return n;
}

int choose_level_count(const ParamVector& y, const PlannerConfig& cfg,
                       std::vector<LevelStats>& stats) {
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("choose_level_count: alpha must be > 0");
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("choose_level_count: epsilon must be > 0");
  const double h_factor = std::pow(static_cast<double>(cfg.refinement), cfg.alpha) - 1.0;
  const double bias_budget = cfg.epsilon / std::sqrt(2.0);

  LevelSpec geom{0, cfg.refinement, cfg.base_steps};
  auto ensure_level = [&](int l) {
    while (static_cast<int>(stats.size()) <= l)
      stats.push_back(pilot_level_stats(y, geom.at_level(static_cast<int>(stats.size())),
                                        cfg.n_pilot, cfg.seed, cfg.n_threads));
  };

  int level = 2;
  for (;;) {
    ensure_level(level);
    if (std::fabs(stats[static_cast<std::size_t>(level)].mean) / h_factor <= bias_budget)
      return level;
    ++level;
    if (level > cfg.level_cap)
      throw std::runtime_error(
          "choose_level_count: bias stopping rule not met by level cap " +
          std::to_string(cfg.level_cap) + " (|mean_" + std::to_string(level - 1) +
          "| = " + std::to_string(std::fabs(stats.back().mean)) +
          ", budget = " + std::to_string(bias_budget * h_factor) + ")");
  }
}

std::vector<long long> batch_sizes_from_allocation(
    long long m0, const std::vector<long long>& samples) {
  if (m0 < 1) throw std::invalid_argument("batch_sizes_from_allocation: m0 must be >= 1");
  if (samples.empty() || samples[0] < 1)
    throw std::invalid_argument("batch_sizes_from_allocation: N_0 must be >= 1");
  std::vector<long long> m;
  m.reserve(samples.size());
  m.push_back(m0);
  for (std::size_t l = 1; l < samples.size(); ++l) {
    double ratio = static_cast<double>(m0) * static_cast<double>(samples[l]) /
                   static_cast<double>(samples[0]);
    auto ml = static_cast<long long>(std::floor(ratio + 0.5));  // round half up
    m.push_back(ml < 1 ? 1 : ml);
  }
  return m;
}

std::vector<long long> train_steps_schedule(long long k0, int levels, StepsMode mode,
                                            const std::vector<long long>& table) {
  if (mode == StepsMode::Constant) {
    if (k0 < 1) throw std::invalid_argument("train_steps_schedule: k0 must be >= 1");
    return std::vector<long long>(static_cast<std::size_t>(levels) + 1, k0);
  }
  if (table.size() != static_cast<std::size_t>(levels) + 1)
    throw std::invalid_argument("train_steps_schedule: table has length " +
                                std::to_string(table.size()) + ", expected " +
                                std::to_string(levels + 1));
  for (long long k : table)
    if (k < 1) throw std::invalid_argument("train_steps_schedule: steps must be >= 1");
  return table;
}

AllocationPlan make_plan(const PlanRequest& req) {
  const PlannerConfig& cfg = req.planner;
  validate_params(req.point);

  std::vector<LevelStats> stats;
  int levels = 0;
  if (req.average_over_box) {
    // Average per-point pilot stats over points drawn from the box. The level
    // count is still chosen at the representative point.
    std::vector<LevelStats> point_stats;
    levels = choose_level_count(req.point, cfg, point_stats);
    validate_box(req.box);
    long per_point = cfg.n_pilot / req.box_points;
    if (per_point < 2) throw std::invalid_argument("make_plan: pilot too small for box average");
    LevelSpec geom{0, cfg.refinement, cfg.base_steps};
    for (int l = 0; l <= levels; ++l) {
      LevelStats avg{l, 0.0, 0.0, 0.0};
      RngStream pts = seed_stream(cfg.seed,
                                  substream_id(StreamPhase::Pilot, static_cast<unsigned>(l),
                                               (std::uint64_t{1} << 47)));
      for (int p = 0; p < req.box_points; ++p) {
        ParamVector yp = sample_uniform_box(pts, req.box);
        LevelStats s = pilot_level_stats(yp, geom.at_level(l), per_point,
                                         cfg.seed + 1 + static_cast<std::uint64_t>(p),
                                         cfg.n_threads);
        avg.mean += s.mean;
        avg.variance += s.variance;
        avg.cost_per_sample = s.cost_per_sample;
      }
      avg.mean /= req.box_points;
      avg.variance /= req.box_points;
      stats.push_back(avg);
    }
  } else {
    levels = choose_level_count(req.point, cfg, stats);
    stats.resize(static_cast<std::size_t>(levels) + 1);
  }

  AllocationPlan plan;
  plan.epsilon = cfg.epsilon;
  plan.levels = levels;
  plan.samples = giles_allocation(cfg.epsilon, stats);
  plan.batch_sizes = batch_sizes_from_allocation(req.m0, plan.samples);
  plan.train_steps = train_steps_schedule(req.k0, levels, req.steps_mode, req.k_table);
  LevelSpec geom{0, cfg.refinement, cfg.base_steps};
  for (int l = 0; l <= levels; ++l) {
    plan.step_widths.push_back(geom.at_level(l).step_width(req.point.maturity));
    plan.variances.push_back(stats[static_cast<std::size_t>(l)].variance);
  }
  return plan;
}

}  // namespace mlmc
