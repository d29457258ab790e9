#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "mlmc/model.hpp"
#include "mlmc/rng.hpp"

namespace mlmc {

// Thrown when a path iterate leaves the finite range (possible for extreme
// parameter draws); callers must not silently clamp such samples.
struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Discretization geometry of one level: step width h_l = T / (n0 * H^l).
struct LevelSpec {
  int level = 0;       // l >= 0
  int refinement = 2;  // H >= 2, factor by which the step is refined per level
  int base_steps = 1;  // n0 >= 1, steps at level 0

  long steps_at(int l) const {
    long n = base_steps;
    for (int i = 0; i < l; ++i) n *= refinement;
    return n;
  }
  long fine_steps() const { return steps_at(level); }
  double step_width(double maturity) const {
    return maturity / static_cast<double>(fine_steps());
  }
  LevelSpec at_level(int l) const { return {l, refinement, base_steps}; }
};

LevelSpec validate_level_spec(const LevelSpec& spec);

// One training pair: input point plus one realization of the level
// estimator Y_l at that point.
struct LevelSample {
  ParamVector input;
  double value = 0.0;
  int level = 0;
};

// State-dependent scalar dynamics; the Milstein correction needs the
// volatility derivative. GBM is the only family instantiated here, but the
// stepper is written against this interface so other affine models drop in.
struct GbmDynamics {
  double mu = 0.0;
  double sigma = 0.0;
  double drift(double s) const { return mu * s; }
  double vol(double s) const { return sigma * s; }
  double vol_prime(double /*s*/) const { return sigma; }
};

// One Milstein update given the Brownian increment dw over a step of width h.
template <class Dynamics>
double milstein_step_dw(const Dynamics& dyn, double s, double h, double dw) {
  return s + dyn.drift(s) * h + dyn.vol(s) * dw +
         0.5 * dyn.vol(s) * dyn.vol_prime(s) * (dw * dw - h);
}

// One Milstein update for the GBM defined by y, with a standard normal z.
double milstein_step(double s, const ParamVector& y, double h, double z);

// Draws the `refinement` fine-step normals of one coarse interval, writes the
// fine Brownian increments sqrt(h_fine) * z_i, and returns the coarse
// increment as their ordered sum. Summing the already-scaled increments makes
// the coupling identity sqrt(h_c) * (z_1+...+z_H)/sqrt(H) = sum_i dw_i hold
// bit-for-bit, not just to rounding.
double draw_coupled_increments(RngStream& stream, int refinement, double h_fine,
                               std::span<double> fine_dw);

// Single-path payoff sample P_h(y) at the given level; consumes exactly
// fine_steps() normals from the stream.
double simulate_payoff_path(const ParamVector& y, const LevelSpec& spec,
                            RngStream& stream);

// Level-estimator sample: P_{h_0}(y) at level 0, P_{h_l}(y) - P_{h_{l-1}}(y)
// for l >= 1 with both paths driven by the same Brownian increments.
// Consumes exactly fine_steps() normals.
LevelSample simulate_level_sample(const ParamVector& y, const LevelSpec& spec,
                                  RngStream& stream);

// Exact terminal value s0 * exp((mu - sigma^2/2) T + sigma sqrt(T) Z);
// one normal.
double exact_gbm_terminal(const ParamVector& y, RngStream& stream);

// Importance-sampled payoff: with q = P(S_T > K) under the exact GBM law,
// draws Z conditioned on {S_T > K} via u -> Phi^{-1}(1 - q + q u) and returns
// q * (S_T(Z) - K). Unbiased for E[max(S_T - K, 0)]; consumes one uniform.
double importance_sampled_payoff(const ParamVector& y, RngStream& stream);

}  // namespace mlmc
