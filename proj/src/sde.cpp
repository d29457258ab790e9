#include "mlmc/sde.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mlmc {

LevelSpec validate_level_spec(const LevelSpec& spec) {
  if (spec.level < 0) throw std::invalid_argument("level must be >= 0");
  if (spec.refinement < 2) throw std::invalid_argument("refinement must be >= 2");
  if (spec.base_steps < 1) throw std::invalid_argument("base_steps must be >= 1");
  return spec;
}

double milstein_step(double s, const ParamVector& y, double h, double z) {
  if (!(h > 0.0)) throw std::invalid_argument("milstein_step: h must be > 0");
  GbmDynamics dyn{y.mu, y.sigma};
  return milstein_step_dw(dyn, s, h, std::sqrt(h) * z);
}

double draw_coupled_increments(RngStream& stream, int refinement, double h_fine,
                               std::span<double> fine_dw) {
  const double sqrt_h = std::sqrt(h_fine);
  double coarse = 0.0;
  for (int j = 0; j < refinement; ++j) {
    double dw = sqrt_h * stream.next_normal();
    fine_dw[static_cast<std::size_t>(j)] = dw;
    coarse += dw;
  }
  return coarse;
}

namespace {

void check_finite(double s, const ParamVector& y, int level) {
  if (!std::isfinite(s))
    throw SimulationError("path state became non-finite at level " +
                          std::to_string(level) + " (s0=" + std::to_string(y.s0) +
                          ", sigma=" + std::to_string(y.sigma) + ")");
}

}  // namespace

double simulate_payoff_path(const ParamVector& y, const LevelSpec& spec,
                            RngStream& stream) {
  const long n = spec.fine_steps();
  const double h = spec.step_width(y.maturity);
  const double sqrt_h = std::sqrt(h);
  GbmDynamics dyn{y.mu, y.sigma};
  double s = y.s0;
  for (long i = 0; i < n; ++i)
    s = milstein_step_dw(dyn, s, h, sqrt_h * stream.next_normal());
  check_finite(s, y, spec.level);
  return call_payoff(s, y.strike);
}

LevelSample simulate_level_sample(const ParamVector& y, const LevelSpec& spec,
                                  RngStream& stream) {
  if (spec.level == 0) return {y, simulate_payoff_path(y, spec, stream), 0};

  const int H = spec.refinement;
  const long n_coarse = spec.steps_at(spec.level - 1);
  const double h_fine = spec.step_width(y.maturity);
  const double h_coarse = h_fine * H;
  GbmDynamics dyn{y.mu, y.sigma};

  double s_fine = y.s0;
  double s_coarse = y.s0;
  std::vector<double> dw(static_cast<std::size_t>(H));
  for (long i = 0; i < n_coarse; ++i) {
    double dw_coarse = draw_coupled_increments(stream, H, h_fine, dw);
    for (int j = 0; j < H; ++j)
      s_fine = milstein_step_dw(dyn, s_fine, h_fine, dw[static_cast<std::size_t>(j)]);
    s_coarse = milstein_step_dw(dyn, s_coarse, h_coarse, dw_coarse);
  }
  check_finite(s_fine, y, spec.level);
  check_finite(s_coarse, y, spec.level);
  return {y, call_payoff(s_fine, y.strike) - call_payoff(s_coarse, y.strike),
          spec.level};
}

double exact_gbm_terminal(const ParamVector& y, RngStream& stream) {
  double z = stream.next_normal();
  return y.s0 * std::exp((y.mu - 0.5 * y.sigma * y.sigma) * y.maturity +
                         y.sigma * std::sqrt(y.maturity) * z);
}

double importance_sampled_payoff(const ParamVector& y, RngStream& stream) {
  if (!(y.sigma > 0.0))
    throw std::invalid_argument("importance_sampled_payoff: sigma must be > 0");
  if (!(y.strike > 0.0))
    throw std::invalid_argument("importance_sampled_payoff: strike must be > 0");

  const double vol_sq = y.sigma * std::sqrt(y.maturity);
  // S_T > K  <=>  Z > z*, and q = P(Z > z*) = Phi(d2).
  const double d2 = (std::log(y.s0 / y.strike) +
                     (y.mu - 0.5 * y.sigma * y.sigma) * y.maturity) /
                    vol_sq;
  const double q = normal_cdf(d2);
  if (q <= 0.0)
    throw SimulationError("importance_sampled_payoff: exceedance probability underflows");

  const double u = stream.next_uniform();
  const double z = inverse_normal_cdf(1.0 - q + q * u);
  const double terminal =
      y.s0 * std::exp((y.mu - 0.5 * y.sigma * y.sigma) * y.maturity + vol_sq * z);
  return q * (terminal - y.strike);
}

}  // namespace mlmc
