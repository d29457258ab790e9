#pragma once

#include <array>
#include <cstddef>

namespace mlmc {

inline constexpr int kParamDim = 5;

// One input point y = (mu, sigma, s0, T, K): GBM drift and volatility,
// initial asset value, maturity and call strike.
struct ParamVector {
  double mu = 0.0;
  double sigma = 0.0;
  double s0 = 0.0;
  double maturity = 0.0;
  double strike = 0.0;

  std::array<double, kParamDim> as_array() const {
    return {mu, sigma, s0, maturity, strike};
  }
  static ParamVector from_array(const std::array<double, kParamDim>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Axis-aligned box of parameter vectors: the region the surrogate has to
// cover. Degenerate coordinates (lo == hi) are allowed.
struct TrainingBox {
  Interval mu;
  Interval sigma;
  Interval s0;
  Interval maturity;
  Interval strike;

  std::array<Interval, kParamDim> as_array() const {
    return {mu, sigma, s0, maturity, strike};
  }
  static TrainingBox from_array(const std::array<Interval, kParamDim>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }
  bool contains(const ParamVector& y) const;
};

// Undiscounted European call payoff max(S - K, 0).
double call_payoff(double terminal_value, double strike);

// Returns y unchanged if sigma >= 0, s0 > 0, maturity > 0 and strike >= 0;
// throws std::invalid_argument naming the violated field otherwise.
ParamVector validate_params(const ParamVector& y);

// Checks lo <= hi per coordinate and that every corner satisfies the
// ParamVector invariants; throws std::invalid_argument otherwise.
TrainingBox validate_box(const TrainingBox& box);

}  // namespace mlmc
