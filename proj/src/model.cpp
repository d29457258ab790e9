#include "mlmc/model.hpp"

#include <stdexcept>
#include <string>

namespace mlmc {

bool TrainingBox::contains(const ParamVector& y) const {
  return mu.contains(y.mu) && sigma.contains(y.sigma) && s0.contains(y.s0) &&
         maturity.contains(y.maturity) && strike.contains(y.strike);
}

double call_payoff(double terminal_value, double strike) {
  double v = terminal_value - strike;
  return v > 0.0 ? v : 0.0;
}

ParamVector validate_params(const ParamVector& y) {
  if (!(y.sigma >= 0.0))
    throw std::invalid_argument("sigma must be >= 0, got " + std::to_string(y.sigma));
  if (!(y.s0 > 0.0))
    throw std::invalid_argument("s0 must be > 0, got " + std::to_string(y.s0));
  if (!(y.maturity > 0.0))
    throw std::invalid_argument("maturity must be > 0, got " + std::to_string(y.maturity));
  if (!(y.strike >= 0.0))
    throw std::invalid_argument("strike must be >= 0, got " + std::to_string(y.strike));
  return y;
}

TrainingBox validate_box(const TrainingBox& box) {
  static const char* names[kParamDim] = {"mu", "sigma", "s0", "maturity", "strike"};
  auto ivs = box.as_array();
  for (int i = 0; i < kParamDim; ++i) {
    if (!(ivs[i].lo <= ivs[i].hi))
      throw std::invalid_argument(std::string("box interval for ") + names[i] +
                                  " has lower > upper");
  }
  // Corners with the smallest coordinate values are the binding ones.
  ParamVector lo{box.mu.lo, box.sigma.lo, box.s0.lo, box.maturity.lo, box.strike.lo};
  validate_params(lo);
  return box;
}

}  // namespace mlmc
