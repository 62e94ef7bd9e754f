#pragma once

#include "msb/cox_loss.hpp"
#include "msb/survival.hpp"

namespace msb {

struct CwgbParams {
  int rounds = 100;
  double learning_rate = 0.1;
};

/// Component-wise linear boosting on the Cox partial likelihood.
struct FittedCwgb {
  Standardizer standardizer;
  Vector coef;                       // additive model on the standardized scale
  std::vector<int> selected;         // feature picked in each round
  std::vector<double> loss_history;  // training loss before round 0 and after each round
  StepCurve baseline;

  Vector linear_predictor(const Matrix& x) const;
};

FittedCwgb fit_cwgb(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const CwgbParams& params);

}  // namespace msb
