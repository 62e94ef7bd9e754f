#include "msb/cwgb.hpp"

namespace msb {

Vector FittedCwgb::linear_predictor(const Matrix& x) const { return standardizer.apply(x) * coef; }

FittedCwgb fit_cwgb(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const CwgbParams& params) {
  if (x.rows() != static_cast<Index>(outcomes.size())) throw DataError("cwgb: row count mismatch");
  if (params.rounds < 0 || !(params.learning_rate > 0.0)) throw DataError("cwgb: invalid parameters");
  FittedCwgb fit;
  fit.standardizer = Standardizer::fit(x);
  const Matrix xs = fit.standardizer.apply(x);
  const CoxProblem problem(outcomes);
  const Index p = xs.cols();
  fit.coef = Vector::Zero(p);
  const Vector sq = xs.colwise().squaredNorm().transpose();

  Vector eta = Vector::Zero(xs.rows());
  fit.loss_history.push_back(problem.loss(eta));
  for (int round = 0; round < params.rounds; ++round) {
    const Vector residual = -problem.eta_gradient(eta);
    const Vector num = xs.transpose() * residual;
    Index best = -1;
    double best_gain = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (sq[j] <= 0.0) continue;
      const double gain = num[j] * num[j] / sq[j];
      if (best < 0 || gain > best_gain) {
        best = j;
        best_gain = gain;
      }
    }
    if (best < 0) break;  // every column constant
    const double step = params.learning_rate * num[best] / sq[best];
    fit.coef[best] += step;
    eta += step * xs.col(best);
    fit.selected.push_back(static_cast<int>(best));
    fit.loss_history.push_back(problem.loss(eta));
  }
  fit.baseline = breslow_baseline(outcomes, std::span<const double>(eta.data(), static_cast<std::size_t>(eta.size())));
  return fit;
}

}  // namespace msb
