#pragma once

#include "msb/cox_loss.hpp"
#include "msb/survival.hpp"

#include <cstdint>

namespace msb {

struct CoxnetParams {
  double alpha = 0.5;            // L1 share of the elastic-net penalty
  int path_length = 20;
  double lambda_min_ratio = 0.01;
  int cv_folds = 3;
  double tolerance = 1e-6;     // largest subgradient violation accepted
  double cv_tolerance = 1e-4;  // looser, only ranks the path
  int max_sweeps = 100000;
};

/// Elastic-net penalized Cox regression by cyclic coordinate descent.
///
/// Minimizes loss(X b) / n + lambda * (alpha |b|_1 + (1 - alpha) / 2 |b|^2)
/// on an already standardized design. Outer loop: quadratic model of the
/// partial likelihood with diagonal Hessian, minimized by cyclic coordinate
/// descent over an active set; the step is halved until the exact objective
/// decreases.
class ElasticNetCoxSolver {
 public:
  ElasticNetCoxSolver(const Matrix& x, std::span<const SurvivalOutcome> outcomes, double alpha);

  /// Smallest lambda at which every coefficient is zero.
  double lambda_max() const;

  /// Solves at one lambda starting from `beta` (warm start), in place.
  void solve(double lambda, Vector& beta, double tolerance = 1e-6, int max_sweeps = 100000) const;

  /// Largest violation of the elastic-net optimality conditions given the
  /// smooth-part gradient at beta.
  double kkt_violation(double lambda, const Vector& beta, const Vector& gradient) const;

  double objective(double lambda, const Vector& beta) const;
  const CoxProblem& problem() const { return problem_; }

 private:
  const Matrix& x_;
  CoxProblem problem_;
  double alpha_;
};

/// Geometric lambda path from lambda_max down by lambda_min_ratio.
std::vector<double> lambda_path(double lambda_max, int length, double min_ratio);

struct FittedCoxnet {
  Standardizer standardizer;
  Vector beta;  // on the standardized scale
  double lambda = 0.0;
  double alpha = 0.5;
  std::vector<double> path;
  std::vector<double> cv_score;  // cross-validated log partial likelihood per lambda
  StepCurve baseline;            // Breslow cumulative hazard at the training linear predictors

  Vector linear_predictor(const Matrix& x) const;
};

FittedCoxnet fit_coxnet(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const CoxnetParams& params,
                        std::uint64_t seed);

/// Event-stratified fold labels in [0, folds), seeded.
std::vector<int> stratified_fold_labels(std::span<const SurvivalOutcome> outcomes, int folds, std::uint64_t seed);

}  // namespace msb
