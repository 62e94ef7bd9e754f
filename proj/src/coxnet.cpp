#include "msb/coxnet.hpp"

#include "msb/random.hpp"

#include <algorithm>

namespace msb {

namespace {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

}  // namespace

ElasticNetCoxSolver::ElasticNetCoxSolver(const Matrix& x, std::span<const SurvivalOutcome> outcomes, double alpha)
    : x_(x), problem_(outcomes), alpha_(alpha) {
  if (x.rows() != static_cast<Index>(outcomes.size())) throw DataError("coxnet: row count mismatch");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DataError("coxnet: alpha must lie in (0, 1]");
}

double ElasticNetCoxSolver::lambda_max() const {
  const Vector grad = cox_gradient(problem_, x_, Vector::Zero(x_.cols()));
  return grad.cwiseAbs().maxCoeff() / alpha_;
}

double ElasticNetCoxSolver::objective(double lambda, const Vector& beta) const {
  const double n = static_cast<double>(problem_.n());
  return problem_.loss(x_ * beta) / n +
         lambda * (alpha_ * beta.lpNorm<1>() + 0.5 * (1.0 - alpha_) * beta.squaredNorm());
}

void ElasticNetCoxSolver::solve(double lambda, Vector& beta, double tolerance, int max_sweeps) const {
  const Index p = x_.cols();
  const Index m = x_.rows();
  const double n = static_cast<double>(problem_.n());
  const double l1 = lambda * alpha_;
  const double l2 = lambda * (1.0 - alpha_);
  if (beta.size() != p) beta = Vector::Zero(p);
  if (problem_.events() == 0) {
    beta.setZero();
    return;
  }

  Vector eta = x_ * beta;
  double f = objective(lambda, beta);
  Vector w(m), resid(m), v(p);
  std::vector<Index> active;
  // coordinate moves are measured as v_j * step^2, the same scale as tolerance^2
  const double inner_tol = tolerance * tolerance;

  for (int outer = 0; outer < 200; ++outer) {
    // quadratic model of the partial likelihood: exact gradient, diagonal Hessian
    problem_.diagonal_hessian(eta, resid, w);  // resid <- gradient, w <- curvature
    if (kkt_violation(lambda, beta, x_.transpose() * resid / n) < tolerance) break;
    for (Index i = 0; i < m; ++i) resid[i] = w[i] > 0.0 ? -resid[i] : 0.0;  // w * (z - eta)
    for (Index j = 0; j < p; ++j) v[j] = x_.col(j).cwiseAbs2().dot(w) / n;

    const Vector start = beta;
    auto update = [&](Index j) -> double {
      const double denom = v[j] + l2;
      if (denom <= 0.0) return 0.0;
      const double old = beta[j];
      const double target = soft_threshold(x_.col(j).dot(resid) / n + v[j] * old, l1) / denom;
      const double delta = target - old;
      if (delta == 0.0) return 0.0;
      beta[j] = target;
      resid.noalias() -= (delta * w.array() * x_.col(j).array()).matrix();
      return v[j] * delta * delta;
    };
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      double change = 0.0;
      for (Index j = 0; j < p; ++j) change = std::max(change, update(j));
      if (change < inner_tol) break;
      active.clear();
      for (Index j = 0; j < p; ++j) {
        if (beta[j] != 0.0) active.push_back(j);
      }
      for (int inner = 0; inner < max_sweeps; ++inner) {
        double c = 0.0;
        for (Index j : active) c = std::max(c, update(j));
        if (c < inner_tol) break;
      }
    }

    // guard the step on the exact objective
    Vector step = beta - start;
    double f_new = objective(lambda, beta);
    for (int halving = 0; halving < 60 && f_new > f + 1e-13 * std::abs(f); ++halving) {
      step *= 0.5;
      beta = start + step;
      f_new = objective(lambda, beta);
    }
    if (f_new > f + 1e-13 * std::abs(f)) {
      beta = start;
      break;
    }
    eta = x_ * beta;
    const double gained = f - f_new;
    f = f_new;
    if (gained <= 1e-16 * std::abs(f) && step.cwiseAbs().maxCoeff() == 0.0) break;
  }
}

double ElasticNetCoxSolver::kkt_violation(double lambda, const Vector& beta, const Vector& gradient) const {
  double worst = 0.0;
  for (Index j = 0; j < beta.size(); ++j) {
    const double smooth = gradient[j] + lambda * (1.0 - alpha_) * beta[j];
    if (beta[j] > 0.0) {
      worst = std::max(worst, std::abs(smooth + lambda * alpha_));
    } else if (beta[j] < 0.0) {
      worst = std::max(worst, std::abs(smooth - lambda * alpha_));
    } else {
      worst = std::max(worst, std::abs(smooth) - lambda * alpha_);
    }
  }
  return worst;
}

std::vector<double> lambda_path(double lambda_max, int length, double min_ratio) {
  std::vector<double> path;
  if (length <= 0) return path;
  if (length == 1) return {lambda_max};
  for (int k = 0; k < length; ++k) {
    path.push_back(lambda_max * std::pow(min_ratio, static_cast<double>(k) / static_cast<double>(length - 1)));
  }
  return path;
}

std::vector<int> stratified_fold_labels(std::span<const SurvivalOutcome> outcomes, int folds, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Index> events, censored;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    (outcomes[i].event ? events : censored).push_back(static_cast<Index>(i));
  }
  shuffle(events, rng);
  shuffle(censored, rng);
  std::vector<int> label(outcomes.size(), 0);
  int next = 0;
  for (const auto* group : {&events, &censored}) {
    for (Index i : *group) {
      label[static_cast<std::size_t>(i)] = next;
      next = (next + 1) % folds;
    }
  }
  return label;
}

Vector FittedCoxnet::linear_predictor(const Matrix& x) const { return standardizer.apply(x) * beta; }

FittedCoxnet fit_coxnet(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const CoxnetParams& params,
                        std::uint64_t seed) {
  FittedCoxnet fit;
  fit.alpha = params.alpha;
  fit.standardizer = Standardizer::fit(x);
  const Matrix xs = fit.standardizer.apply(x);
  const Index p = xs.cols();

  ElasticNetCoxSolver full(xs, outcomes, params.alpha);
  double lmax = full.lambda_max();
  if (!(lmax > 0.0)) lmax = 1.0;
  fit.path = lambda_path(lmax, params.path_length, params.lambda_min_ratio);
  fit.cv_score.assign(fit.path.size(), 0.0);

  std::size_t chosen = fit.path.size() - 1;
  if (params.cv_folds >= 2 && fit.path.size() > 1) {
    const auto label = stratified_fold_labels(outcomes, params.cv_folds, seed);
    for (int f = 0; f < params.cv_folds; ++f) {
      std::vector<Index> train;
      for (std::size_t i = 0; i < label.size(); ++i) {
        if (label[i] != f) train.push_back(static_cast<Index>(i));
      }
      const Matrix xt = select_rows(xs, train);
      const auto yt = select(std::vector<SurvivalOutcome>(outcomes.begin(), outcomes.end()), train);
      ElasticNetCoxSolver solver(xt, yt, params.alpha);
      if (solver.problem().events() == 0) continue;
      Vector beta = Vector::Zero(p);
      for (std::size_t k = 0; k < fit.path.size(); ++k) {
        solver.solve(fit.path[k], beta, params.cv_tolerance, params.max_sweeps);
        // Verweij-van Houwelingen cross-validated partial likelihood
        const double ll_full = -full.problem().loss(xs * beta);
        const double ll_train = -solver.problem().loss(xt * beta);
        fit.cv_score[k] += ll_full - ll_train;
      }
    }
    chosen = static_cast<std::size_t>(
        std::max_element(fit.cv_score.begin(), fit.cv_score.end()) - fit.cv_score.begin());
  }

  Vector beta = Vector::Zero(p);
  for (std::size_t k = 0; k <= chosen; ++k) full.solve(fit.path[k], beta, params.tolerance, params.max_sweeps);
  fit.beta = beta;
  fit.lambda = fit.path[chosen];

  const Vector lp = xs * beta;
  fit.baseline = breslow_baseline(outcomes, std::span<const double>(lp.data(), static_cast<std::size_t>(lp.size())));
  return fit;
}

}  // namespace msb
