#include "msb/cox_loss.hpp"

#include <algorithm>
#include <numeric>

namespace msb {

CoxProblem::CoxProblem(std::span<const SurvivalOutcome> outcomes) {
  const std::size_t n = outcomes.size();
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), Index{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [&](Index a, Index b) { return outcomes[static_cast<std::size_t>(a)].time < outcomes[static_cast<std::size_t>(b)].time; });
  event_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    event_[i] = outcomes[i].event ? 1 : 0;
    events_ += outcomes[i].event ? 1 : 0;
  }
  std::size_t k = 0;
  while (k < n) {
    const double t = outcomes[static_cast<std::size_t>(order_[k])].time;
    group_start_.push_back(k);
    double d = 0.0;
    while (k < n && outcomes[static_cast<std::size_t>(order_[k])].time == t) {
      d += event_[static_cast<std::size_t>(order_[k])];
      ++k;
    }
    group_deaths_.push_back(d);
  }
  group_start_.push_back(n);
}

double CoxProblem::loss(const Vector& eta) const {
  if (eta.size() != n()) throw DataError("cox loss: size mismatch");
  if (n() == 0) return 0.0;
  const double c = eta.maxCoeff();
  double s0 = 0.0, total = 0.0;
  for (std::size_t g = group_deaths_.size(); g-- > 0;) {
    double ev_eta = 0.0;
    for (std::size_t k = group_start_[g]; k < group_start_[g + 1]; ++k) {
      const Index i = order_[k];
      s0 += std::exp(eta[i] - c);
      if (event_[static_cast<std::size_t>(i)]) ev_eta += eta[i];
    }
    if (group_deaths_[g] > 0.0) total -= ev_eta - group_deaths_[g] * (std::log(s0) + c);
  }
  return total;
}

Vector CoxProblem::eta_gradient(const Vector& eta) const {
  const Index m = n();
  Vector grad = Vector::Zero(m);
  if (m == 0) return grad;
  const double c = eta.maxCoeff();
  const std::size_t G = group_deaths_.size();
  std::vector<double> s0(G);
  double acc = 0.0;
  for (std::size_t g = G; g-- > 0;) {
    for (std::size_t k = group_start_[g]; k < group_start_[g + 1]; ++k) acc += std::exp(eta[order_[k]] - c);
    s0[g] = acc;
  }
  // cumulative Breslow hazard in the shifted scale: sum d_g / s0_g
  double h = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    h += group_deaths_[g] / s0[g];
    for (std::size_t k = group_start_[g]; k < group_start_[g + 1]; ++k) {
      const Index i = order_[k];
      grad[i] = -static_cast<double>(event_[static_cast<std::size_t>(i)]) + std::exp(eta[i] - c) * h;
    }
  }
  return grad;
}

void CoxProblem::diagonal_hessian(const Vector& eta, Vector& gradient, Vector& diagonal) const {
  const Index m = n();
  gradient = Vector::Zero(m);
  diagonal = Vector::Zero(m);
  if (m == 0) return;
  const double c = eta.maxCoeff();
  const std::size_t G = group_deaths_.size();
  std::vector<double> s0(G);
  double acc = 0.0;
  for (std::size_t g = G; g-- > 0;) {
    for (std::size_t k = group_start_[g]; k < group_start_[g + 1]; ++k) acc += std::exp(eta[order_[k]] - c);
    s0[g] = acc;
  }
  double h1 = 0.0, h2 = 0.0;  // sum d/s0 and sum d/s0^2
  for (std::size_t g = 0; g < G; ++g) {
    h1 += group_deaths_[g] / s0[g];
    h2 += group_deaths_[g] / (s0[g] * s0[g]);
    for (std::size_t k = group_start_[g]; k < group_start_[g + 1]; ++k) {
      const Index i = order_[k];
      const double e = std::exp(eta[i] - c);
      gradient[i] = -static_cast<double>(event_[static_cast<std::size_t>(i)]) + e * h1;
      diagonal[i] = e * h1 - e * e * h2;
    }
  }
}

std::pair<double, double> CoxProblem::coordinate_derivatives(const Vector& w, const Eigen::Ref<const Vector>& x) const {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, g = 0.0, h = 0.0;
  for (std::size_t grp = group_deaths_.size(); grp-- > 0;) {
    double ev_x = 0.0;
    for (std::size_t k = group_start_[grp]; k < group_start_[grp + 1]; ++k) {
      const Index i = order_[k];
      const double wi = w[i], xi = x[i];
      s0 += wi;
      s1 += wi * xi;
      s2 += wi * xi * xi;
      if (event_[static_cast<std::size_t>(i)]) ev_x += xi;
    }
    const double d = group_deaths_[grp];
    if (d > 0.0) {
      const double mu = s1 / s0;
      g += d * mu - ev_x;
      h += d * std::max(0.0, s2 / s0 - mu * mu);
    }
  }
  return {g, h};
}

Vector cox_gradient(const CoxProblem& problem, const Matrix& x, const Vector& beta) {
  const Vector eta = x * beta;
  return x.transpose() * problem.eta_gradient(eta) / static_cast<double>(problem.n());
}

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  const double n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean().transpose();
  s.scale.resize(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean[j]).square().sum() / n;
    const double sd = std::sqrt(var);
    s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) throw DataError("standardizer: column count mismatch");
  Matrix out = x;
  for (Index j = 0; j < x.cols(); ++j) out.col(j) = (x.col(j).array() - mean[j]) / scale[j];
  return out;
}

}  // namespace msb
