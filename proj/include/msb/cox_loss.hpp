#pragma once

#include "msb/cohort.hpp"

#include <span>
#include <utility>

namespace msb {

/// Negative Cox log partial likelihood with Breslow ties, and its derivatives.
///
/// Rows are grouped by distinct time; the risk set of a group is every row
/// whose time is at least the group's time.
class CoxProblem {
 public:
  explicit CoxProblem(std::span<const SurvivalOutcome> outcomes);

  Index n() const { return static_cast<Index>(event_.size()); }
  std::size_t events() const { return events_; }

  /// Sum over events of -(eta_i - log sum_{risk set} exp(eta_j)).
  double loss(const Vector& eta) const;

  /// d loss / d eta_i = -event_i + exp(eta_i) * H0(T_i).
  Vector eta_gradient(const Vector& eta) const;

  /// Gradient of loss in eta and the diagonal of its Hessian.
  void diagonal_hessian(const Vector& eta, Vector& gradient, Vector& diagonal) const;

  /// First and second derivative of loss along a single covariate column,
  /// given weights w = exp(eta - c) for any constant c.
  std::pair<double, double> coordinate_derivatives(const Vector& w, const Eigen::Ref<const Vector>& x) const;

 private:
  std::vector<Index> order_;               // ascending time
  std::vector<std::size_t> group_start_;   // size groups + 1, into order_
  std::vector<double> group_deaths_;
  std::vector<char> event_;
  std::size_t events_ = 0;
};

/// Gradient of loss(X beta) / n with respect to beta.
Vector cox_gradient(const CoxProblem& problem, const Matrix& x, const Vector& beta);

/// Mean and population standard deviation per column; constant columns get scale 1.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

}  // namespace msb
