#pragma once

#include "msb/cohort.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace msb {

/// Right-continuous step function over time.
struct StepCurve {
  std::vector<double> times;   // strictly increasing
  std::vector<double> values;  // value on [times[k], times[k+1])
  double before_first = 1.0;   // value on [0, times[0])

  /// Value at the largest knot <= t.
  double operator()(double t) const;
  /// Left limit: value at the largest knot < t.
  double left_limit(double t) const;
  double terminal() const { return values.empty() ? before_first : values.back(); }
};

/// Distinct event times and the (deaths, at-risk) counts at each.
struct EventTable {
  std::vector<double> times;
  std::vector<double> deaths;
  std::vector<double> at_risk;
};

EventTable event_table(std::span<const SurvivalOutcome> outcomes);

StepCurve kaplan_meier(std::span<const SurvivalOutcome> outcomes);
/// KM of the censoring distribution (event indicator flipped).
StepCurve censoring_km(std::span<const SurvivalOutcome> outcomes);
StepCurve nelson_aalen(std::span<const SurvivalOutcome> outcomes);

/// Breslow cumulative baseline hazard for the given linear predictors.
StepCurve breslow_baseline(std::span<const SurvivalOutcome> outcomes, std::span<const double> linear_predictors);

/// exp(-H0(t) * exp(lp)) on the knots of the baseline.
StepCurve cox_survival(const StepCurve& baseline_hazard, double linear_predictor);

struct LogrankResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample log-rank test, one degree of freedom.
LogrankResult logrank_test(std::span<const SurvivalOutcome> group_a, std::span<const SurvivalOutcome> group_b);

/// Upper tail of the chi-square distribution with one degree of freedom.
double chi2_1df_sf(double x);

/// Two-column (time, value) CSV.
void write_curve_csv(std::ostream& out, const StepCurve& curve, const std::string& value_name = "value");

}  // namespace msb
