#include "msb/survival.hpp"

#include "msb/csv.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

namespace msb {

double StepCurve::operator()(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return before_first;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double StepCurve::left_limit(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return before_first;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

EventTable event_table(std::span<const SurvivalOutcome> outcomes) {
  std::vector<std::size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return outcomes[a].time < outcomes[b].time; });
  EventTable tab;
  const double n = static_cast<double>(outcomes.size());
  std::size_t k = 0;
  while (k < order.size()) {
    const double t = outcomes[order[k]].time;
    const double at_risk = n - static_cast<double>(k);
    double d = 0.0;
    std::size_t j = k;
    while (j < order.size() && outcomes[order[j]].time == t) {
      if (outcomes[order[j]].event) d += 1.0;
      ++j;
    }
    if (d > 0.0) {
      tab.times.push_back(t);
      tab.deaths.push_back(d);
      tab.at_risk.push_back(at_risk);
    }
    k = j;
  }
  return tab;
}

namespace {

void require_nonempty(std::span<const SurvivalOutcome> outcomes, const char* what) {
  if (outcomes.empty()) throw DataError(std::string(what) + ": empty input");
}

}  // namespace

StepCurve kaplan_meier(std::span<const SurvivalOutcome> outcomes) {
  require_nonempty(outcomes, "kaplan_meier");
  const EventTable tab = event_table(outcomes);
  StepCurve c;
  c.before_first = 1.0;
  double s = 1.0;
  for (std::size_t k = 0; k < tab.times.size(); ++k) {
    s *= 1.0 - tab.deaths[k] / tab.at_risk[k];
    c.times.push_back(tab.times[k]);
    c.values.push_back(s);
  }
  return c;
}

StepCurve censoring_km(std::span<const SurvivalOutcome> outcomes) {
  require_nonempty(outcomes, "censoring_km");
  std::vector<SurvivalOutcome> flipped(outcomes.begin(), outcomes.end());
  for (auto& o : flipped) o.event = !o.event;
  return kaplan_meier(flipped);
}

StepCurve nelson_aalen(std::span<const SurvivalOutcome> outcomes) {
  require_nonempty(outcomes, "nelson_aalen");
  const EventTable tab = event_table(outcomes);
  StepCurve c;
  c.before_first = 0.0;
  double h = 0.0;
  for (std::size_t k = 0; k < tab.times.size(); ++k) {
    h += tab.deaths[k] / tab.at_risk[k];
    c.times.push_back(tab.times[k]);
    c.values.push_back(h);
  }
  return c;
}

StepCurve breslow_baseline(std::span<const SurvivalOutcome> outcomes, std::span<const double> lp) {
  if (outcomes.size() != lp.size()) throw DataError("breslow_baseline: length mismatch");
  require_nonempty(outcomes, "breslow_baseline");
  std::vector<std::size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return outcomes[a].time < outcomes[b].time; });
  // risk-set sums from the largest time down
  std::vector<double> tail(order.size() + 1, 0.0);
  for (std::size_t k = order.size(); k-- > 0;) tail[k] = tail[k + 1] + std::exp(lp[order[k]]);

  StepCurve c;
  c.before_first = 0.0;
  double h = 0.0;
  std::size_t k = 0;
  while (k < order.size()) {
    const double t = outcomes[order[k]].time;
    double d = 0.0;
    std::size_t j = k;
    while (j < order.size() && outcomes[order[j]].time == t) {
      if (outcomes[order[j]].event) d += 1.0;
      ++j;
    }
    if (d > 0.0) {
      h += d / tail[k];
      c.times.push_back(t);
      c.values.push_back(h);
    }
    k = j;
  }
  return c;
}

StepCurve cox_survival(const StepCurve& baseline_hazard, double linear_predictor) {
  const double r = std::exp(linear_predictor);
  StepCurve c;
  c.times = baseline_hazard.times;
  c.values.resize(baseline_hazard.values.size());
  for (std::size_t k = 0; k < c.values.size(); ++k) c.values[k] = std::exp(-baseline_hazard.values[k] * r);
  c.before_first = std::exp(-baseline_hazard.before_first * r);
  return c;
}

double chi2_1df_sf(double x) {
  if (!(x > 0.0)) return 1.0;
  return std::erfc(std::sqrt(0.5 * x));
}

LogrankResult logrank_test(std::span<const SurvivalOutcome> a, std::span<const SurvivalOutcome> b) {
  if (a.empty() || b.empty()) throw DataError("logrank_test: empty group");
  struct Obs {
    double time;
    bool event;
    bool in_a;
  };
  std::vector<Obs> all;
  all.reserve(a.size() + b.size());
  for (const auto& o : a) all.push_back({o.time, o.event, true});
  for (const auto& o : b) all.push_back({o.time, o.event, false});
  std::sort(all.begin(), all.end(), [](const Obs& x, const Obs& y) { return x.time < y.time; });

  double y_a = static_cast<double>(a.size());
  double y = static_cast<double>(all.size());
  double o_minus_e = 0.0, var = 0.0;
  std::size_t k = 0;
  while (k < all.size()) {
    const double t = all[k].time;
    double d = 0.0, d_a = 0.0, leave = 0.0, leave_a = 0.0;
    std::size_t j = k;
    while (j < all.size() && all[j].time == t) {
      if (all[j].event) {
        d += 1.0;
        if (all[j].in_a) d_a += 1.0;
      }
      leave += 1.0;
      if (all[j].in_a) leave_a += 1.0;
      ++j;
    }
    if (d > 0.0) {
      o_minus_e += d_a - d * y_a / y;
      if (y > 1.0) var += d * (y_a / y) * (1.0 - y_a / y) * (y - d) / (y - 1.0);
    }
    y -= leave;
    y_a -= leave_a;
    k = j;
  }
  LogrankResult r;
  if (var <= 0.0) return r;
  r.statistic = o_minus_e * o_minus_e / var;
  r.p_value = chi2_1df_sf(r.statistic);
  return r;
}

void write_curve_csv(std::ostream& out, const StepCurve& curve, const std::string& value_name) {
  csv::write_row(out, {"time", value_name});
  csv::write_row(out, {csv::fmt(0.0), csv::fmt(curve(0.0))});
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    if (curve.times[k] == 0.0) continue;
    csv::write_row(out, {csv::fmt(curve.times[k]), csv::fmt(curve.values[k])});
  }
}

}  // namespace msb
