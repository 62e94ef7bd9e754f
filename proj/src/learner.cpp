#include "msb/learner.hpp"

#include <algorithm>

namespace msb {

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::Coxnet:
      return "coxnet";
    case LearnerKind::Rsf:
      return "rsf";
    case LearnerKind::Cwgb:
      return "cwgb";
  }
  return "?";
}

LearnerKind parse_learner_kind(const std::string& name) {
  if (name == "coxnet") return LearnerKind::Coxnet;
  if (name == "rsf") return LearnerKind::Rsf;
  if (name == "cwgb") return LearnerKind::Cwgb;
  throw DataError("unknown learner kind '" + name + "'");
}

void LearnerSpec::validate() const {
  if (!(coxnet.alpha > 0.0 && coxnet.alpha <= 1.0)) throw DataError("coxnet alpha must lie in (0, 1]");
  if (coxnet.path_length < 1) throw DataError("coxnet path length must be positive");
  if (!(coxnet.lambda_min_ratio > 0.0 && coxnet.lambda_min_ratio <= 1.0)) {
    throw DataError("coxnet lambda ratio must lie in (0, 1]");
  }
  if (coxnet.cv_folds == 1 || coxnet.cv_folds < 0) throw DataError("coxnet cv folds must be 0 or >= 2");
  if (!(coxnet.tolerance > 0.0 && coxnet.cv_tolerance > 0.0)) throw DataError("coxnet tolerances must be positive");
  if (rsf.trees < 1 || rsf.min_samples < 2 || rsf.min_events < 1 || rsf.mtry < 0) {
    throw DataError("invalid rsf parameters");
  }
  if (cwgb.rounds < 0 || !(cwgb.learning_rate > 0.0)) throw DataError("invalid cwgb parameters");
}

LearnerKind FittedLearner::kind() const {
  switch (state_.index()) {
    case 0:
      return LearnerKind::Coxnet;
    case 1:
      return LearnerKind::Rsf;
    default:
      return LearnerKind::Cwgb;
  }
}

void FittedLearner::check_columns(const Matrix& x) const {
  if (x.cols() != columns_) {
    throw DataError("learner expects " + std::to_string(columns_) + " columns, got " + std::to_string(x.cols()));
  }
}

Vector FittedLearner::predict_risk(const Matrix& x) const {
  check_columns(x);
  return std::visit(
      [&](const auto& m) -> Vector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FittedRsf>) {
          return m.predict_risk(x);
        } else {
          return m.linear_predictor(x);
        }
      },
      state_);
}

std::vector<StepCurve> FittedLearner::predict_survival(const Matrix& x, std::span<const double> grid) const {
  check_columns(x);
  if (grid.empty()) throw DataError("predict_survival: empty grid");
  if (!std::is_sorted(grid.begin(), grid.end()) || std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
    throw DataError("predict_survival: grid must be strictly increasing");
  }
  std::vector<StepCurve> out(static_cast<std::size_t>(x.rows()));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FittedRsf>) {
          for (Index i = 0; i < x.rows(); ++i) {
            const auto h = m.cumulative_hazard(x.row(i), grid);
            StepCurve& c = out[static_cast<std::size_t>(i)];
            c.times.assign(grid.begin(), grid.end());
            c.values.resize(h.size());
            for (std::size_t g = 0; g < h.size(); ++g) c.values[g] = std::exp(-h[g]);
          }
        } else {
          const Vector lp = m.linear_predictor(x);
          for (Index i = 0; i < x.rows(); ++i) {
            const double r = std::exp(lp[i]);
            StepCurve& c = out[static_cast<std::size_t>(i)];
            c.times.assign(grid.begin(), grid.end());
            c.values.resize(grid.size());
            for (std::size_t g = 0; g < grid.size(); ++g) c.values[g] = std::exp(-m.baseline(grid[g]) * r);
          }
        }
      },
      state_);
  return out;
}

std::vector<double> FittedLearner::event_times() const {
  return std::visit(
      [](const auto& m) -> std::vector<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FittedRsf>) {
          return m.event_times;
        } else {
          return m.baseline.times;
        }
      },
      state_);
}

FittedLearner fit_learner(const LearnerSpec& spec, const Matrix& x, std::span<const SurvivalOutcome> outcomes) {
  spec.validate();
  if (x.rows() != static_cast<Index>(outcomes.size())) throw DataError("fit: row count mismatch");
  if (x.rows() < 10) throw FitError("fit: need at least 10 rows");
  const auto events = std::count_if(outcomes.begin(), outcomes.end(), [](const SurvivalOutcome& o) { return o.event; });
  if (events < 2) throw FitError("fit: need at least 2 observed events");
  const bool constant = std::all_of(outcomes.begin(), outcomes.end(),
                                    [&](const SurvivalOutcome& o) { return o.time == outcomes.front().time; });
  if (constant) throw FitError("fit: every outcome has the same time");
  const bool mia = spec.kind == LearnerKind::Rsf && spec.rsf.mia;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double v = x(i, j);
      if (std::isinf(v) || (is_missing(v) && !mia)) throw FitError("fit: non-finite matrix entry");
    }
  }
  switch (spec.kind) {
    case LearnerKind::Coxnet:
      return FittedLearner(fit_coxnet(x, outcomes, spec.coxnet, spec.seed), x.cols());
    case LearnerKind::Rsf:
      return FittedLearner(fit_rsf(x, outcomes, spec.rsf, spec.seed), x.cols());
    case LearnerKind::Cwgb:
      return FittedLearner(fit_cwgb(x, outcomes, spec.cwgb), x.cols());
  }
  throw DataError("fit: unknown learner kind");
}

}  // namespace msb
