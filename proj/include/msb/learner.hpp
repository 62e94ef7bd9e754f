#pragma once

#include "msb/coxnet.hpp"
#include "msb/cwgb.hpp"
#include "msb/rsf.hpp"

#include <string>
#include <variant>

namespace msb {

enum class LearnerKind { Coxnet, Rsf, Cwgb };

std::string to_string(LearnerKind kind);
LearnerKind parse_learner_kind(const std::string& name);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::Cwgb;
  CoxnetParams coxnet;
  RsfParams rsf;
  CwgbParams cwgb;
  std::uint64_t seed = 0;

  static LearnerSpec of(LearnerKind kind, std::uint64_t seed = 0) {
    LearnerSpec s;
    s.kind = kind;
    s.seed = seed;
    return s;
  }
  void validate() const;
};

/// A fitted survival model: coxnet, random survival forest or boosting.
class FittedLearner {
 public:
  using State = std::variant<FittedCoxnet, FittedRsf, FittedCwgb>;

  FittedLearner() = default;
  FittedLearner(State state, Index columns) : state_(std::move(state)), columns_(columns) {}

  LearnerKind kind() const;
  Index columns() const { return columns_; }
  const State& state() const { return state_; }

  /// Larger is earlier expected event.
  Vector predict_risk(const Matrix& x) const;

  /// Survival curves evaluated on `grid` (nonempty, increasing).
  std::vector<StepCurve> predict_survival(const Matrix& x, std::span<const double> grid) const;

  /// Distinct training event times; the natural grid for predict_survival.
  std::vector<double> event_times() const;

 private:
  void check_columns(const Matrix& x) const;

  State state_;
  Index columns_ = 0;
};

/// Fits a learner. Requires a complete matrix (unless an MIA forest), at
/// least 10 rows and 2 events.
FittedLearner fit_learner(const LearnerSpec& spec, const Matrix& x, std::span<const SurvivalOutcome> outcomes);

}  // namespace msb
