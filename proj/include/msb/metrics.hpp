#pragma once

#include "msb/stacking.hpp"
#include "msb/survival.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>

namespace msb {

/// Harrell's concordance over comparable pairs (T_i < T_j, event_i); tied
/// risks count one half.
double c_index(std::span<const SurvivalOutcome> outcomes, std::span<const double> risks);
inline double c_index(std::span<const SurvivalOutcome> outcomes, const Vector& risks) {
  return c_index(outcomes, std::span<const double>(risks.data(), static_cast<std::size_t>(risks.size())));
}

struct BrierDiagnostics {
  std::size_t dropped = 0;  // patients whose censoring weight was zero
};

/// IPCW Brier score at time t. `censoring` is the Kaplan-Meier estimate of
/// the censoring distribution on the training data; event weights use its
/// left limit at T_i.
double brier(std::span<const SurvivalOutcome> outcomes, std::span<const StepCurve> curves, double t,
             const StepCurve& censoring, BrierDiagnostics* diag = nullptr);

struct IbsWindow {
  double start = 0.0;
  double end = 0.0;
  int points = 50;

  static IbsWindow early() { return {15.0, 102.0, 50}; }
  static IbsWindow late() { return {100.0, 1000.0, 50}; }
  void validate() const;
  std::vector<double> grid() const;
};

struct IbsResult {
  double value = kMissing;
  IbsWindow effective;  // window after truncation at the last training event time
};

/// Trapezoidal integral of brier(t) over the window grid divided by its length.
double integrated_brier(std::span<const SurvivalOutcome> outcomes, std::span<const StepCurve> curves,
                        const IbsWindow& window, const StepCurve& censoring, BrierDiagnostics* diag = nullptr);

/// Integrated Brier score with the window end clipped to `last_event_time`;
/// NaN when nothing of the window remains.
IbsResult integrated_brier_truncated(std::span<const SurvivalOutcome> outcomes, std::span<const StepCurve> curves,
                                     const IbsWindow& window, const StepCurve& censoring, double last_event_time);

/// Brier skill score relative to a constant 0.5 predictor.
double ibss(double ibs);

struct ImportanceEntry {
  std::string label;
  std::size_t source = 0;
  std::string model;  // learner kind, or "missing_rate"
  bool is_rate = false;
  double baseline = 0.0;       // iBSS with the original column
  double mean_permuted = 0.0;  // mean iBSS over permutations
  double importance = 0.0;     // baseline - mean_permuted
  double sd = 0.0;             // standard deviation of permuted iBSS
};

struct ImportanceReport {
  IbsWindow window;
  int permutations = 0;
  std::vector<ImportanceEntry> entries;
};

/// Permutation importance of each meta-learner input column on iBSS. The
/// censoring distribution is estimated on `censoring_source` (the training
/// outcomes); the window end is clipped to its last event time.
ImportanceReport permutation_importance(const FittedMSB& model, const Cohort& test, const IbsWindow& window, int k,
                                        std::span<const SurvivalOutcome> censoring_source, std::uint64_t seed);

void write_importance_csv(std::ostream& out, const ImportanceReport& report);

}  // namespace msb
