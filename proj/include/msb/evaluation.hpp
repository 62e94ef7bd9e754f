#pragma once

#include "msb/metrics.hpp"
#include "msb/stacking.hpp"

#include <iosfwd>
#include <string>

namespace msb {

struct CvPlan {
  int folds = 5;
  int repetitions = 3;
  int time_bins = 4;  // quantile bins of observed time
  bool stratify_event = true;
  bool stratify_strata = true;  // use Cohort::strata when present
  std::uint64_t seed = 0;

  void validate() const;
};

struct Fold {
  std::vector<Index> train;
  std::vector<Index> test;
};

struct FoldPlan {
  std::vector<std::vector<Fold>> repetitions;  // [rep][fold]
  int time_bins_used = 0;
  std::vector<std::string> warnings;
};

/// Repeated stratified folds. Rows are grouped into cells crossing the time
/// bin, event indicator and optional stratum; each cell is shuffled and dealt
/// round-robin, the dealer position carrying over between cells.
FoldPlan make_folds(const Cohort& cohort, const CvPlan& plan);

enum class ModelKind {
  Msb,       // out-of-fold stacking
  Naive,     // resubstitution stacking
  Baseline,  // single learner on the kNN-imputed concatenation plus missingness rates
};

struct BenchmarkModel {
  std::string name;
  std::string family;
  ModelKind kind = ModelKind::Baseline;
  MsbConfig msb;        // Msb / Naive
  LearnerSpec learner;  // Baseline
  bool baseline_mia = false;  // Baseline rsf on the raw matrix, no imputation
  int knn_neighbours = KnnImputer::kDefaultNeighbours;
};

struct ResultRow {
  std::string model;
  std::string family;
  int repetition = 0;
  int fold = 0;
  double train_c = kMissing, test_c = kMissing;
  double train_ibs_early = kMissing, test_ibs_early = kMissing;
  double train_ibs_late = kMissing, test_ibs_late = kMissing;
  std::string error;  // empty when the cell succeeded
};

struct ResultTable {
  std::vector<ResultRow> rows;  // ordered by (model, repetition, fold)
  std::vector<std::string> warnings;
};

struct BenchmarkOptions {
  IbsWindow early = IbsWindow::early();
  IbsWindow late = IbsWindow::late();
  int jobs = 1;
};

/// Predictions of a fitted benchmark model.
struct FittedBenchmarkModel {
  ModelKind kind = ModelKind::Baseline;
  std::optional<FittedMSB> stack;
  std::optional<KnnImputer> imputer;
  FittedLearner learner;

  MsbPrediction predict(const Cohort& cohort) const;
};

/// Concatenated features plus per-source missingness rates.
Matrix baseline_design(const Cohort& cohort);

/// Model registry used by the command line:
///   coxnet, rsf, cwgb          single learner on the imputed concatenation
///   rsf-mia                    forest on the raw matrix with MIA splits
///   msb-<variant>-<meta>       stacking, e.g. msb-plain-coxnet, msb-mia-rsf
///   naive-<variant>-<meta>     resubstitution stacking
/// Every model draws its randomness from `seed`.
BenchmarkModel named_model(const std::string& name, std::uint64_t seed);

/// Pairs every msb-* model with the baseline sharing its meta-learner kind.
std::vector<std::pair<std::string, std::string>> default_pairs(const std::vector<std::string>& models);

FittedBenchmarkModel fit_benchmark_model(const BenchmarkModel& model, const Cohort& train);

ResultTable run_benchmark(const Cohort& cohort, const CvPlan& plan, const std::vector<BenchmarkModel>& models,
                          const BenchmarkOptions& options = {});

struct WilcoxonResult {
  double w = 0.0;        // rank sum of negative deltas (baseline better)
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t n = 0;     // nonzero deltas
  bool exact = true;
};

/// Paired signed-rank test on deltas (MSB - baseline). Zero deltas are
/// dropped, ties get midranks. Exact null distribution up to 25 nonzero
/// deltas, normal approximation with continuity correction beyond.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> deltas);

/// Benjamini-Hochberg adjusted p-values, in input order.
std::vector<double> benjamini_hochberg(std::span<const double> p_values);

/// Mean train C-index minus mean test C-index over successful cells.
double generalization_gap(const ResultTable& table, const std::string& model, std::vector<std::string>* warnings = nullptr);

struct Comparison {
  std::string msb_model;
  std::string baseline_model;
  double delta_c = 0.0;        // mean paired test C-index difference
  double baseline_c = 0.0;     // mean baseline test C-index
  WilcoxonResult test;
  double adjusted_p = 1.0;
};

/// Pairs test C-indices by (repetition, fold), tests each comparison and
/// adjusts all p-values together.
std::vector<Comparison> compare_models(const ResultTable& table,
                                       const std::vector<std::pair<std::string, std::string>>& pairs);

void write_results_csv(std::ostream& out, const ResultTable& table);
ResultTable read_results_csv(const std::string& path);
/// Per-model mean +- sd, one line per (model, dataset).
void write_summary_csv(std::ostream& out, const ResultTable& table);
void write_comparison_csv(std::ostream& out, const std::vector<Comparison>& comparisons);

}  // namespace msb
