#pragma once

#include "msb/cohort.hpp"
#include "msb/knn_imputer.hpp"
#include "msb/learner.hpp"

#include <optional>
#include <string>

namespace msb {

/// How blockwise gaps are handled around the stacking layer.
enum class MsbVariant {
  Imp,    // impute the full feature matrix first
  Plain,  // impute the risk-score matrix
  Mia,    // leave score gaps to an MIA forest meta-learner
};

std::string to_string(MsbVariant v);
MsbVariant parse_variant(const std::string& name);

struct MsbConfig {
  MsbVariant variant = MsbVariant::Plain;
  bool include_missingness_indicator = true;
  std::vector<LearnerSpec> base_specs;  // default: coxnet, rsf, cwgb
  LearnerSpec meta_spec;                // default: cwgb
  int inner_folds = 5;
  int knn_neighbours = KnnImputer::kDefaultNeighbours;
  std::uint64_t seed = 0;
  int jobs = 1;

  static MsbConfig defaults(std::uint64_t seed = 0);
  void validate() const;
};

/// One column of the risk-score matrix.
struct ScoreColumn {
  std::size_t source = 0;
  std::size_t model = 0;   // index into base_specs; unused for rate columns
  bool is_rate = false;    // per-source missingness rate
  std::string label;       // "(source_id, kind)" or "(source_id, missing_rate)"
};

struct RiskScoreMatrix {
  Matrix values;  // n x columns.size(), NaN allowed before variant handling
  std::vector<ScoreColumn> columns;

  std::size_t score_columns() const;
  std::size_t rate_columns() const { return columns.size() - score_columns(); }
};

/// Records which rows trained and which rows were scored by every
/// out-of-fold model, for leakage audits.
struct FoldRecord {
  std::size_t source = 0;
  std::size_t model = 0;
  int fold = 0;
  std::vector<Index> train_rows;      // cohort row indices
  std::vector<Index> predicted_rows;  // cohort row indices
};

struct MsbAudit {
  std::vector<FoldRecord> folds;
};

/// Per-source models and imputers, shared by the stacked and naive meta-learners.
struct BaseLayer {
  std::optional<KnnImputer> full_imputer;              // imp variant
  std::vector<std::optional<KnnImputer>> source_imputers;
  std::vector<bool> source_active;
  std::vector<std::vector<FittedLearner>> models;      // [source][model], empty when dropped
  RiskScoreMatrix oof_scores;                           // out-of-fold; empty when not requested
  RiskScoreMatrix resub_scores;                         // refit models on their own training rows
  Matrix rates;                                         // n x S training missingness rates
  std::vector<std::string> warnings;
};

struct FittedMSB {
  MsbConfig config;
  ModalityManifest manifest;
  Index features = 0;
  bool naive = false;
  std::optional<KnnImputer> full_imputer;
  std::vector<std::optional<KnnImputer>> source_imputers;
  std::vector<bool> source_active;
  std::vector<std::vector<FittedLearner>> base;
  std::optional<KnnImputer> score_imputer;  // plain variant
  FittedLearner meta;
  std::vector<ScoreColumn> columns;         // meta-learner input layout
  Matrix training_scores;                   // matrix the meta-learner was fitted on
  std::vector<std::string> warnings;

  std::size_t active_sources() const;
};

BaseLayer build_base_layer(const Cohort& cohort, const MsbConfig& config, bool out_of_fold,
                           MsbAudit* audit = nullptr);

/// Fits the meta-learner on a base layer: out-of-fold scores for MSB,
/// resubstitution scores when `naive`.
FittedMSB fit_meta_learner(const Cohort& cohort, const MsbConfig& config, const BaseLayer& layer, bool naive);

FittedMSB train_msb(const Cohort& cohort, const MsbConfig& config, MsbAudit* audit = nullptr);

/// Same pipeline, but the meta-learner sees in-sample predictions of the
/// refit base learners.
FittedMSB train_naive_stack(const Cohort& cohort, const MsbConfig& config);

/// Meta-learner input for a cohort: scores, variant handling, rate columns.
Matrix build_meta_input(const FittedMSB& model, const Cohort& cohort);

struct MsbPrediction {
  Vector risk;
  std::vector<StepCurve> survival;  // on the meta-learner's event-time grid
  Matrix meta_input;
};

MsbPrediction predict_msb(const FittedMSB& model, const Cohort& cohort);

}  // namespace msb
