#include "msb/stacking.hpp"

#include "msb/parallel.hpp"
#include "msb/random.hpp"

#include <algorithm>
#include <sstream>

namespace msb {

std::string to_string(MsbVariant v) {
  switch (v) {
    case MsbVariant::Imp:
      return "imp";
    case MsbVariant::Plain:
      return "plain";
    case MsbVariant::Mia:
      return "mia";
  }
  return "?";
}

MsbVariant parse_variant(const std::string& name) {
  if (name == "imp") return MsbVariant::Imp;
  if (name == "plain") return MsbVariant::Plain;
  if (name == "mia") return MsbVariant::Mia;
  throw DataError("unknown MSB variant '" + name + "'");
}

MsbConfig MsbConfig::defaults(std::uint64_t seed) {
  MsbConfig c;
  c.seed = seed;
  c.base_specs = {LearnerSpec::of(LearnerKind::Coxnet), LearnerSpec::of(LearnerKind::Rsf),
                  LearnerSpec::of(LearnerKind::Cwgb)};
  c.meta_spec = LearnerSpec::of(LearnerKind::Cwgb);
  return c;
}

void MsbConfig::validate() const {
  if (base_specs.empty()) throw DataError("msb: at least one base learner required");
  if (inner_folds < 2) throw DataError("msb: inner folds must be >= 2");
  if (knn_neighbours < 1) throw DataError("msb: knn neighbours must be positive");
  if (variant == MsbVariant::Mia && meta_spec.kind != LearnerKind::Rsf) {
    throw DataError("msb: the mia variant requires an rsf meta-learner");
  }
  for (const auto& s : base_specs) s.validate();
  meta_spec.validate();
}

std::size_t RiskScoreMatrix::score_columns() const {
  return static_cast<std::size_t>(std::count_if(columns.begin(), columns.end(),
                                                [](const ScoreColumn& c) { return !c.is_rate; }));
}

std::size_t FittedMSB::active_sources() const {
  return static_cast<std::size_t>(std::count(source_active.begin(), source_active.end(), true));
}

namespace {

std::string score_label(const Source& src, const LearnerSpec& spec) {
  return "(" + src.id + ", " + to_string(spec.kind) + ")";
}

/// Row is treated as having no data for a source when every cell is missing.
bool block_absent(const Matrix& block, Index i) {
  for (Index j = 0; j < block.cols(); ++j) {
    if (!is_missing(block(i, j))) return false;
  }
  return true;
}

LearnerSpec seeded(const LearnerSpec& spec, std::uint64_t seed, int jobs) {
  LearnerSpec s = spec;
  s.seed = seed;
  s.rsf.jobs = jobs;
  return s;
}

std::vector<double> rates_of(const Cohort& cohort, Matrix& rates) {
  const auto prof = missingness_profile(cohort);
  rates = prof.rates;
  return prof.source_rate;
}

}  // namespace

BaseLayer build_base_layer(const Cohort& cohort, const MsbConfig& config, bool out_of_fold, MsbAudit* audit) {
  config.validate();
  cohort.validate();
  const Index n = cohort.n();
  const std::size_t S = cohort.num_sources();
  const std::size_t M = config.base_specs.size();
  const auto& y = cohort.outcomes;
  const auto total_events = std::count_if(y.begin(), y.end(), [](const SurvivalOutcome& o) { return o.event; });
  if (total_events < 2 * config.inner_folds) {
    throw FitError("msb: too few events for " + std::to_string(config.inner_folds) + " inner folds");
  }

  BaseLayer layer;
  rates_of(cohort, layer.rates);
  Matrix x = cohort.features;
  if (config.variant == MsbVariant::Imp) {
    layer.full_imputer.emplace(config.knn_neighbours);
    x = layer.full_imputer->fit_transform(x);
  }

  layer.source_imputers.resize(S);
  layer.source_active.assign(S, false);
  layer.models.resize(S);

  struct SourceData {
    std::vector<Index> rows;  // cohort rows with data for the source
    Matrix block;             // imputed block over those rows
    Outcomes outcomes;
    std::vector<int> fold;
  };
  std::vector<SourceData> data(S);

  for (std::size_t s = 0; s < S; ++s) {
    const Source& src = cohort.manifest[s];
    const Matrix block = select_cols(x, src.columns);
    SourceData& d = data[s];
    for (Index i = 0; i < n; ++i) {
      if (!block_absent(block, i)) d.rows.push_back(i);
    }
    if (d.rows.size() < static_cast<std::size_t>(config.inner_folds)) {
      layer.warnings.push_back("source '" + src.id + "' dropped: fewer available rows than inner folds");
      continue;
    }
    d.block = select_rows(block, d.rows);
    d.outcomes = select(y, d.rows);
    d.fold = stratified_fold_labels(d.outcomes, config.inner_folds, derive_seed(config.seed, "inner-folds/" + src.id));
    if (out_of_fold) {
      bool enough = true;
      for (int f = 0; f < config.inner_folds && enough; ++f) {
        int ev = 0, rows = 0;
        for (std::size_t q = 0; q < d.rows.size(); ++q) {
          if (d.fold[q] != f) {
            ev += d.outcomes[q].event ? 1 : 0;
            ++rows;
          }
        }
        enough = ev >= 2 && rows >= 10;
      }
      if (!enough) {
        layer.warnings.push_back("source '" + src.id + "' dropped: an inner training fold has fewer than 2 events or 10 rows");
        continue;
      }
    }
    // kept even for complete blocks so residual gaps in new rows can be filled
    layer.source_imputers[s].emplace(config.knn_neighbours);
    d.block = layer.source_imputers[s]->fit_transform(d.block);
    layer.source_active[s] = true;
  }

  // (source, model, fold) jobs; fold == inner_folds is the refit on all rows
  struct Task {
    std::size_t source, model;
    int fold;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < S; ++s) {
    if (!layer.source_active[s]) continue;
    for (std::size_t m = 0; m < M; ++m) {
      if (out_of_fold) {
        for (int f = 0; f < config.inner_folds; ++f) tasks.push_back({s, m, f});
      }
      tasks.push_back({s, m, config.inner_folds});
    }
  }
  std::vector<FittedLearner> fitted(tasks.size());
  std::vector<Vector> scored(tasks.size());
  parallel_for(tasks.size(), config.jobs, [&](std::size_t t) {
    const Task& task = tasks[t];
    const SourceData& d = data[task.source];
    const std::string tag = cohort.manifest[task.source].id + "/" + std::to_string(task.model) + "/" +
                            std::to_string(task.fold);
    const LearnerSpec spec = seeded(config.base_specs[task.model], derive_seed(config.seed, "base/" + tag), 1);
    std::vector<Index> train, test;
    for (std::size_t q = 0; q < d.rows.size(); ++q) {
      (d.fold[q] == task.fold ? test : train).push_back(static_cast<Index>(q));
    }
    if (task.fold == config.inner_folds) {
      fitted[t] = fit_learner(spec, d.block, d.outcomes);
      scored[t] = fitted[t].predict_risk(d.block);
    } else {
      const FittedLearner model = fit_learner(spec, select_rows(d.block, train), select(d.outcomes, train));
      scored[t] = model.predict_risk(select_rows(d.block, test));
    }
  });

  auto init_scores = [&](RiskScoreMatrix& z) {
    for (std::size_t s = 0; s < S; ++s) {
      if (!layer.source_active[s]) continue;
      for (std::size_t m = 0; m < M; ++m) {
        z.columns.push_back({s, m, false, score_label(cohort.manifest[s], config.base_specs[m])});
      }
    }
    z.values = Matrix::Constant(n, static_cast<Index>(z.columns.size()), kMissing);
  };
  if (out_of_fold) init_scores(layer.oof_scores);
  init_scores(layer.resub_scores);

  auto column_of = [&](std::size_t s, std::size_t m) {
    Index c = 0;
    for (std::size_t q = 0; q < s; ++q) c += layer.source_active[q] ? static_cast<Index>(M) : 0;
    return c + static_cast<Index>(m);
  };
  for (std::size_t s = 0; s < S; ++s) {
    if (layer.source_active[s]) layer.models[s].resize(M);
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Task& task = tasks[t];
    const SourceData& d = data[task.source];
    const Index col = column_of(task.source, task.model);
    if (task.fold == config.inner_folds) {
      for (std::size_t q = 0; q < d.rows.size(); ++q) layer.resub_scores.values(d.rows[q], col) = scored[t][static_cast<Index>(q)];
      layer.models[task.source][task.model] = std::move(fitted[t]);
      continue;
    }
    FoldRecord rec{task.source, task.model, task.fold, {}, {}};
    Index k = 0;
    for (std::size_t q = 0; q < d.rows.size(); ++q) {
      if (d.fold[q] == task.fold) {
        layer.oof_scores.values(d.rows[q], col) = scored[t][k++];
        rec.predicted_rows.push_back(d.rows[q]);
      } else {
        rec.train_rows.push_back(d.rows[q]);
      }
    }
    if (audit) audit->folds.push_back(std::move(rec));
  }
  return layer;
}

namespace {

Matrix append_rates(const Matrix& scores, const Matrix& rates) {
  Matrix out(scores.rows(), scores.cols() + rates.cols());
  out << scores, rates;
  return out;
}

}  // namespace

FittedMSB fit_meta_learner(const Cohort& cohort, const MsbConfig& config, const BaseLayer& layer, bool naive) {
  const RiskScoreMatrix& z = naive ? layer.resub_scores : layer.oof_scores;
  if (z.values.rows() != cohort.n()) throw FitError("msb: base layer has no scores for the requested mode");
  FittedMSB model;
  model.config = config;
  model.manifest = cohort.manifest;
  model.features = cohort.p();
  model.naive = naive;
  model.full_imputer = layer.full_imputer;
  model.source_imputers = layer.source_imputers;
  model.source_active = layer.source_active;
  model.base = layer.models;
  model.warnings = layer.warnings;
  model.columns = z.columns;

  Matrix scores = z.values;
  if (config.variant == MsbVariant::Plain) {
    model.score_imputer.emplace(config.knn_neighbours);
    scores = model.score_imputer->fit_transform(scores);
  } else if (config.variant == MsbVariant::Imp && scores.hasNaN()) {
    throw FitError("msb: imp variant produced missing scores");
  }
  if (config.include_missingness_indicator) {
    scores = append_rates(scores, layer.rates);
    for (std::size_t s = 0; s < cohort.num_sources(); ++s) {
      model.columns.push_back({s, 0, true, "(" + cohort.manifest[s].id + ", missing_rate)"});
    }
  }
  LearnerSpec meta = seeded(config.meta_spec, derive_seed(config.seed, naive ? "naive-meta" : "meta"), config.jobs);
  if (config.variant == MsbVariant::Mia) meta.rsf.mia = true;
  model.meta = fit_learner(meta, scores, cohort.outcomes);
  model.training_scores = std::move(scores);
  return model;
}

FittedMSB train_msb(const Cohort& cohort, const MsbConfig& config, MsbAudit* audit) {
  const BaseLayer layer = build_base_layer(cohort, config, true, audit);
  return fit_meta_learner(cohort, config, layer, false);
}

FittedMSB train_naive_stack(const Cohort& cohort, const MsbConfig& config) {
  const BaseLayer layer = build_base_layer(cohort, config, false);
  return fit_meta_learner(cohort, config, layer, true);
}

Matrix build_meta_input(const FittedMSB& model, const Cohort& cohort) {
  if (cohort.p() != model.features || !cohort.manifest.same_partition(model.manifest)) {
    throw ManifestError("cohort layout does not match the trained model");
  }
  const Index n = cohort.n();
  const auto& cfg = model.config;
  const std::size_t M = cfg.base_specs.size();
  Matrix rates;
  rates_of(cohort, rates);

  Matrix x = cohort.features;
  if (model.full_imputer) x = model.full_imputer->transform(x);

  Matrix scores = Matrix::Constant(n, static_cast<Index>(model.active_sources() * M), kMissing);
  Index col = 0;
  for (std::size_t s = 0; s < model.manifest.size(); ++s) {
    if (!model.source_active[s]) continue;
    const Matrix block = select_cols(x, model.manifest[s].columns);
    std::vector<Index> rows;
    for (Index i = 0; i < n; ++i) {
      if (!block_absent(block, i)) rows.push_back(i);
    }
    if (!rows.empty()) {
      Matrix sub = select_rows(block, rows);
      if (sub.hasNaN()) sub = model.source_imputers[s]->transform(sub);
      for (std::size_t m = 0; m < M; ++m) {
        const Vector r = model.base[s][m].predict_risk(sub);
        for (std::size_t q = 0; q < rows.size(); ++q) scores(rows[q], col + static_cast<Index>(m)) = r[static_cast<Index>(q)];
      }
    }
    col += static_cast<Index>(M);
  }
  if (model.score_imputer) scores = model.score_imputer->transform(scores);
  if (cfg.include_missingness_indicator) scores = append_rates(scores, rates);
  return scores;
}

MsbPrediction predict_msb(const FittedMSB& model, const Cohort& cohort) {
  MsbPrediction out;
  out.meta_input = build_meta_input(model, cohort);
  out.risk = model.meta.predict_risk(out.meta_input);
  auto grid = model.meta.event_times();
  if (grid.empty()) grid.push_back(0.0);
  out.survival = model.meta.predict_survival(out.meta_input, grid);
  return out;
}

}  // namespace msb
