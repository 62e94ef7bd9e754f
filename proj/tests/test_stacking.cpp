#include "msb/metrics.hpp"
#include "msb/simulator.hpp"
#include "msb/stacking.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace msb;

namespace {

SimSpec small_spec(std::uint64_t seed, double missing = 0.3) {
  SimSpec spec;
  spec.n = 160;
  spec.source_sizes = {4, 6, 3};
  spec.signal_sources = {0, 1};
  spec.signal_features = 2;
  spec.signal_strength = 0.8;
  spec.seed = seed;
  spec.missing = {MissingMechanism{}, MissingMechanism{MissingMechanism::Type::Mcar, missing, 0.0},
                  MissingMechanism{MissingMechanism::Type::Mcar, missing, 0.0}};
  return spec;
}

MsbConfig fast_config(std::uint64_t seed) {
  auto c = MsbConfig::defaults(seed);
  for (auto& s : c.base_specs) s.rsf.trees = 15;
  c.meta_spec.rsf.trees = 15;
  return c;
}

double spearman(const Vector& a, const Vector& b) {
  auto ranks = [](const Vector& v) {
    std::vector<Index> idx(static_cast<std::size_t>(v.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Index>(i);
    std::sort(idx.begin(), idx.end(), [&](Index x, Index y) { return v[x] < v[y]; });
    Vector r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
  };
  const Vector ra = ranks(a), rb = ranks(b);
  const Vector ca = ra.array() - ra.mean(), cb = rb.array() - rb.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

}  // namespace

TEST_CASE("out-of-fold scores never come from a model that saw the row") {
  const auto sim = simulate(small_spec(1));
  MsbAudit audit;
  const auto layer = build_base_layer(sim.cohort, fast_config(1), true, &audit);
  const Matrix& z = layer.oof_scores.values;
  // every filled cell is produced by exactly one fold record that excludes the row
  Eigen::MatrixXi produced = Eigen::MatrixXi::Zero(z.rows(), z.cols());
  const std::size_t M = 3;
  for (const auto& rec : audit.folds) {
    const std::set<Index> train(rec.train_rows.begin(), rec.train_rows.end());
    const Index col = static_cast<Index>(rec.source * M + rec.model);
    for (Index i : rec.predicted_rows) {
      CHECK(train.count(i) == 0);
      produced(i, col) += 1;
    }
  }
  for (Index i = 0; i < z.rows(); ++i) {
    for (Index j = 0; j < z.cols(); ++j) CHECK(produced(i, j) == (is_missing(z(i, j)) ? 0 : 1));
  }
}

TEST_CASE("score matrix width with eight sources and three models") {
  SimSpec spec;
  spec.n = 150;
  spec.seed = 2;
  spec.missing.assign(8, MissingMechanism{MissingMechanism::Type::Mcar, 0.2, 0.0});
  const auto sim = simulate(spec);
  auto cfg = fast_config(2);
  cfg.base_specs[1].rsf.trees = 5;
  const auto model = train_msb(sim.cohort, cfg);
  CHECK(model.training_scores.cols() == 32);
  CHECK(model.columns.size() == 32);
  CHECK(model.columns[0].label == "(A, coxnet)");
  CHECK(model.columns.back().label == "(H, missing_rate)");
}

TEST_CASE("variants agree on complete data") {
  auto spec = small_spec(3);
  spec.missing.clear();
  spec.cell_missing = 0.0;
  const auto sim = simulate(spec);
  auto cfg = fast_config(3);
  std::vector<Matrix> scores;
  for (MsbVariant v : {MsbVariant::Imp, MsbVariant::Plain, MsbVariant::Mia}) {
    cfg.variant = v;
    cfg.meta_spec = v == MsbVariant::Mia ? LearnerSpec::of(LearnerKind::Rsf) : LearnerSpec::of(LearnerKind::Cwgb);
    scores.push_back(build_base_layer(sim.cohort, cfg, true).oof_scores.values);
  }
  CHECK(scores[0] == scores[1]);
  CHECK(scores[1] == scores[2]);
}

TEST_CASE("naive stack with one source and one model sees the refit risks") {
  auto spec = small_spec(4);
  spec.source_sizes = {5};
  spec.signal_sources = {0};
  spec.missing.clear();
  const auto sim = simulate(spec);
  auto cfg = fast_config(4);
  cfg.base_specs = {LearnerSpec::of(LearnerKind::Coxnet)};
  cfg.include_missingness_indicator = false;
  const auto model = train_naive_stack(sim.cohort, cfg);
  Matrix x = sim.cohort.features;
  if (x.hasNaN()) x = model.source_imputers[0]->transform(x);
  const Vector refit = model.base[0][0].predict_risk(x);
  CHECK(model.training_scores.col(0) == refit);
}

TEST_CASE("one source and one base model collapse to that model") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto spec = small_spec(100 + seed);
    spec.n = 300;
    spec.source_sizes = {6};
    spec.signal_sources = {0};
    spec.missing.clear();
    spec.cell_missing = 0.0;
    const auto sim = simulate(spec);
    std::vector<Index> train, test;
    for (Index i = 0; i < sim.cohort.n(); ++i) (i % 3 == 0 ? test : train).push_back(i);
    const Cohort tr = sim.cohort.subset(train), te = sim.cohort.subset(test);
    auto cfg = fast_config(seed);
    cfg.base_specs = {LearnerSpec::of(LearnerKind::Coxnet)};
    cfg.include_missingness_indicator = false;
    const auto model = train_msb(tr, cfg);
    const double c_msb = c_index(te.outcomes, predict_msb(model, te).risk);
    const auto alone = fit_learner(LearnerSpec::of(LearnerKind::Coxnet, seed), tr.features, tr.outcomes);
    const double c_base = c_index(te.outcomes, alone.predict_risk(te.features));
    worst = std::max(worst, std::abs(c_msb - c_base));
  }
  CHECK(worst <= 0.02);
}

TEST_CASE("prediction paths") {
  const auto sim = simulate(small_spec(5, 0.4));
  const auto cfg = fast_config(5);
  const auto model = train_msb(sim.cohort, cfg);

  SUBCASE("self prediction tracks the meta-training risks") {
    const auto pred = predict_msb(model, sim.cohort);
    const Vector meta_train = model.meta.predict_risk(model.training_scores);
    CHECK(spearman(pred.risk, meta_train) > 0.8);
    CHECK(pred.survival.size() == static_cast<std::size_t>(sim.cohort.n()));
  }
  SUBCASE("a row with every source missing still gets a finite risk") {
    Cohort c = sim.cohort.subset({0, 1, 2});
    c.features.row(1).setConstant(kMissing);
    const auto pred = predict_msb(model, c);
    CHECK(pred.risk.allFinite());
    CHECK_FALSE(pred.meta_input.hasNaN());
  }
  SUBCASE("duplicated rows give identical outputs") {
    const Cohort c = sim.cohort.subset({7, 7, 3});
    const auto pred = predict_msb(model, c);
    CHECK(pred.risk[0] == pred.risk[1]);
    CHECK(pred.survival[0].values == pred.survival[1].values);
  }
  SUBCASE("manifest mismatch") {
    Cohort c = sim.cohort;
    c.manifest = ModalityManifest({{"A", "A", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}}});
    CHECK_THROWS_AS(predict_msb(model, c), ManifestError);
  }
}

TEST_CASE("mia variant keeps score gaps for the forest") {
  const auto sim = simulate(small_spec(6, 0.4));
  auto cfg = fast_config(6);
  cfg.variant = MsbVariant::Mia;
  cfg.meta_spec = LearnerSpec::of(LearnerKind::Rsf);
  cfg.meta_spec.rsf.trees = 15;
  const auto model = train_msb(sim.cohort, cfg);
  CHECK(model.training_scores.hasNaN());
  CHECK(predict_msb(model, sim.cohort).risk.allFinite());
  cfg.meta_spec = LearnerSpec::of(LearnerKind::Coxnet);
  CHECK_THROWS_AS(train_msb(sim.cohort, cfg), DataError);
}

TEST_CASE("imp variant never leaves score gaps") {
  const auto sim = simulate(small_spec(7, 0.4));
  auto cfg = fast_config(7);
  cfg.variant = MsbVariant::Imp;
  const auto model = train_msb(sim.cohort, cfg);
  CHECK_FALSE(model.training_scores.hasNaN());
}

TEST_CASE("stacking errors and warnings") {
  auto sim = simulate(small_spec(8));
  SUBCASE("too few events") {
    Cohort c = sim.cohort;
    for (std::size_t i = 5; i < c.outcomes.size(); ++i) c.outcomes[i].event = false;
    CHECK_THROWS_AS(train_msb(c, fast_config(8)), FitError);
  }
  SUBCASE("a source with too few rows is dropped with a warning") {
    Cohort c = sim.cohort;
    for (Index col : c.manifest[2].columns) {
      for (Index i = 3; i < c.n(); ++i) c.features(i, col) = kMissing;
    }
    const auto model = train_msb(c, fast_config(8));
    CHECK_FALSE(model.source_active[2]);
    REQUIRE_FALSE(model.warnings.empty());
    CHECK(model.warnings[0].find("'C'") != std::string::npos);
    CHECK(predict_msb(model, c).risk.allFinite());
  }
}

TEST_CASE("training is deterministic and independent of job count") {
  const auto sim = simulate(small_spec(9));
  auto cfg = fast_config(9);
  const auto a = train_msb(sim.cohort, cfg);
  cfg.jobs = 3;
  const auto b = train_msb(sim.cohort, cfg);
  CHECK(a.training_scores == b.training_scores);
  CHECK(predict_msb(a, sim.cohort).risk == predict_msb(b, sim.cohort).risk);
}
