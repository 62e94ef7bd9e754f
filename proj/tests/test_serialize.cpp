#include "msb/serialize.hpp"
#include "msb/simulator.hpp"

#include "scratch.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace msb;

namespace {

SimResult cohort_for(std::uint64_t seed) {
  SimSpec spec;
  spec.n = 150;
  spec.source_sizes = {4, 5, 3};
  spec.signal_sources = {0, 1};
  spec.signal_features = 2;
  spec.seed = seed;
  spec.missing = {MissingMechanism{}, MissingMechanism::parse("mcar:0.3"), MissingMechanism::parse("mcar:0.3")};
  return simulate(spec);
}

}  // namespace

TEST_CASE("learners survive a round trip") {
  const auto sim = cohort_for(1);
  const Matrix x = sim.cohort.features.leftCols(4).unaryExpr([](double v) { return std::isnan(v) ? 0.0 : v; });
  for (LearnerKind kind : {LearnerKind::Coxnet, LearnerKind::Rsf, LearnerKind::Cwgb}) {
    auto spec = LearnerSpec::of(kind, 2);
    spec.rsf.trees = 10;
    const auto model = fit_learner(spec, x, sim.cohort.outcomes);
    std::stringstream buf;
    save_learner(buf, model);
    const auto back = load_learner(buf);
    CHECK(back.kind() == kind);
    CHECK(back.predict_risk(x) == model.predict_risk(x));
    const auto grid = model.event_times();
    CHECK(back.event_times() == grid);
    const auto a = model.predict_survival(x.topRows(5), grid), b = back.predict_survival(x.topRows(5), grid);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
  }
}

TEST_CASE("stacked models survive a round trip") {
  const auto sim = cohort_for(3);
  for (MsbVariant v : {MsbVariant::Plain, MsbVariant::Imp, MsbVariant::Mia}) {
    auto cfg = MsbConfig::defaults(4);
    cfg.variant = v;
    cfg.base_specs[1].rsf.trees = 10;
    if (v == MsbVariant::Mia) {
      cfg.meta_spec = LearnerSpec::of(LearnerKind::Rsf);
      cfg.meta_spec.rsf.trees = 10;
    }
    const auto model = train_msb(sim.cohort, cfg);
    ScratchDir dir;
    save_msb_file(dir.file("m.json"), model);
    const auto back = load_msb_file(dir.file("m.json"));
    const auto p1 = predict_msb(model, sim.cohort), p2 = predict_msb(back, sim.cohort);
    CHECK(p1.risk == p2.risk);
    CHECK(back.columns.size() == model.columns.size());
    CHECK(back.config.variant == v);
    // saving the reloaded model reproduces the file
    save_msb_file(dir.file("again.json"), back);
    CHECK(slurp(dir.file("m.json")) == slurp(dir.file("again.json")));
  }
}

TEST_CASE("bad model files are rejected") {
  std::istringstream garbage("{not json");
  CHECK_THROWS_AS(load_msb(garbage), DataError);
  std::istringstream wrong(R"({"format":"msb-model","type":"learner","version":1})");
  CHECK_THROWS_AS(load_msb(wrong), DataError);
  std::istringstream future(R"({"format":"msb-model","type":"msb","version":99})");
  CHECK_THROWS_AS(load_msb(future), DataError);
  CHECK_THROWS_AS(load_msb_file("/nonexistent/model.json"), DataError);
}
