#include "msb/serialize.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace msb {

using nlohmann::json;

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num(const json& j) { return j.is_null() ? kMissing : j.get<double>(); }

json vec(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}
std::vector<double> vec(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(num(x));
  return v;
}

json vec(const Vector& v) { return vec(std::vector<double>(v.data(), v.data() + v.size())); }
Vector eigen_vec(const json& j) {
  const auto v = vec(j);
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

json mat(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index c = 0; c < m.cols(); ++c) r.push_back(num(m(i, c)));
    rows.push_back(std::move(r));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}
Matrix mat(const json& j) {
  Matrix m(j.at("rows").get<Index>(), j.at("cols").get<Index>());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index c = 0; c < m.cols(); ++c) m(i, c) = num(j.at("data").at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)));
  }
  return m;
}

json curve(const StepCurve& c) {
  return json{{"times", vec(c.times)}, {"values", vec(c.values)}, {"before_first", num(c.before_first)}};
}
StepCurve curve(const json& j) {
  StepCurve c;
  c.times = vec(j.at("times"));
  c.values = vec(j.at("values"));
  c.before_first = num(j.at("before_first"));
  return c;
}

json standardizer(const Standardizer& s) { return json{{"mean", vec(s.mean)}, {"scale", vec(s.scale)}}; }
Standardizer standardizer(const json& j) { return Standardizer{eigen_vec(j.at("mean")), eigen_vec(j.at("scale"))}; }

json spec_json(const LearnerSpec& s) {
  return json{{"kind", to_string(s.kind)},
              {"seed", s.seed},
              {"coxnet",
               {{"alpha", s.coxnet.alpha},
                {"path_length", s.coxnet.path_length},
                {"lambda_min_ratio", s.coxnet.lambda_min_ratio},
                {"cv_folds", s.coxnet.cv_folds},
                {"tolerance", s.coxnet.tolerance},
                {"cv_tolerance", s.coxnet.cv_tolerance},
                {"max_sweeps", s.coxnet.max_sweeps}}},
              {"rsf",
               {{"trees", s.rsf.trees},
                {"min_samples", s.rsf.min_samples},
                {"min_events", s.rsf.min_events},
                {"mtry", s.rsf.mtry},
                {"mia", s.rsf.mia}}},
              {"cwgb", {{"rounds", s.cwgb.rounds}, {"learning_rate", s.cwgb.learning_rate}}}};
}
LearnerSpec spec_from(const json& j) {
  LearnerSpec s;
  s.kind = parse_learner_kind(j.at("kind").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  const auto& c = j.at("coxnet");
  s.coxnet.alpha = c.at("alpha");
  s.coxnet.path_length = c.at("path_length");
  s.coxnet.lambda_min_ratio = c.at("lambda_min_ratio");
  s.coxnet.cv_folds = c.at("cv_folds");
  s.coxnet.tolerance = c.at("tolerance");
  s.coxnet.cv_tolerance = c.at("cv_tolerance");
  s.coxnet.max_sweeps = c.at("max_sweeps");
  const auto& r = j.at("rsf");
  s.rsf.trees = r.at("trees");
  s.rsf.min_samples = r.at("min_samples");
  s.rsf.min_events = r.at("min_events");
  s.rsf.mtry = r.at("mtry");
  s.rsf.mia = r.at("mia");
  s.cwgb.rounds = j.at("cwgb").at("rounds");
  s.cwgb.learning_rate = j.at("cwgb").at("learning_rate");
  return s;
}

json learner_json(const FittedLearner& l) {
  json j{{"kind", to_string(l.kind())}, {"columns", l.columns()}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FittedCoxnet>) {
          j["standardizer"] = standardizer(m.standardizer);
          j["beta"] = vec(m.beta);
          j["lambda"] = m.lambda;
          j["alpha"] = m.alpha;
          j["path"] = vec(m.path);
          j["cv_score"] = vec(m.cv_score);
          j["baseline"] = curve(m.baseline);
        } else if constexpr (std::is_same_v<T, FittedCwgb>) {
          j["standardizer"] = standardizer(m.standardizer);
          j["coef"] = vec(m.coef);
          j["selected"] = m.selected;
          j["loss_history"] = vec(m.loss_history);
          j["baseline"] = curve(m.baseline);
        } else {
          j["event_times"] = vec(m.event_times);
          j["features"] = m.features;
          j["mia"] = m.mia;
          json trees = json::array();
          for (const auto& t : m.trees) {
            json nodes = json::array();
            for (const auto& nd : t.nodes) {
              nodes.push_back(json::array({nd.feature, num(nd.threshold), static_cast<int>(nd.route), nd.left, nd.right, nd.leaf}));
            }
            json leaves = json::array();
            for (const auto& c : t.leaves) leaves.push_back(curve(c));
            trees.push_back(json{{"nodes", std::move(nodes)}, {"leaves", std::move(leaves)}, {"leaf_grid_sum", vec(t.leaf_grid_sum)}});
          }
          j["trees"] = std::move(trees);
        }
      },
      l.state());
  return j;
}

FittedLearner learner_from(const json& j) {
  const LearnerKind kind = parse_learner_kind(j.at("kind").get<std::string>());
  const Index columns = j.at("columns").get<Index>();
  switch (kind) {
    case LearnerKind::Coxnet: {
      FittedCoxnet m;
      m.standardizer = standardizer(j.at("standardizer"));
      m.beta = eigen_vec(j.at("beta"));
      m.lambda = j.at("lambda");
      m.alpha = j.at("alpha");
      m.path = vec(j.at("path"));
      m.cv_score = vec(j.at("cv_score"));
      m.baseline = curve(j.at("baseline"));
      return FittedLearner(std::move(m), columns);
    }
    case LearnerKind::Cwgb: {
      FittedCwgb m;
      m.standardizer = standardizer(j.at("standardizer"));
      m.coef = eigen_vec(j.at("coef"));
      m.selected = j.at("selected").get<std::vector<int>>();
      m.loss_history = vec(j.at("loss_history"));
      m.baseline = curve(j.at("baseline"));
      return FittedLearner(std::move(m), columns);
    }
    case LearnerKind::Rsf: {
      FittedRsf m;
      m.event_times = vec(j.at("event_times"));
      m.features = j.at("features").get<Index>();
      m.mia = j.at("mia");
      for (const auto& jt : j.at("trees")) {
        SurvivalTree t;
        for (const auto& nd : jt.at("nodes")) {
          TreeNode node;
          node.feature = nd.at(0).get<Index>();
          node.threshold = num(nd.at(1));
          node.route = static_cast<MissingRoute>(nd.at(2).get<int>());
          node.left = nd.at(3);
          node.right = nd.at(4);
          node.leaf = nd.at(5);
          t.nodes.push_back(node);
        }
        for (const auto& c : jt.at("leaves")) t.leaves.push_back(curve(c));
        t.leaf_grid_sum = vec(jt.at("leaf_grid_sum"));
        m.trees.push_back(std::move(t));
      }
      return FittedLearner(std::move(m), columns);
    }
  }
  throw DataError("unknown learner kind");
}

json imputer_json(const std::optional<KnnImputer>& imp) {
  if (!imp) return nullptr;
  json fb = imp->global_fallback() ? json(*imp->global_fallback()) : json(nullptr);
  return json{{"k", imp->k()}, {"fallback", fb}, {"reference", mat(imp->reference())}};
}
std::optional<KnnImputer> imputer_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  std::optional<double> fb;
  if (!j.at("fallback").is_null()) fb = j.at("fallback").get<double>();
  return KnnImputer::restore(j.at("k"), fb, mat(j.at("reference")));
}

json read_versioned(std::istream& in, const std::string& type) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "msb-model" || j.value("type", "") != type) {
    throw DataError("not a " + type + " model file");
  }
  if (j.value("version", 0) != kModelFormatVersion) {
    throw DataError("unsupported model file version " + std::to_string(j.value("version", 0)));
  }
  return j;
}

}  // namespace

void save_learner(std::ostream& out, const FittedLearner& learner) {
  json j{{"format", "msb-model"}, {"type", "learner"}, {"version", kModelFormatVersion}, {"learner", learner_json(learner)}};
  out << j.dump() << '\n';
}

FittedLearner load_learner(std::istream& in) {
  try {
    return learner_from(read_versioned(in, "learner").at("learner"));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_msb(std::ostream& out, const FittedMSB& m) {
  json sources = json::array();
  for (const auto& s : m.manifest.sources()) sources.push_back(json{{"id", s.id}, {"name", s.name}, {"columns", s.columns}});
  json bases = json::array();
  for (const auto& b : m.config.base_specs) bases.push_back(spec_json(b));
  json config{{"variant", to_string(m.config.variant)},
              {"include_missingness_indicator", m.config.include_missingness_indicator},
              {"base_specs", std::move(bases)},
              {"meta_spec", spec_json(m.config.meta_spec)},
              {"inner_folds", m.config.inner_folds},
              {"knn_neighbours", m.config.knn_neighbours},
              {"seed", m.config.seed}};
  json source_imputers = json::array();
  for (const auto& imp : m.source_imputers) source_imputers.push_back(imputer_json(imp));
  json active = json::array();
  for (bool a : m.source_active) active.push_back(a);
  json base = json::array();
  for (const auto& per_source : m.base) {
    json row = json::array();
    for (const auto& l : per_source) row.push_back(learner_json(l));
    base.push_back(std::move(row));
  }
  json columns = json::array();
  for (const auto& c : m.columns) {
    columns.push_back(json{{"source", c.source}, {"model", c.model}, {"is_rate", c.is_rate}, {"label", c.label}});
  }
  json j{{"format", "msb-model"},
         {"type", "msb"},
         {"version", kModelFormatVersion},
         {"config", std::move(config)},
         {"manifest", std::move(sources)},
         {"features", m.features},
         {"naive", m.naive},
         {"full_imputer", imputer_json(m.full_imputer)},
         {"source_imputers", std::move(source_imputers)},
         {"source_active", std::move(active)},
         {"base", std::move(base)},
         {"score_imputer", imputer_json(m.score_imputer)},
         {"meta", learner_json(m.meta)},
         {"columns", std::move(columns)},
         {"training_scores", mat(m.training_scores)},
         {"warnings", m.warnings}};
  out << j.dump() << '\n';
}

FittedMSB load_msb(std::istream& in) {
  const json j = read_versioned(in, "msb");
  try {
    FittedMSB m;
    const auto& c = j.at("config");
    m.config.variant = parse_variant(c.at("variant").get<std::string>());
    m.config.include_missingness_indicator = c.at("include_missingness_indicator");
    for (const auto& b : c.at("base_specs")) m.config.base_specs.push_back(spec_from(b));
    m.config.meta_spec = spec_from(c.at("meta_spec"));
    m.config.inner_folds = c.at("inner_folds");
    m.config.knn_neighbours = c.at("knn_neighbours");
    m.config.seed = c.at("seed").get<std::uint64_t>();
    std::vector<Source> sources;
    for (const auto& s : j.at("manifest")) {
      sources.push_back(Source{s.at("id"), s.at("name"), s.at("columns").get<std::vector<Index>>()});
    }
    m.manifest = ModalityManifest(std::move(sources));
    m.features = j.at("features").get<Index>();
    m.manifest.validate(m.features);
    m.naive = j.at("naive");
    m.full_imputer = imputer_from(j.at("full_imputer"));
    for (const auto& imp : j.at("source_imputers")) m.source_imputers.push_back(imputer_from(imp));
    for (const auto& a : j.at("source_active")) m.source_active.push_back(a.get<bool>());
    for (const auto& row : j.at("base")) {
      std::vector<FittedLearner> models;
      for (const auto& l : row) models.push_back(learner_from(l));
      m.base.push_back(std::move(models));
    }
    m.score_imputer = imputer_from(j.at("score_imputer"));
    m.meta = learner_from(j.at("meta"));
    for (const auto& col : j.at("columns")) {
      m.columns.push_back(ScoreColumn{col.at("source"), col.at("model"), col.at("is_rate"), col.at("label")});
    }
    m.training_scores = mat(j.at("training_scores"));
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_msb_file(const std::string& path, const FittedMSB& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  save_msb(out, model);
}

FittedMSB load_msb_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return load_msb(in);
}

}  // namespace msb
