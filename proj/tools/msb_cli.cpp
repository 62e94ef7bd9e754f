#include "msb/csv.hpp"
#include "msb/evaluation.hpp"
#include "msb/metrics.hpp"
#include "msb/random.hpp"
#include "msb/serialize.hpp"
#include "msb/simulator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace msb;

namespace {

/// Flag values that parse but make no sense together; reported like parse errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string time_col = "time";
  std::string event_col = "event";
  std::string strata_col;
  std::string config;
  std::vector<std::string> args;  // effective tokens, config included
};

// Sub-seeds fanned out from the master seed; one per purpose.
std::uint64_t learner_seed(const Common& c) { return derive_seed(c.seed, "learners"); }
std::uint64_t fold_seed(const Common& c) { return derive_seed(c.seed, "folds"); }
std::uint64_t importance_seed(const Common& c) { return derive_seed(c.seed, "importance"); }

CohortColumns columns_of(const Common& c) { return {c.time_col, c.event_col, c.strata_col}; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// key = value lines become --key=value tokens appended after the command
/// line, so the file wins over flags.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty() || key == "config") throw UsageError(path + ":" + std::to_string(lineno) + ": bad key");
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

std::string eigen_version() {
  return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
}

nlohmann::json manifest_line(const std::string& command, const Common& c) {
  return {{"command", command},
          {"args", c.args},
          {"seed", c.seed},
          {"sub_seeds",
           {{"learners", learner_seed(c)}, {"folds", fold_seed(c)}, {"importance", importance_seed(c)}}},
          {"jobs", c.jobs},
          {"version", kVersion},
          {"model_format", kModelFormatVersion},
          {"eigen", eigen_version()}};
}

void write_manifest(const fs::path& dir, const std::vector<nlohmann::json>& lines) {
  std::ofstream out(dir / "run_manifest.jsonl");
  if (!out) throw DataError("cannot write " + (dir / "run_manifest.jsonl").string());
  for (const auto& l : lines) out << l.dump() << '\n';
}

fs::path parent_dir(const std::string& file) {
  const fs::path p = fs::path(file).parent_path();
  return p.empty() ? fs::path(".") : p;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

IbsWindow parse_window(const std::string& text) {
  if (text == "early") return IbsWindow::early();
  if (text == "late") return IbsWindow::late();
  const auto parts = split(text, ':');
  if (parts.size() != 2) throw UsageError("window must be early, late or start:end, got '" + text + "'");
  IbsWindow w;
  try {
    w.start = std::stod(parts[0]);
    w.end = std::stod(parts[1]);
  } catch (const std::exception&) {
    throw UsageError("bad window '" + text + "'");
  }
  try {
    w.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return w;
}

std::vector<BenchmarkModel> parse_models(const std::string& list, std::uint64_t seed) {
  std::vector<BenchmarkModel> models;
  for (const auto& name : split(list, ',')) {
    try {
      models.push_back(named_model(name, seed));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  if (models.empty()) throw UsageError("--models names no model");
  return models;
}

std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& list) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& item : split(list, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw UsageError("pairs are msb_model:baseline, got '" + item + "'");
    pairs.emplace_back(parts[0], parts[1]);
  }
  return pairs;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string spec;
  std::string out;
  bool seeded = false;
};

SimResult simulate_into(const SimulateArgs& a, const Common& c) {
  SimSpec spec = a.spec.empty() ? SimSpec{} : SimSpec::from_file(a.spec);
  if (a.seeded) spec.seed = c.seed;
  const SimResult sim = simulate(spec);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  // the center label lands in features.csv only when a strata column is named
  write_cohort(sim.cohort, (dir / "features.csv").string(), (dir / "manifest.csv").string(), columns_of(c));
  {
    auto out = open_out(dir / "ground_truth.csv");
    write_ground_truth_csv(out, sim);
  }
  const auto summary = describe(sim.cohort);
  {
    auto out = open_out(dir / "summary.csv");
    write_summary_csv(out, summary);
  }
  {
    auto out = open_out(dir / "summary.txt");
    write_summary_text(out, summary);
  }
  {
    auto out = open_out(dir / "spec.txt");
    spec.write(out);
  }
  return sim;
}

void run_simulate(const SimulateArgs& a, const Common& c) {
  simulate_into(a, c);
  write_manifest(a.out, {manifest_line("simulate", c)});
}

// ---- profile ---------------------------------------------------------------

struct DataArgs {
  std::string features;
  std::string manifest;
};

Cohort load(const DataArgs& d, const Common& c) { return load_cohort(d.features, d.manifest, columns_of(c)); }

void run_profile(const DataArgs& d, const std::string& out_dir, const Common& c) {
  const Cohort cohort = load(d, c);
  const auto prof = missingness_profile(cohort);
  const std::size_t S = cohort.num_sources();
  const fs::path dir(out_dir);
  fs::create_directories(dir);

  {
    auto out = open_out(dir / "missingness.csv");
    std::vector<std::string> header = {"row"};
    for (std::size_t s = 0; s < S; ++s) header.push_back(cohort.manifest[s].id + "_rate");
    for (std::size_t s = 0; s < S; ++s) header.push_back(cohort.manifest[s].id + "_block");
    csv::write_row(out, header);
    for (Index i = 0; i < cohort.n(); ++i) {
      std::vector<std::string> row = {std::to_string(i)};
      for (std::size_t s = 0; s < S; ++s) row.push_back(csv::fmt(prof.rates(i, static_cast<Index>(s))));
      for (std::size_t s = 0; s < S; ++s) row.push_back(std::to_string(prof.block_missing(i, static_cast<Index>(s))));
      csv::write_row(out, row);
    }
  }
  {
    // rows in block-pattern order, ready for a heatmap
    auto out = open_out(dir / "patterns.csv");
    std::vector<std::string> header = {"position", "row"};
    for (std::size_t s = 0; s < S; ++s) header.push_back(cohort.manifest[s].id);
    csv::write_row(out, header);
    const auto order = sort_by_block_pattern(cohort);
    for (std::size_t k = 0; k < order.size(); ++k) {
      std::vector<std::string> row = {std::to_string(k), std::to_string(order[k])};
      for (std::size_t s = 0; s < S; ++s) row.push_back(std::to_string(prof.block_missing(order[k], static_cast<Index>(s))));
      csv::write_row(out, row);
    }
  }
  const auto summary = describe(cohort);
  {
    auto out = open_out(dir / "summary.csv");
    write_summary_csv(out, summary);
  }
  {
    auto out = open_out(dir / "summary.txt");
    write_summary_text(out, summary);
  }
  {
    auto km = open_out(dir / "km_by_missingness.csv");
    auto lr = open_out(dir / "logrank.csv");
    csv::write_row(km, {"source", "group", "time", "survival"});
    csv::write_row(lr, {"source", "n_present", "n_missing", "events_present", "events_missing", "statistic", "p_value"});
    for (std::size_t s = 0; s < S; ++s) {
      Outcomes present, missing;
      for (Index i = 0; i < cohort.n(); ++i) {
        (prof.block_missing(i, static_cast<Index>(s)) ? missing : present).push_back(cohort.outcomes[static_cast<std::size_t>(i)]);
      }
      const auto& id = cohort.manifest[s].id;
      for (const auto& [group, outcomes] : {std::pair{"present", &present}, std::pair{"missing", &missing}}) {
        if (outcomes->empty()) continue;
        const auto curve = kaplan_meier(*outcomes);
        csv::write_row(km, {id, group, csv::fmt(0.0), csv::fmt(1.0)});
        for (std::size_t k = 0; k < curve.times.size(); ++k) {
          csv::write_row(km, {id, group, csv::fmt(curve.times[k]), csv::fmt(curve.values[k])});
        }
      }
      auto events = [](const Outcomes& o) {
        return std::to_string(std::count_if(o.begin(), o.end(), [](const SurvivalOutcome& x) { return x.event; }));
      };
      std::string stat = "NA", p = "NA";
      if (!present.empty() && !missing.empty()) {
        const auto r = logrank_test(present, missing);
        stat = csv::fmt(r.statistic);
        p = csv::fmt(r.p_value);
      }
      csv::write_row(lr, {id, std::to_string(present.size()), std::to_string(missing.size()), events(present),
                          events(missing), stat, p});
    }
  }
  write_manifest(dir, {manifest_line("profile", c)});
}

// ---- fit / predict ---------------------------------------------------------

struct FitArgs {
  std::string out;
  std::string variant = "plain";
  std::string meta = "auto";
  std::string base = "coxnet,rsf,cwgb";
  bool no_indicator = false;
  bool naive = false;
  int inner_folds = 5;
  int knn_k = KnnImputer::kDefaultNeighbours;
};

MsbConfig config_of(const FitArgs& a, const Common& c) {
  MsbConfig cfg = MsbConfig::defaults(learner_seed(c));
  try {
    cfg.variant = parse_variant(a.variant);
    const std::string meta = a.meta == "auto" ? (cfg.variant == MsbVariant::Mia ? "rsf" : "cwgb") : a.meta;
    cfg.meta_spec = LearnerSpec::of(parse_learner_kind(meta));
    cfg.base_specs.clear();
    for (const auto& b : split(a.base, ',')) cfg.base_specs.push_back(LearnerSpec::of(parse_learner_kind(b)));
    cfg.include_missingness_indicator = !a.no_indicator;
    cfg.inner_folds = a.inner_folds;
    cfg.knn_neighbours = a.knn_k;
    cfg.jobs = c.jobs;
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void run_fit(const DataArgs& d, const FitArgs& a, const Common& c) {
  const MsbConfig cfg = config_of(a, c);
  const Cohort cohort = load(d, c);
  const FittedMSB model = a.naive ? train_naive_stack(cohort, cfg) : train_msb(cohort, cfg);
  print_warnings(model.warnings);
  fs::create_directories(parent_dir(a.out));
  save_msb_file(a.out, model);
  auto line = manifest_line("fit", c);
  line["active_sources"] = model.active_sources();
  line["meta_columns"] = model.columns.size();
  write_manifest(parent_dir(a.out), {line});
}

void run_predict(const DataArgs& d, const std::string& model_path, const std::string& out_path,
                 const std::string& times_text, const Common& c) {
  std::vector<double> times;
  for (const auto& t : split(times_text, ',')) {
    try {
      times.push_back(std::stod(t));
    } catch (const std::exception&) {
      throw UsageError("bad time '" + t + "' in --times");
    }
    if (!(times.back() >= 0.0)) throw UsageError("--times must be nonnegative");
  }
  const FittedMSB model = load_msb_file(model_path);
  const Cohort cohort = load(d, c);
  const MsbPrediction pred = predict_msb(model, cohort);
  fs::create_directories(parent_dir(out_path));
  auto out = open_out(out_path);
  std::vector<std::string> header = {"row", "risk"};
  for (double t : times) header.push_back("survival_" + csv::exact(t));
  csv::write_row(out, header);
  for (Index i = 0; i < cohort.n(); ++i) {
    std::vector<std::string> row = {std::to_string(i), csv::fmt(pred.risk[i])};
    for (double t : times) row.push_back(csv::fmt(pred.survival[static_cast<std::size_t>(i)](t)));
    csv::write_row(out, row);
  }
  write_manifest(parent_dir(out_path), {manifest_line("predict", c)});
}

// ---- evaluate / compare / benchmark -----------------------------------------

inline constexpr const char* kDefaultModels = "coxnet,cwgb,msb-plain-coxnet,msb-plain-cwgb,naive-plain-cwgb";

struct EvalArgs {
  std::string out;
  std::string models = kDefaultModels;
  int folds = 5;
  int repetitions = 3;
  int time_bins = 4;
  std::string early = "early";
  std::string late = "late";
};

CvPlan plan_of(const EvalArgs& a, const Common& c) {
  CvPlan plan;
  plan.folds = a.folds;
  plan.repetitions = a.repetitions;
  plan.time_bins = a.time_bins;
  plan.seed = fold_seed(c);
  try {
    plan.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return plan;
}

struct Evaluation {
  CvPlan plan;
  std::vector<BenchmarkModel> models;
  BenchmarkOptions options;
};

// everything checked here fails before any data is read
Evaluation prepare_evaluation(const EvalArgs& a, const Common& c) {
  Evaluation e;
  e.plan = plan_of(a, c);
  e.models = parse_models(a.models, learner_seed(c));
  e.options.early = parse_window(a.early);
  e.options.late = parse_window(a.late);
  e.options.jobs = c.jobs;
  return e;
}

ResultTable evaluate_into(const Cohort& cohort, const Evaluation& e, const std::string& out_dir) {
  const ResultTable table = run_benchmark(cohort, e.plan, e.models, e.options);
  print_warnings(table.warnings);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "results.csv");
    write_results_csv(out, table);
  }
  {
    auto out = open_out(dir / "summary.csv");
    write_summary_csv(out, table);
  }
  return table;
}

void run_evaluate(const DataArgs& d, const EvalArgs& a, const Common& c) {
  const Evaluation e = prepare_evaluation(a, c);
  const Cohort cohort = load(d, c);
  evaluate_into(cohort, e, a.out);
  write_manifest(a.out, {manifest_line("evaluate", c)});
}

std::vector<std::string> model_names(const ResultTable& table) {
  std::vector<std::string> names;
  for (const auto& r : table.rows) {
    if (std::find(names.begin(), names.end(), r.model) == names.end()) names.push_back(r.model);
  }
  return names;
}

void compare_into(const ResultTable& table, std::vector<std::pair<std::string, std::string>> pairs,
                  const fs::path& out_path) {
  if (pairs.empty()) pairs = default_pairs(model_names(table));
  if (pairs.empty()) throw UsageError("no model pairs to compare; pass --pairs msb_model:baseline");
  const auto comparisons = compare_models(table, pairs);
  auto out = open_out(out_path);
  write_comparison_csv(out, comparisons);
}

void run_compare(const std::string& results, const std::string& pairs, const std::string& out_path, const Common& c) {
  const auto explicit_pairs = parse_pairs(pairs);
  const ResultTable table = read_results_csv(results);
  fs::create_directories(parent_dir(out_path));
  compare_into(table, explicit_pairs, out_path);
  write_manifest(parent_dir(out_path), {manifest_line("compare", c)});
}

void run_benchmark_cmd(const SimulateArgs& s, const EvalArgs& a, const std::string& pairs, const Common& c) {
  const Evaluation e = prepare_evaluation(a, c);
  const auto explicit_pairs = parse_pairs(pairs);
  const SimResult sim = simulate_into(s, c);
  Cohort cohort = sim.cohort;
  if (c.strata_col.empty()) cohort.strata.clear();
  const ResultTable table = evaluate_into(cohort, e, a.out);
  compare_into(table, explicit_pairs, fs::path(a.out) / "comparison.csv");
  write_manifest(a.out, {manifest_line("simulate", c), manifest_line("evaluate", c), manifest_line("compare", c)});
}

// ---- importance ------------------------------------------------------------

struct ImportanceArgs {
  std::string model;
  std::string out;
  DataArgs train;
  std::string window = "late";
  int permutations = 20;
};

void run_importance(const DataArgs& d, const ImportanceArgs& a, const Common& c) {
  const IbsWindow window = parse_window(a.window);
  const FittedMSB model = load_msb_file(a.model);
  const Cohort test = load(d, c);
  Outcomes censoring = test.outcomes;
  if (!a.train.features.empty()) censoring = load(a.train, c).outcomes;
  const auto report = permutation_importance(model, test, window, a.permutations, censoring, importance_seed(c));
  fs::create_directories(parent_dir(a.out));
  auto out = open_out(a.out);
  write_importance_csv(out, report);
  write_manifest(parent_dir(a.out), {manifest_line("importance", c)});
}

void add_data_options(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--data", d.features, "Features CSV with outcome columns")->required();
  cmd->add_option("--manifest", d.manifest, "Manifest CSV: column_name, source_id, source_name")->required();
}

void add_eval_options(CLI::App* cmd, EvalArgs& e) {
  cmd->add_option("--out", e.out, "Output directory")->required();
  cmd->add_option("--models", e.models, "Comma-separated models: coxnet, rsf, cwgb, rsf-mia, "
                                        "msb-<imp|plain|mia>-<meta>, naive-<variant>-<meta>")
      ->capture_default_str();
  cmd->add_option("--folds", e.folds, "Cross-validation folds")->check(CLI::Range(2, 1000))->capture_default_str();
  cmd->add_option("--repetitions", e.repetitions, "Cross-validation repetitions")
      ->check(CLI::Range(1, 1000))
      ->capture_default_str();
  cmd->add_option("--time-bins", e.time_bins, "Quantile bins of time used for stratification")
      ->check(CLI::Range(1, 1000))
      ->capture_default_str();
  cmd->add_option("--early", e.early, "Early iBS window: early, late or start:end in days")->capture_default_str();
  cmd->add_option("--late", e.late, "Late iBS window")->capture_default_str();
}

std::vector<std::string> effective_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (!config.empty()) {
    const auto extra = config_tokens(config);
    args.insert(args.end(), extra.begin(), extra.end());
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal survival stacking with blockwise missing data"};
  app.name("msb");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common common;
  app.add_option("--seed", common.seed, "Master seed; every random stream derives from it")->capture_default_str();
  app.add_option("--jobs", common.jobs, "Worker threads; results do not depend on it")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  app.add_option("--time-col", common.time_col, "Observed time column")->capture_default_str();
  app.add_option("--event-col", common.event_col, "Event indicator column (1 = event)")->capture_default_str();
  app.add_option("--strata-col", common.strata_col, "Optional categorical column stratifying the folds");
  app.add_option("--config", common.config, "key = value file; its settings override flags");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic multimodal cohort");
  c_sim->add_option("--spec", sim.spec, "Simulation spec (key = value)");
  c_sim->add_option("--out", sim.out, "Output directory")->required();

  DataArgs prof_data;
  std::string prof_out;
  auto* c_prof = app.add_subcommand("profile", "Missingness report, block patterns, KM curves and log-rank tests");
  add_data_options(c_prof, prof_data);
  c_prof->add_option("--out", prof_out, "Output directory")->required();

  DataArgs fit_data;
  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Train a stacked model and save it as JSON");
  add_data_options(c_fit, fit_data);
  c_fit->add_option("--out", fit.out, "Model file")->required();
  c_fit->add_option("--variant", fit.variant, "imp, plain or mia")
      ->check(CLI::IsMember({"imp", "plain", "mia"}))
      ->capture_default_str();
  c_fit->add_option("--meta", fit.meta, "Meta-learner: coxnet, rsf, cwgb; auto = cwgb, or rsf for mia")
      ->check(CLI::IsMember({"auto", "coxnet", "rsf", "cwgb"}))
      ->capture_default_str();
  c_fit->add_option("--base", fit.base, "Comma-separated base learners")->capture_default_str();
  c_fit->add_flag("--no-indicator", fit.no_indicator, "Leave out the per-source missingness rates");
  c_fit->add_flag("--naive", fit.naive, "Resubstitution stacking instead of out-of-fold");
  c_fit->add_option("--inner-folds", fit.inner_folds, "Folds building the out-of-fold scores")
      ->check(CLI::Range(2, 1000))
      ->capture_default_str();
  c_fit->add_option("--knn-k", fit.knn_k, "Neighbours of the kNN imputers")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();

  DataArgs pred_data;
  std::string pred_model, pred_out, pred_times = "100,365,1000";
  auto* c_pred = app.add_subcommand("predict", "Risk scores and survival probabilities from a saved model");
  add_data_options(c_pred, pred_data);
  c_pred->add_option("--model", pred_model, "Model file written by fit")->required();
  c_pred->add_option("--out", pred_out, "Predictions CSV")->required();
  c_pred->add_option("--times", pred_times, "Comma-separated days for survival columns")->capture_default_str();

  DataArgs eval_data;
  EvalArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Repeated cross-validated benchmark of several models");
  add_data_options(c_eval, eval_data);
  add_eval_options(c_eval, eval);

  DataArgs imp_data;
  ImportanceArgs imp;
  auto* c_imp = app.add_subcommand("importance", "Permutation importance of the meta-learner inputs on iBSS");
  add_data_options(c_imp, imp_data);
  c_imp->add_option("--model", imp.model, "Model file written by fit")->required();
  c_imp->add_option("--out", imp.out, "Importance CSV")->required();
  auto* o_train = c_imp->add_option("--train-data", imp.train.features, "Training features CSV for the censoring KM");
  auto* o_train_m = c_imp->add_option("--train-manifest", imp.train.manifest, "Manifest of --train-data");
  o_train->needs(o_train_m);
  o_train_m->needs(o_train);
  c_imp->add_option("--window", imp.window, "early, late or start:end in days")->capture_default_str();
  c_imp->add_option("--permutations", imp.permutations, "Permutations per column")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();

  std::string cmp_results, cmp_pairs, cmp_out;
  auto* c_cmp = app.add_subcommand("compare", "Paired Wilcoxon tests with Benjamini-Hochberg adjustment");
  c_cmp->add_option("--results", cmp_results, "results.csv written by evaluate")->required();
  c_cmp->add_option("--out", cmp_out, "Comparison CSV")->required();
  c_cmp->add_option("--pairs", cmp_pairs, "msb_model:baseline,...; default pairs msb-*-<kind> with <kind>");

  SimulateArgs bench_sim;
  EvalArgs bench_eval;
  std::string bench_pairs;
  auto* c_bench = app.add_subcommand("benchmark", "simulate, evaluate and compare in one run");
  c_bench->add_option("--spec", bench_sim.spec, "Simulation spec (key = value)");
  add_eval_options(c_bench, bench_eval);
  c_bench->add_option("--pairs", bench_pairs, "Comparisons; default as in compare");

  try {
    common.args = effective_args(argc, argv);
    std::vector<std::string> reversed(common.args.rbegin(), common.args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  const bool seeded = app.get_option("--seed")->count() > 0;
  try {
    if (*c_sim) {
      sim.seeded = seeded;
      run_simulate(sim, common);
    } else if (*c_prof) {
      run_profile(prof_data, prof_out, common);
    } else if (*c_fit) {
      run_fit(fit_data, fit, common);
    } else if (*c_pred) {
      run_predict(pred_data, pred_model, pred_out, pred_times, common);
    } else if (*c_eval) {
      run_evaluate(eval_data, eval, common);
    } else if (*c_imp) {
      run_importance(imp_data, imp, common);
    } else if (*c_cmp) {
      run_compare(cmp_results, cmp_pairs, cmp_out, common);
    } else if (*c_bench) {
      bench_sim.out = bench_eval.out;
      bench_sim.seeded = seeded;
      run_benchmark_cmd(bench_sim, bench_eval, bench_pairs, common);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for more information.\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
