#include "msb/evaluation.hpp"

#include "msb/csv.hpp"
#include "msb/parallel.hpp"
#include "msb/random.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace msb {

void CvPlan::validate() const {
  if (folds < 2) throw DataError("cv plan: folds must be >= 2");
  if (repetitions < 1) throw DataError("cv plan: repetitions must be >= 1");
  if (time_bins < 1) throw DataError("cv plan: time bins must be >= 1");
}

namespace {

std::vector<int> time_bins(const Outcomes& y, int bins) {
  std::vector<double> t;
  for (const auto& o : y) t.push_back(o.time);
  std::vector<double> sorted = t;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts;
  for (int b = 1; b < bins; ++b) {
    const std::size_t pos = static_cast<std::size_t>(static_cast<double>(sorted.size()) * b / bins);
    cuts.push_back(sorted[std::min(pos, sorted.size() - 1)]);
  }
  std::vector<int> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    // bin = number of cut points <= t
    out[i] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), t[i]) - cuts.begin());
  }
  return out;
}

std::map<std::string, std::vector<Index>> strata_cells(const Cohort& cohort, const CvPlan& plan, int bins) {
  const auto bin = time_bins(cohort.outcomes, bins);
  std::map<std::string, std::vector<Index>> cells;
  for (Index i = 0; i < cohort.n(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    std::string key = std::to_string(bin[u]);
    if (plan.stratify_event) key += cohort.outcomes[u].event ? "|1" : "|0";
    if (plan.stratify_strata && !cohort.strata.empty()) key += "|" + cohort.strata[u];
    cells[key].push_back(i);
  }
  return cells;
}

}  // namespace

FoldPlan make_folds(const Cohort& cohort, const CvPlan& plan) {
  plan.validate();
  if (cohort.n() < plan.folds) throw DataError("make_folds: cohort smaller than the number of folds");
  FoldPlan out;
  int bins = plan.time_bins;
  auto cells = strata_cells(cohort, plan, bins);
  auto too_small = [&] {
    return std::any_of(cells.begin(), cells.end(),
                       [&](const auto& kv) { return kv.second.size() < static_cast<std::size_t>(plan.folds); });
  };
  if (too_small() && bins > 2) {
    out.warnings.push_back("stratification cells smaller than the fold count; time bins coarsened to 2");
    bins = 2;
    cells = strata_cells(cohort, plan, bins);
  }
  if (too_small()) out.warnings.push_back("some stratification cells remain smaller than the fold count");
  out.time_bins_used = bins;

  for (int r = 0; r < plan.repetitions; ++r) {
    Rng rng(derive_seed(plan.seed, static_cast<std::uint64_t>(r)));
    std::vector<int> label(static_cast<std::size_t>(cohort.n()));
    int dealer = 0;
    for (auto& [key, members] : cells) {
      std::vector<Index> m = members;
      shuffle(m, rng);
      for (Index i : m) {
        label[static_cast<std::size_t>(i)] = dealer;
        dealer = (dealer + 1) % plan.folds;
      }
    }
    std::vector<Fold> folds(static_cast<std::size_t>(plan.folds));
    for (Index i = 0; i < cohort.n(); ++i) {
      for (int f = 0; f < plan.folds; ++f) {
        (label[static_cast<std::size_t>(i)] == f ? folds[static_cast<std::size_t>(f)].test
                                                 : folds[static_cast<std::size_t>(f)].train)
            .push_back(i);
      }
    }
    out.repetitions.push_back(std::move(folds));
  }
  return out;
}

Matrix baseline_design(const Cohort& cohort) {
  const auto prof = missingness_profile(cohort);
  Matrix out(cohort.n(), cohort.p() + prof.rates.cols());
  out << cohort.features, prof.rates;
  return out;
}

MsbPrediction FittedBenchmarkModel::predict(const Cohort& cohort) const {
  if (stack) return predict_msb(*stack, cohort);
  MsbPrediction out;
  out.meta_input = baseline_design(cohort);
  if (imputer) out.meta_input = imputer->transform(out.meta_input);
  out.risk = learner.predict_risk(out.meta_input);
  out.survival = learner.predict_survival(out.meta_input, learner.event_times());
  return out;
}

namespace {

FittedBenchmarkModel fit_baseline(const BenchmarkModel& model, const Cohort& train, const Matrix* imputed,
                                  const KnnImputer* imputer) {
  FittedBenchmarkModel fit;
  fit.kind = ModelKind::Baseline;
  LearnerSpec spec = model.learner;
  if (model.baseline_mia) {
    if (spec.kind != LearnerKind::Rsf) throw DataError("baseline mia requires an rsf learner");
    spec.rsf.mia = true;
    fit.learner = fit_learner(spec, baseline_design(train), train.outcomes);
    return fit;
  }
  if (imputed && imputer) {
    fit.imputer = *imputer;
    fit.learner = fit_learner(spec, *imputed, train.outcomes);
    return fit;
  }
  KnnImputer imp(model.knn_neighbours);
  const Matrix x = imp.fit_transform(baseline_design(train));
  fit.imputer = std::move(imp);
  fit.learner = fit_learner(spec, x, train.outcomes);
  return fit;
}

std::string base_key(const MsbConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << (c.variant == MsbVariant::Imp) << '/' << c.inner_folds << '/' << c.knn_neighbours << '/' << c.seed;
  for (const auto& s : c.base_specs) {
    os << '|' << to_string(s.kind) << ',' << s.coxnet.alpha << ',' << s.coxnet.path_length << ','
       << s.coxnet.lambda_min_ratio << ',' << s.coxnet.cv_folds << ',' << s.coxnet.tolerance << ',' << s.coxnet.cv_tolerance << ',' << s.rsf.trees
       << ',' << s.rsf.min_samples << ',' << s.rsf.min_events << ',' << s.rsf.mtry << ',' << s.cwgb.rounds << ','
       << s.cwgb.learning_rate;
  }
  return os.str();
}

}  // namespace

namespace {

std::string family_of(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::Coxnet:
      return "Linear";
    case LearnerKind::Rsf:
      return "Forest";
    default:
      return "Boosting";
  }
}

std::vector<std::string> split_dash(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find('-', start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

BenchmarkModel named_model(const std::string& name, std::uint64_t seed) {
  BenchmarkModel m;
  m.name = name;
  const auto parts = split_dash(name);
  if (parts.size() == 1 || (parts.size() == 2 && parts[0] == "rsf" && parts[1] == "mia")) {
    m.kind = ModelKind::Baseline;
    m.learner = LearnerSpec::of(parse_learner_kind(parts[0]), seed);
    m.baseline_mia = parts.size() == 2;
    m.family = family_of(m.learner.kind);
    return m;
  }
  if (parts.size() != 3 || (parts[0] != "msb" && parts[0] != "naive")) {
    throw DataError("unknown model '" + name + "'");
  }
  m.kind = parts[0] == "msb" ? ModelKind::Msb : ModelKind::Naive;
  m.msb = MsbConfig::defaults(seed);
  m.msb.variant = parse_variant(parts[1]);
  m.msb.meta_spec = LearnerSpec::of(parse_learner_kind(parts[2]));
  m.msb.validate();
  m.family = family_of(m.msb.meta_spec.kind);
  return m;
}

std::vector<std::pair<std::string, std::string>> default_pairs(const std::vector<std::string>& models) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& name : models) {
    const auto parts = split_dash(name);
    if (parts.size() != 3 || parts[0] != "msb") continue;
    if (std::find(models.begin(), models.end(), parts[2]) != models.end()) pairs.emplace_back(name, parts[2]);
  }
  return pairs;
}

FittedBenchmarkModel fit_benchmark_model(const BenchmarkModel& model, const Cohort& train) {
  if (model.kind == ModelKind::Baseline) return fit_baseline(model, train, nullptr, nullptr);
  FittedBenchmarkModel fit;
  fit.kind = model.kind;
  fit.stack = model.kind == ModelKind::Msb ? train_msb(train, model.msb) : train_naive_stack(train, model.msb);
  return fit;
}

namespace {

struct CellMetrics {
  double c = kMissing, early = kMissing, late = kMissing;
};

CellMetrics score_cell(const MsbPrediction& pred, const Outcomes& y, const StepCurve& g, double last_event,
                       const BenchmarkOptions& opt) {
  CellMetrics m;
  m.c = c_index(y, pred.risk);
  m.early = integrated_brier_truncated(y, pred.survival, opt.early, g, last_event).value;
  m.late = integrated_brier_truncated(y, pred.survival, opt.late, g, last_event).value;
  return m;
}

}  // namespace

ResultTable run_benchmark(const Cohort& cohort, const CvPlan& plan, const std::vector<BenchmarkModel>& models,
                          const BenchmarkOptions& options) {
  if (models.empty()) throw DataError("run_benchmark: no models");
  cohort.validate();
  const FoldPlan folds = make_folds(cohort, plan);
  ResultTable table;
  table.warnings = folds.warnings;

  const std::size_t R = folds.repetitions.size();
  const std::size_t F = static_cast<std::size_t>(plan.folds);
  const std::size_t M = models.size();
  std::vector<ResultRow> rows(M * R * F);
  std::vector<std::vector<std::string>> cell_warnings(R * F);

  parallel_for(R * F, options.jobs, [&](std::size_t cell) {
    const std::size_t r = cell / F, f = cell % F;
    const Fold& fold = folds.repetitions[r][f];
    const Cohort train = cohort.subset(fold.train);
    const Cohort test = cohort.subset(fold.test);
    const StepCurve g = censoring_km(train.outcomes);
    const EventTable tab = event_table(train.outcomes);
    const double last_event = tab.times.empty() ? 0.0 : tab.times.back();

    std::map<std::string, BaseLayer> layers;
    std::map<int, std::pair<KnnImputer, Matrix>> imputed;
    for (std::size_t m = 0; m < M; ++m) {
      const BenchmarkModel& spec = models[m];
      ResultRow& row = rows[m * R * F + cell];
      row.model = spec.name;
      row.family = spec.family;
      row.repetition = static_cast<int>(r);
      row.fold = static_cast<int>(f);
      try {
        FittedBenchmarkModel fit;
        if (spec.kind == ModelKind::Baseline) {
          if (spec.baseline_mia) {
            fit = fit_baseline(spec, train, nullptr, nullptr);
          } else {
            auto it = imputed.find(spec.knn_neighbours);
            if (it == imputed.end()) {
              KnnImputer imp(spec.knn_neighbours);
              Matrix x = imp.fit_transform(baseline_design(train));
              it = imputed.emplace(spec.knn_neighbours, std::make_pair(std::move(imp), std::move(x))).first;
            }
            fit = fit_baseline(spec, train, &it->second.second, &it->second.first);
          }
        } else {
          const std::string key = base_key(spec.msb);
          auto it = layers.find(key);
          if (it == layers.end()) it = layers.emplace(key, build_base_layer(train, spec.msb, true)).first;
          fit.kind = spec.kind;
          fit.stack = fit_meta_learner(train, spec.msb, it->second, spec.kind == ModelKind::Naive);
          for (const auto& w : fit.stack->warnings) cell_warnings[cell].push_back(spec.name + ": " + w);
        }
        const CellMetrics tr = score_cell(fit.predict(train), train.outcomes, g, last_event, options);
        const CellMetrics te = score_cell(fit.predict(test), test.outcomes, g, last_event, options);
        row.train_c = tr.c;
        row.test_c = te.c;
        row.train_ibs_early = tr.early;
        row.test_ibs_early = te.early;
        row.train_ibs_late = tr.late;
        row.test_ibs_late = te.late;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  });
  table.rows = std::move(rows);
  for (std::size_t cell = 0; cell < cell_warnings.size(); ++cell) {
    for (const auto& w : cell_warnings[cell]) {
      table.warnings.push_back("rep " + std::to_string(cell / F) + " fold " + std::to_string(cell % F) + ": " + w);
    }
  }
  return table;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> deltas) {
  std::vector<double> d;
  for (double v : deltas) {
    if (is_missing(v)) throw DataError("wilcoxon: missing delta");
    if (v != 0.0) d.push_back(v);
  }
  if (d.empty()) throw DataError("wilcoxon: all deltas are zero");
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  // doubled midranks are integers
  std::vector<long long> rank2(n);
  double tie_term = 0.0;
  std::size_t k = 0;
  while (k < n) {
    std::size_t j = k;
    while (j < n && std::abs(d[order[j]]) == std::abs(d[order[k]])) ++j;
    const long long twice_mid = static_cast<long long>(k + 1 + j);  // 2 * (k+1 + j) / 2
    for (std::size_t q = k; q < j; ++q) rank2[order[q]] = twice_mid;
    const double t = static_cast<double>(j - k);
    tie_term += t * t * t - t;
    k = j;
  }
  WilcoxonResult res;
  res.n = n;
  long long plus2 = 0, minus2 = 0;
  for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? plus2 : minus2) += rank2[i];
  res.w_plus = static_cast<double>(plus2) / 2.0;
  res.w_minus = static_cast<double>(minus2) / 2.0;
  res.w = res.w_minus;
  const long long small2 = std::min(plus2, minus2);

  if (n <= 25) {
    res.exact = true;
    const long long total2 = plus2 + minus2;
    std::vector<double> count(static_cast<std::size_t>(total2 + 1), 0.0);
    count[0] = 1.0;
    long long reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (long long s = reach; s >= 0; --s) {
        if (count[static_cast<std::size_t>(s)] != 0.0) count[static_cast<std::size_t>(s + rank2[i])] += count[static_cast<std::size_t>(s)];
      }
      reach += rank2[i];
    }
    double below = 0.0;
    for (long long s = 0; s <= small2; ++s) below += count[static_cast<std::size_t>(s)];
    res.p_value = std::min(1.0, 2.0 * below / std::ldexp(1.0, static_cast<int>(n)));
  } else {
    res.exact = false;
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double small = static_cast<double>(small2) / 2.0;
    const double z = std::min(0.0, small - mean + 0.5) / std::sqrt(var);
    res.p_value = std::min(1.0, std::erfc(-z / std::sqrt(2.0)));
  }
  return res;
}

std::vector<double> benjamini_hochberg(std::span<const double> p) {
  const std::size_t m = p.size();
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("benjamini_hochberg: p-values must lie in [0, 1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adj(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const double v = p[order[r]] * (static_cast<double>(m) / static_cast<double>(r + 1));
    running = std::min(running, v);
    adj[order[r]] = std::min(1.0, running);
  }
  return adj;
}

double generalization_gap(const ResultTable& table, const std::string& model, std::vector<std::string>* warnings) {
  double tr = 0.0, te = 0.0;
  std::size_t used = 0, present = 0;
  for (const auto& row : table.rows) {
    if (row.model != model) continue;
    ++present;
    if (!row.error.empty() || is_missing(row.train_c) || is_missing(row.test_c)) {
      if (warnings) warnings->push_back(model + ": rep " + std::to_string(row.repetition) + " fold " +
                                        std::to_string(row.fold) + " excluded");
      continue;
    }
    tr += row.train_c;
    te += row.test_c;
    ++used;
  }
  if (present == 0) throw DataError("generalization_gap: model '" + model + "' not in table");
  if (used == 0) throw DataError("generalization_gap: no successful cells for '" + model + "'");
  return (tr - te) / static_cast<double>(used);
}

std::vector<Comparison> compare_models(const ResultTable& table,
                                       const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<Comparison> out;
  for (const auto& [msb_name, base_name] : pairs) {
    std::map<std::pair<int, int>, double> msb_c, base_c;
    for (const auto& row : table.rows) {
      if (!row.error.empty() || is_missing(row.test_c)) continue;
      if (row.model == msb_name) msb_c[{row.repetition, row.fold}] = row.test_c;
      if (row.model == base_name) base_c[{row.repetition, row.fold}] = row.test_c;
    }
    std::vector<double> deltas;
    double base_sum = 0.0;
    for (const auto& [key, v] : msb_c) {
      auto it = base_c.find(key);
      if (it == base_c.end()) continue;
      deltas.push_back(v - it->second);
      base_sum += it->second;
    }
    if (deltas.empty()) throw DataError("compare: no paired cells for " + msb_name + " vs " + base_name);
    Comparison c;
    c.msb_model = msb_name;
    c.baseline_model = base_name;
    c.delta_c = std::accumulate(deltas.begin(), deltas.end(), 0.0) / static_cast<double>(deltas.size());
    c.baseline_c = base_sum / static_cast<double>(deltas.size());
    c.test = wilcoxon_signed_rank(deltas);
    out.push_back(std::move(c));
  }
  std::vector<double> p;
  for (const auto& c : out) p.push_back(c.test.p_value);
  const auto adj = benjamini_hochberg(p);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].adjusted_p = adj[i];
  return out;
}

void write_results_csv(std::ostream& out, const ResultTable& table) {
  csv::write_row(out, {"model", "family", "repetition", "fold", "train_c_index", "test_c_index", "train_ibs_early",
                       "test_ibs_early", "train_ibs_late", "test_ibs_late", "error"});
  for (const auto& r : table.rows) {
    csv::write_row(out, {r.model, r.family, std::to_string(r.repetition), std::to_string(r.fold), csv::fmt(r.train_c),
                         csv::fmt(r.test_c), csv::fmt(r.train_ibs_early), csv::fmt(r.test_ibs_early),
                         csv::fmt(r.train_ibs_late), csv::fmt(r.test_ibs_late), r.error});
  }
}

ResultTable read_results_csv(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  auto col = [&](const char* name) {
    const int c = t.column(name);
    if (c < 0) throw DataError(path + ": missing column " + name);
    return static_cast<std::size_t>(c);
  };
  auto num = [](const std::string& s) { return s == "NA" || s.empty() ? kMissing : std::stod(s); };
  const std::size_t model = col("model"), family = col("family"), rep = col("repetition"), fold = col("fold"),
                    trc = col("train_c_index"), tec = col("test_c_index"), tre = col("train_ibs_early"),
                    tee = col("test_ibs_early"), trl = col("train_ibs_late"), tel = col("test_ibs_late"),
                    err = col("error");
  ResultTable table;
  for (const auto& row : t.rows) {
    ResultRow r;
    r.model = row[model];
    r.family = row[family];
    r.repetition = std::stoi(row[rep]);
    r.fold = std::stoi(row[fold]);
    r.train_c = num(row[trc]);
    r.test_c = num(row[tec]);
    r.train_ibs_early = num(row[tre]);
    r.test_ibs_early = num(row[tee]);
    r.train_ibs_late = num(row[trl]);
    r.test_ibs_late = num(row[tel]);
    r.error = row[err];
    table.rows.push_back(std::move(r));
  }
  return table;
}

namespace {

std::string mean_sd(const std::vector<double>& v) {
  if (v.empty()) return "NA";
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return csv::fmt(mean) + " ± " + csv::fmt(sd);
}

}  // namespace

void write_summary_csv(std::ostream& out, const ResultTable& table) {
  csv::write_row(out, {"Model Family", "Model", "Dataset", "C-index (± SD)", "iBS Early", "iBS Late", "Failed folds"});
  std::vector<std::string> order;
  for (const auto& r : table.rows) {
    if (std::find(order.begin(), order.end(), r.model) == order.end()) order.push_back(r.model);
  }
  for (const auto& name : order) {
    std::string family;
    std::vector<double> c[2], e[2], l[2];
    int failed = 0;
    for (const auto& r : table.rows) {
      if (r.model != name) continue;
      family = r.family;
      if (!r.error.empty()) {
        ++failed;
        continue;
      }
      auto push = [](std::vector<double>& v, double x) {
        if (!is_missing(x)) v.push_back(x);
      };
      push(c[0], r.test_c);
      push(c[1], r.train_c);
      push(e[0], r.test_ibs_early);
      push(e[1], r.train_ibs_early);
      push(l[0], r.test_ibs_late);
      push(l[1], r.train_ibs_late);
    }
    for (int d = 0; d < 2; ++d) {
      csv::write_row(out, {family, name, d == 0 ? "test" : "train", mean_sd(c[d]), mean_sd(e[d]), mean_sd(l[d]),
                           std::to_string(failed)});
    }
  }
}

void write_comparison_csv(std::ostream& out, const std::vector<Comparison>& comparisons) {
  csv::write_row(out, {"Comparison", "Delta C-index", "Delta %", "W-stat", "p-value", "Adj. p", "n"});
  for (const auto& c : comparisons) {
    const double pct = c.baseline_c != 0.0 ? 100.0 * c.delta_c / c.baseline_c : kMissing;
    csv::write_row(out, {c.msb_model + " vs " + c.baseline_model, csv::fmt(c.delta_c), csv::fmt(pct),
                         csv::fmt(c.test.w), csv::fmt(c.test.p_value), csv::fmt(c.adjusted_p),
                         std::to_string(c.test.n)});
  }
}

}  // namespace msb
