// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 5 7        run a subset

#include "msb/coxnet.hpp"
#include "msb/csv.hpp"
#include "msb/evaluation.hpp"
#include "msb/metrics.hpp"
#include "msb/rsf.hpp"
#include "msb/simulator.hpp"

#include "oracles.hpp"
#include "scratch.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace msb;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1: metric oracles -----------------------------------------------------

StepCurve flat(double v) { return StepCurve{{0.5}, {v}, 1.0}; }

Verdict metric_oracles() {
  Rng rng(20250101);
  int exact = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + uniform_index(rng, 29);
    auto y = oracle::random_outcomes(rng, n, 6, 0.6);
    y[0] = {0.5, true};
    std::vector<double> risk(n);
    for (auto& r : risk) r = static_cast<double>(uniform_index(rng, 5));
    exact += c_index(y, risk) == oracle::c_index(y, risk);
  }

  // ten patients at times 1..10, censored at 2, 5, 7 and 10; predicted S = i / 10
  Outcomes y;
  for (int i = 1; i <= 10; ++i) y.push_back({static_cast<double>(i), !(i == 2 || i == 5 || i == 7 || i == 10)});
  std::vector<StepCurve> curves;
  for (int i = 1; i <= 10; ++i) curves.push_back(flat(0.1 * i));
  const StepCurve g = censoring_km(y);
  const double b1 = brier(y, curves, 5.5, g), b2 = brier(y, curves, 9.5, g);
  const double ibs = integrated_brier(y, curves, IbsWindow{5.5, 9.5, 2}, g);
  const double err = std::max({std::abs(b1 - 0.069625), std::abs(b2 - 0.338725), std::abs(ibs - 0.204175)});
  const bool skill = ibss(0.25) == 0.0 && ibss(0.0) == 1.0;

  Verdict v;
  v.pass = exact == 100 && err <= 1e-10 && skill;
  v.detail = "c-index exact on " + std::to_string(exact) + "/100, brier/iBS max error " + fmt("%.1e", err) +
             ", ibss(0.25)=" + fmt("%g", ibss(0.25)) + " ibss(0)=" + fmt("%g", ibss(0.0));
  return v;
}

// ---- 2: optimizer ------------------------------------------------------------

Verdict optimizer() {
  Rng rng(20250202);
  double worst_kkt = 0.0, worst_rel = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 50, p = 10;
    Matrix x(n, p);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = oracle::normal(rng);
    Vector truth = Vector::Zero(p);
    for (Index j = 0; j < 3; ++j) truth[j] = 0.8 * oracle::normal(rng);
    const Vector lp = x * truth;
    Outcomes y;
    for (Index i = 0; i < n; ++i) {
      const double t = -std::log(uniform_open(rng)) * std::exp(-lp[i]);
      const double c = -std::log(uniform_open(rng)) * 1.5;
      y.push_back({std::ceil(std::min(t, c) * 20.0), t <= c});
    }
    const Matrix xs = Standardizer::fit(x).apply(x);
    const double alpha = 0.5;
    ElasticNetCoxSolver solver(xs, y, alpha);
    Vector beta = Vector::Zero(p);
    for (double lambda : lambda_path(solver.lambda_max(), 20, 0.01)) {
      solver.solve(lambda, beta);
      const Vector g = cox_gradient(solver.problem(), xs, beta);
      for (Index j = 0; j < p; ++j) {
        const double smooth = g[j] + lambda * (1.0 - alpha) * beta[j];
        const double viol = beta[j] == 0.0 ? std::abs(smooth) - lambda * alpha
                                           : std::abs(smooth + lambda * alpha * (beta[j] > 0 ? 1.0 : -1.0));
        worst_kkt = std::max(worst_kkt, viol);
      }
    }

    Vector b(p);
    for (Index j = 0; j < p; ++j) b[j] = 0.5 * oracle::normal(rng);
    const Vector grad = cox_gradient(solver.problem(), xs, b);
    for (Index j = 0; j < p; ++j) {
      const double h = 1e-5;
      Vector up = b, down = b;
      up[j] += h;
      down[j] -= h;
      const double fd =
          (solver.problem().loss(xs * up) - solver.problem().loss(xs * down)) / (2.0 * h * static_cast<double>(n));
      worst_rel = std::max(worst_rel, std::abs(fd - grad[j]) / std::max(std::abs(grad[j]), 1e-3));
    }
  }
  return {worst_kkt <= 1e-5 && worst_rel <= 1e-4,
          "max subgradient violation " + fmt("%.2e", worst_kkt) + " over 20 paths, max gradient relative error " +
              fmt("%.2e", worst_rel)};
}

// ---- 3: MIA routing ------------------------------------------------------------

double routing_statistic(const std::vector<double>& v, const Outcomes& y, double threshold, MissingRoute route) {
  Outcomes l, r;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool left = std::isnan(v[i]) ? route != MissingRoute::Right
                                       : route != MissingRoute::Separate && v[i] <= threshold;
    (left ? l : r).push_back(y[i]);
  }
  auto events = [](const Outcomes& g) { return std::any_of(g.begin(), g.end(), [](auto& o) { return o.event; }); };
  if (!events(l) || !events(r)) return -1.0;
  return oracle::logrank(l, r);
}

Verdict mia_routing() {
  Rng rng(20250303);
  int agree = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 2 + uniform_index(rng, 7);
    std::vector<double> v(n);
    Outcomes y(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = uniform_open(rng) < 0.3 ? kMissing : static_cast<double>(uniform_index(rng, 5));
      y[i] = {1.0 + static_cast<double>(uniform_index(rng, 6)), uniform_open(rng) < 0.7};
    }
    const double threshold = 1.5 + static_cast<double>(uniform_index(rng, 2));
    double best = -1.0;
    for (MissingRoute r : {MissingRoute::Left, MissingRoute::Right, MissingRoute::Separate}) {
      best = std::max(best, routing_statistic(v, y, threshold, r));
    }
    const auto got = split_mia(v, threshold, y);
    if (best < 0.0) {
      agree += !got;
    } else if (got) {
      const double tol = 1e-9 * std::max(1.0, best);
      agree += std::abs(routing_statistic(v, y, threshold, got->route) - best) <= tol &&
               std::abs(got->statistic - best) <= tol;
    }
  }
  return {agree == 500, std::to_string(agree) + "/500 nodes agree with enumeration"};
}

// ---- 4: leakage audit ----------------------------------------------------------

Verdict leakage() {
  int cells = 0, bad = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SimSpec spec;
    spec.n = 150;
    spec.source_sizes = {8, 40, 12, 5, 3, 30, 20, 25};
    spec.seed = seed;
    spec.missing.assign(spec.sources(), MissingMechanism::parse("mcar:0.4"));
    const auto sim = simulate(spec);
    auto cfg = MsbConfig::defaults(seed);
    for (auto& s : cfg.base_specs) s.rsf.trees = 20;
    MsbAudit audit;
    const auto layer = build_base_layer(sim.cohort, cfg, true, &audit);
    const Matrix& z = layer.oof_scores.values;
    Eigen::MatrixXi produced = Eigen::MatrixXi::Zero(z.rows(), z.cols());
    const std::size_t M = cfg.base_specs.size();
    for (const auto& rec : audit.folds) {
      const std::set<Index> train(rec.train_rows.begin(), rec.train_rows.end());
      for (Index i : rec.predicted_rows) {
        bad += train.count(i) > 0;
        produced(i, static_cast<Index>(rec.source * M + rec.model)) += 1;
      }
    }
    for (Index i = 0; i < z.rows(); ++i) {
      for (Index j = 0; j < static_cast<Index>(layer.oof_scores.score_columns()); ++j) {
        if (is_missing(z(i, j))) continue;
        ++cells;
        bad += produced(i, j) != 1;
      }
    }
  }
  return {bad == 0 && cells > 0,
          std::to_string(cells) + " out-of-fold cells audited over 5 seeds, " + std::to_string(bad) + " violations"};
}

// ---- 5 and 6: synthetic benchmark ----------------------------------------------

constexpr const char* kVariant = "plain";

SimSpec benchmark_spec(std::uint64_t seed) {
  SimSpec spec;  // n = 500, eight sources, signal in three
  spec.seed = seed;
  // weak signal spread over every feature of a signal source, no shared factor:
  // the concatenated lasso cannot pick it up, per-source scores can
  spec.signal_features = 40;
  spec.rho = 0.0;
  spec.missing.assign(spec.sources(), MissingMechanism::parse("mcar:0.4"));
  return spec;
}

struct SeedResult {
  std::map<std::string, double> test_c;
  std::map<std::string, double> gap;
  ResultTable table;
};

SeedResult run_seed(std::uint64_t seed, int repetitions) {
  const std::string v = kVariant;
  std::vector<BenchmarkModel> models;
  for (const auto& name :
       std::vector<std::string>{"coxnet", "cwgb", "msb-" + v + "-coxnet", "msb-" + v + "-cwgb", "naive-" + v + "-cwgb"}) {
    models.push_back(named_model(name, derive_seed(seed, "learners")));
  }
  CvPlan plan;
  plan.repetitions = repetitions;
  plan.seed = derive_seed(seed, "folds");
  SeedResult r;
  r.table = run_benchmark(simulate(benchmark_spec(seed)).cohort, plan, models);
  for (const auto& m : models) {
    double sum = 0.0;
    int k = 0;
    for (const auto& row : r.table.rows) {
      if (row.model == m.name && row.error.empty()) {
        sum += row.test_c;
        ++k;
      }
    }
    r.test_c[m.name] = k ? sum / k : kMissing;
    r.gap[m.name] = generalization_gap(r.table, m.name);
  }
  return r;
}

std::vector<SeedResult> g_seeds;  // shared by criteria 5 and 6

const std::vector<SeedResult>& synthetic_runs() {
  if (g_seeds.empty()) {
    // seed 0 runs the full 3 x 5 plan, which criterion 6 tests; the rest 1 x 5
    for (std::uint64_t seed = 0; seed < 10; ++seed) g_seeds.push_back(run_seed(seed, seed == 0 ? 3 : 1));
  }
  return g_seeds;
}

Verdict stacking_benchmark() {
  const std::string v = kVariant;
  const std::string msb_cox = "msb-" + v + "-coxnet", msb_gb = "msb-" + v + "-cwgb", naive = "naive-" + v + "-cwgb";
  int a_wins = 0, c_wins = 0;
  double msb_gb_mean = 0.0, gb_mean = 0.0, d_cox = 0.0, msb_gap = 0.0, naive_gap = 0.0;
  const auto& runs = synthetic_runs();
  for (const auto& r : runs) {
    a_wins += r.test_c.at(msb_cox) > r.test_c.at("coxnet");
    c_wins += r.gap.at(msb_gb) < r.gap.at(naive);
    d_cox += (r.test_c.at(msb_cox) - r.test_c.at("coxnet")) / 10.0;
    msb_gb_mean += r.test_c.at(msb_gb) / 10.0;
    gb_mean += r.test_c.at("cwgb") / 10.0;
    msb_gap += r.gap.at(msb_gb) / 10.0;
    naive_gap += r.gap.at(naive) / 10.0;
  }
  const bool a = a_wins >= 9, b = msb_gb_mean >= gb_mean, c = c_wins >= 8;
  std::ostringstream os;
  os << "(a) " << (a ? "ok" : "miss") << " MSB-CoxNet beats CoxNet in " << a_wins << "/10 seeds, mean delta "
     << fmt("%+.4f", d_cox) << "; (b) " << (b ? "ok" : "miss") << " MSB-CWGB " << fmt("%.4f", msb_gb_mean)
     << " vs CWGB " << fmt("%.4f", gb_mean) << "; (c) " << (c ? "ok" : "miss") << " gap below naive in " << c_wins
     << "/10 seeds, mean gap " << fmt("%.3f", msb_gap) << " vs " << fmt("%.3f", naive_gap);
  return {a && b && c, os.str()};
}

Verdict significance() {
  const std::string v = kVariant;
  const auto& seed0 = synthetic_runs().front();
  const auto cmp = compare_models(seed0.table, {{"msb-" + v + "-coxnet", "coxnet"}, {"msb-" + v + "-cwgb", "cwgb"}});
  const bool a = cmp[0].adjusted_p < 0.05;

  // exact null distribution against enumeration of all sign patterns
  Rng rng(20250606);
  double worst = 0.0;
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 1 + uniform_index(rng, 10);
    std::vector<double> d(n);
    for (auto& x : d) x = (static_cast<double>(uniform_index(rng, 9)) - 4.0) / 10.0;
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) continue;
    std::vector<double> nz;
    for (double x : d) {
      if (x != 0.0) nz.push_back(x);
    }
    std::vector<double> rank(nz.size());
    double total = 0.0, plus = 0.0;
    for (std::size_t i = 0; i < nz.size(); ++i) {
      double below = 0, equal = 0;
      for (double y : nz) {
        below += std::abs(y) < std::abs(nz[i]);
        equal += std::abs(y) == std::abs(nz[i]);
      }
      rank[i] = below + (equal + 1) / 2.0;
      total += rank[i];
      if (nz[i] > 0) plus += rank[i];
    }
    const double observed = std::min(plus, total - plus);
    double hits = 0;
    for (std::uint64_t mask = 0; mask < (1ULL << nz.size()); ++mask) {
      double s = 0;
      for (std::size_t i = 0; i < nz.size(); ++i) s += (mask >> i & 1) ? rank[i] : 0.0;
      hits += std::min(s, total - s) <= observed + 1e-9;
    }
    const double expected = std::min(1.0, hits / static_cast<double>(1ULL << nz.size()));
    worst = std::max(worst, std::abs(wilcoxon_signed_rank(d).p_value - expected));
  }

  // hand-computed adjustments
  const std::vector<std::pair<std::vector<double>, std::vector<double>>> bh = {
      {{0.01}, {0.01}},
      {{0.01, 0.04}, {0.02, 0.04}},
      {{0.04, 0.01}, {0.04, 0.02}},
      {{0.01, 0.02, 0.03}, {0.03, 0.03, 0.03}},
      {{0.5, 0.5}, {0.5, 0.5}},
      {{0.001, 0.008, 0.039, 0.041, 0.042, 0.06, 0.0735, 0.205, 0.212, 0.216},
       {0.01, 0.04, 0.084, 0.084, 0.084, 0.1, 0.105, 0.216, 0.216, 0.216}},
      {{0.9, 0.8, 0.7, 0.6}, {0.9, 0.9, 0.9, 0.9}},
      {{0.02, 0.5, 0.02, 0.04}, {0.04, 0.5, 0.04, 0.05333333333333333}},
      {{0.0, 1.0}, {0.0, 1.0}},
      {{0.25, 0.125, 0.5, 0.0625}, {0.333333333333333333, 0.25, 0.5, 0.25}},
  };
  int bh_ok = 0;
  for (const auto& [p, expected] : bh) {
    const auto got = benjamini_hochberg(p);
    bool same = got.size() == expected.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) same = got[i] == expected[i];
    bh_ok += same;
  }
  const bool b = worst <= 1e-12, c = bh_ok == static_cast<int>(bh.size());
  std::ostringstream os;
  os << "MSB-CoxNet vs CoxNet over " << cmp[0].test.n << " folds: W=" << cmp[0].test.w << " adjusted p="
     << fmt("%.4g", cmp[0].adjusted_p) << (a ? " ok" : " miss") << "; exact p max error " << fmt("%.1e", worst)
     << "; BH " << bh_ok << "/" << bh.size() << " vectors exact";
  return {a && b && c, os.str()};
}

// ---- 7: importance -------------------------------------------------------------

Verdict importance() {
  int argmax_signal = 0, rate_ok = 0;
  double worst_ratio = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SimSpec spec = benchmark_spec(100 + seed);
    const auto sim = simulate(spec);
    const Cohort& c = sim.cohort;
    std::vector<Index> order(static_cast<std::size_t>(c.n()));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(derive_seed(seed, "split"));
    shuffle(order, rng);
    const std::size_t cut = order.size() * 7 / 10;
    const std::vector<Index> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
    const std::vector<Index> test_rows(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
    const Cohort train = c.subset(train_rows), test = c.subset(test_rows);

    auto cfg = MsbConfig::defaults(derive_seed(seed, "learners"));
    cfg.variant = parse_variant(kVariant);
    const auto model = train_msb(train, cfg);
    const auto report =
        permutation_importance(model, test, IbsWindow::late(), 20, train.outcomes, derive_seed(seed, "importance"));

    const auto& sources = spec.signal_sources;
    const std::set<std::size_t> signal(sources.begin(), sources.end());
    std::size_t best = 0;
    double max_signal_sd = 0.0, max_rate = 0.0;
    for (std::size_t k = 0; k < report.entries.size(); ++k) {
      const auto& e = report.entries[k];
      if (e.importance > report.entries[best].importance) best = k;
      if (!e.is_rate && signal.count(e.source)) max_signal_sd = std::max(max_signal_sd, e.sd);
      if (e.is_rate) max_rate = std::max(max_rate, std::abs(e.importance));
    }
    const auto& top = report.entries[best];
    argmax_signal += !top.is_rate && signal.count(top.source) > 0;
    rate_ok += max_rate < 10.0 * max_signal_sd;
    if (max_signal_sd > 0.0) worst_ratio = std::max(worst_ratio, max_rate / max_signal_sd);
  }
  return {argmax_signal >= 8 && rate_ok == 10,
          "argmax in a signal source in " + std::to_string(argmax_signal) + "/10 seeds; rate importance below 10 sd in " +
              std::to_string(rate_ok) + "/10 (worst ratio " + fmt("%.2f", worst_ratio) + ")"};
}

// ---- 8: missingness diagnostics --------------------------------------------------

double logrank_p(const SimSpec& spec, std::size_t source) {
  const auto sim = simulate(spec);
  const auto prof = missingness_profile(sim.cohort);
  Outcomes present, missing;
  for (Index i = 0; i < sim.cohort.n(); ++i) {
    (prof.block_missing(i, static_cast<Index>(source)) ? missing : present)
        .push_back(sim.cohort.outcomes[static_cast<std::size_t>(i)]);
  }
  return logrank_test(present, missing).p_value;
}

Verdict diagnostics() {
  const std::size_t source = 2;
  std::vector<double> p_mcar;
  int prognostic_hits = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    SimSpec spec;
    spec.seed = 5000 + seed;
    spec.missing.assign(spec.sources(), MissingMechanism{});
    spec.missing[source] = MissingMechanism::parse("mcar:0.4");
    p_mcar.push_back(logrank_p(spec, source));
    spec.missing[source] = MissingMechanism::parse("prognostic:0.4:2");
    prognostic_hits += logrank_p(spec, source) < 0.05;
  }
  std::sort(p_mcar.begin(), p_mcar.end());
  double ks = 0.0;
  const double m = static_cast<double>(p_mcar.size());
  for (std::size_t i = 0; i < p_mcar.size(); ++i) {
    ks = std::max({ks, static_cast<double>(i + 1) / m - p_mcar[i], p_mcar[i] - static_cast<double>(i) / m});
  }
  const double critical = 1.628 / std::sqrt(m);  // 1% level, asymptotic
  return {ks < critical && prognostic_hits >= 160,
          "MCAR KS D=" + fmt("%.4f", ks) + " (1% critical " + fmt("%.4f", critical) + "); prognostic p<0.05 in " +
              std::to_string(prognostic_hits) + "/200 seeds"};
}

// ---- 9: determinism ------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MSB_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism() {
  ScratchDir dir;
  const auto spec = dir.write("spec.txt",
                              "n = 200\nmissing.0 = mcar:0.4\nmissing.1 = mcar:0.4\nmissing.5 = mcar:0.4\n");
  if (run_cli("simulate --spec " + spec + " --out " + dir.file("sim") + " --seed 11") != 0) {
    return {false, "simulate failed"};
  }
  const std::string common = "evaluate --data " + dir.file("sim/features.csv") + " --manifest " +
                             dir.file("sim/manifest.csv") + " --models coxnet,rsf-mia,msb-plain-cwgb,msb-mia-rsf" +
                             " --repetitions 1 --seed 17";
  const int a = run_cli(common + " --out " + dir.file("a"));
  const int b = run_cli(common + " --out " + dir.file("b"));
  const int c = run_cli("--jobs 3 " + common + " --out " + dir.file("c"));
  if (a || b || c) return {false, "evaluate failed"};
  int same = 0;
  for (const char* f : {"results.csv", "summary.csv"}) {
    const auto ref = slurp(dir.file("a/") + f);
    same += !ref.empty() && ref == slurp(dir.file("b/") + f);
    same += ref == slurp(dir.file("c/") + f);
  }
  return {same == 4, std::to_string(same) + "/4 CSV pairs byte-identical (repeat run and --jobs 3)"};
}

struct Criterion {
  int id;
  const char* name;
  double budget;  // seconds, 0 = none
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "metric oracles", 1.0, metric_oracles},
      {2, "optimizer correctness", 30.0, optimizer},
      {3, "MIA equivalence", 5.0, mia_routing},
      {4, "no-leakage audit", 60.0, leakage},
      {5, "stacking vs baselines", 0.0, stacking_benchmark},
      {6, "paired tests", 0.0, significance},
      {7, "importance", 600.0, importance},
      {8, "missingness diagnostics", 0.0, diagnostics},
      {9, "determinism", 0.0, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget > 0.0 && secs > c.budget) {
      v.pass = false;
      v.detail += "; over the " + fmt("%g", c.budget) + " s budget";
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << v.detail << " ["
              << fmt("%.1f", secs) << " s]" << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
