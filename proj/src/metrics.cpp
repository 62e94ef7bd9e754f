#include "msb/metrics.hpp"

#include "msb/csv.hpp"
#include "msb/random.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

namespace msb {

double c_index(std::span<const SurvivalOutcome> outcomes, std::span<const double> risks) {
  if (outcomes.size() != risks.size()) throw DataError("c_index: length mismatch");
  const std::size_t n = outcomes.size();
  // rank risks for a Fenwick count of strictly smaller / equal values
  std::vector<double> sorted(risks.begin(), risks.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    rank[i] = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), risks[i]) - sorted.begin());
  }
  std::vector<double> tree(sorted.size() + 1, 0.0);
  auto add = [&](std::size_t i) {
    for (++i; i < tree.size(); i += i & (~i + 1)) tree[i] += 1.0;
  };
  auto prefix = [&](std::size_t i) {  // count with rank < i
    double s = 0.0;
    for (; i > 0; i -= i & (~i + 1)) s += tree[i];
    return s;
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return outcomes[a].time > outcomes[b].time; });
  double concordant = 0.0, comparable = 0.0, inserted = 0.0;
  std::size_t k = 0;
  while (k < n) {
    std::size_t j = k;
    while (j < n && outcomes[order[j]].time == outcomes[order[k]].time) ++j;
    // everything inserted so far has a strictly larger time
    for (std::size_t q = k; q < j; ++q) {
      const std::size_t i = order[q];
      if (!outcomes[i].event) continue;
      const double lower = prefix(rank[i]);
      const double equal = prefix(rank[i] + 1) - lower;
      concordant += lower + 0.5 * equal;
      comparable += inserted;
    }
    for (std::size_t q = k; q < j; ++q) add(rank[order[q]]);
    inserted += static_cast<double>(j - k);
    k = j;
  }
  if (comparable == 0.0) throw DataError("c_index: no comparable pairs");
  return concordant / comparable;
}

double brier(std::span<const SurvivalOutcome> outcomes, std::span<const StepCurve> curves, double t,
             const StepCurve& censoring, BrierDiagnostics* diag) {
  if (outcomes.size() != curves.size()) throw DataError("brier: length mismatch");
  const double g_t = censoring(t);
  double total = 0.0;
  std::size_t used = 0, dropped = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    const double s = curves[i](t);
    if (o.time <= t && o.event) {
      const double g = censoring.left_limit(o.time);
      if (!(g > 0.0)) {
        ++dropped;
        continue;
      }
      total += s * s / g;
    } else if (o.time > t) {
      if (!(g_t > 0.0)) {
        ++dropped;
        continue;
      }
      total += (1.0 - s) * (1.0 - s) / g_t;
    }
    ++used;
  }
  if (diag) diag->dropped += dropped;
  if (used == 0) throw DataError("brier: no usable patients");
  return total / static_cast<double>(used);
}

void IbsWindow::validate() const {
  if (!(start >= 0.0 && start < end)) throw DataError("ibs window needs 0 <= start < end");
  if (points < 2) throw DataError("ibs window needs at least 2 grid points");
}

std::vector<double> IbsWindow::grid() const {
  validate();
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    g[static_cast<std::size_t>(k)] = start + (end - start) * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  g.back() = end;
  return g;
}

double integrated_brier(std::span<const SurvivalOutcome> outcomes, std::span<const StepCurve> curves,
                        const IbsWindow& window, const StepCurve& censoring, BrierDiagnostics* diag) {
  const auto grid = window.grid();
  std::vector<double> b(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) b[k] = brier(outcomes, curves, grid[k], censoring, diag);
  double area = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) area += 0.5 * (b[k] + b[k - 1]) * (grid[k] - grid[k - 1]);
  return area / (window.end - window.start);
}

IbsResult integrated_brier_truncated(std::span<const SurvivalOutcome> outcomes, std::span<const StepCurve> curves,
                                     const IbsWindow& window, const StepCurve& censoring, double last_event_time) {
  IbsResult r;
  r.effective = window;
  r.effective.end = std::min(window.end, last_event_time);
  if (!(r.effective.end > r.effective.start)) return r;
  r.value = integrated_brier(outcomes, curves, r.effective, censoring);
  return r;
}

double ibss(double ibs) { return 1.0 - ibs / 0.25; }

ImportanceReport permutation_importance(const FittedMSB& model, const Cohort& test, const IbsWindow& window, int k,
                                        std::span<const SurvivalOutcome> censoring_source, std::uint64_t seed) {
  if (k < 1) throw DataError("permutation importance: K must be >= 1");
  if (test.n() < 2) throw DataError("permutation importance: need at least two rows");
  const Matrix z = build_meta_input(model, test);
  const StepCurve g = censoring_km(censoring_source);
  const EventTable tab = event_table(censoring_source);
  const double last = tab.times.empty() ? 0.0 : tab.times.back();
  const auto grid = model.meta.event_times();

  auto score = [&](const Matrix& input) {
    const auto curves = model.meta.predict_survival(input, grid);
    const IbsResult r = integrated_brier_truncated(test.outcomes, curves, window, g, last);
    if (is_missing(r.value)) throw DataError("permutation importance: window lies beyond the last event time");
    return ibss(r.value);
  };

  ImportanceReport report;
  report.window = window;
  report.permutations = k;
  const double baseline = score(z);
  std::vector<Index> perm(static_cast<std::size_t>(z.rows()));
  for (std::size_t c = 0; c < model.columns.size(); ++c) {
    const ScoreColumn& col = model.columns[c];
    ImportanceEntry e;
    e.label = col.label;
    e.source = col.source;
    e.is_rate = col.is_rate;
    e.model = col.is_rate ? "missing_rate" : to_string(model.config.base_specs[col.model].kind);
    e.baseline = baseline;
    std::vector<double> permuted;
    for (int r = 0; r < k; ++r) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c) * 1000003ULL + static_cast<std::uint64_t>(r)));
      std::iota(perm.begin(), perm.end(), Index{0});
      shuffle(perm, rng);
      Matrix shuffled = z;
      for (Index i = 0; i < z.rows(); ++i) shuffled(i, static_cast<Index>(c)) = z(perm[static_cast<std::size_t>(i)], static_cast<Index>(c));
      permuted.push_back(score(shuffled));
    }
    e.mean_permuted = std::accumulate(permuted.begin(), permuted.end(), 0.0) / static_cast<double>(k);
    e.importance = e.baseline - e.mean_permuted;
    if (k > 1) {
      double ss = 0.0;
      for (double v : permuted) ss += (v - e.mean_permuted) * (v - e.mean_permuted);
      e.sd = std::sqrt(ss / static_cast<double>(k - 1));
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

void write_importance_csv(std::ostream& out, const ImportanceReport& report) {
  csv::write_row(out, {"label", "source", "model", "baseline_ibss", "mean_permuted_ibss", "importance", "sd"});
  for (const auto& e : report.entries) {
    const auto open = e.label.find('(');
    const auto comma = e.label.find(", ");
    const std::string source_id =
        open != std::string::npos && comma != std::string::npos ? e.label.substr(open + 1, comma - open - 1) : "";
    csv::write_row(out, {e.label, source_id, e.model, csv::fmt(e.baseline), csv::fmt(e.mean_permuted),
                         csv::fmt(e.importance), csv::fmt(e.sd)});
  }
}

}  // namespace msb
