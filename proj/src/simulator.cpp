#include "msb/simulator.hpp"

#include "msb/csv.hpp"
#include "msb/random.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace msb {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("sim spec: '" + key + "' expects a number, got '" + s + "'");
  }
}

std::vector<int> to_ints(const std::string& s, const std::string& key) {
  std::vector<int> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, ',')) out.push_back(static_cast<int>(to_double(trim(part), key)));
  return out;
}

/// Standard normal via Box-Muller on the shared engine.
double normal(Rng& rng) {
  const double u1 = uniform_open(rng), u2 = uniform_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::string source_letter(std::size_t s) {
  std::string id;
  std::size_t v = s;
  do {
    id.insert(id.begin(), static_cast<char>('A' + v % 26));
    v = v / 26;
  } while (v-- > 0);
  return id;
}

}  // namespace

MissingMechanism MissingMechanism::parse(const std::string& text) {
  const auto parts = split(trim(text), ':');
  MissingMechanism m;
  if (parts.empty() || parts[0] == "none") return m;
  auto need = [&](std::size_t k) {
    if (parts.size() != k) throw DataError("missing mechanism '" + text + "' has the wrong number of fields");
  };
  if (parts[0] == "mcar") {
    need(2);
    m.type = Type::Mcar;
    m.rate = to_double(parts[1], text);
  } else if (parts[0] == "center") {
    need(1);
    m.type = Type::Center;
  } else if (parts[0] == "prognostic") {
    need(3);
    m.type = Type::Prognostic;
    m.rate = to_double(parts[1], text);
    m.strength = to_double(parts[2], text);
  } else {
    throw DataError("unknown missing mechanism '" + text + "'");
  }
  return m;
}

std::string MissingMechanism::str() const {
  std::ostringstream os;
  switch (type) {
    case Type::None:
      return "none";
    case Type::Mcar:
      os << "mcar:" << csv::exact(rate);
      break;
    case Type::Center:
      return "center";
    case Type::Prognostic:
      os << "prognostic:" << csv::exact(rate) << ':' << csv::exact(strength);
      break;
  }
  return os.str();
}

void SimSpec::validate() const {
  if (n < 10) throw DataError("sim spec: n must be at least 10");
  if (source_sizes.empty()) throw DataError("sim spec: no sources");
  for (int p : source_sizes) {
    if (p < 1) throw DataError("sim spec: source sizes must be positive");
  }
  for (int s : signal_sources) {
    if (s < 0 || s >= static_cast<int>(source_sizes.size())) throw DataError("sim spec: signal source out of range");
  }
  if (signal_features < 1) throw DataError("sim spec: signal_features must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw DataError("sim spec: rho must lie in [0, 1)");
  if (!(censoring > 0.0 && censoring < 1.0)) throw DataError("sim spec: censoring must lie in (0, 1)");
  if (!(median_time > 0.0)) throw DataError("sim spec: median_time must be positive");
  if (!(cell_missing >= 0.0 && cell_missing < 1.0)) throw DataError("sim spec: cell_missing must lie in [0, 1)");
  if (!(center_probability > 0.0 && center_probability <= 1.0)) {
    throw DataError("sim spec: center_probability must lie in (0, 1]");
  }
  if (missing.size() > source_sizes.size()) throw DataError("sim spec: more mechanisms than sources");
  for (const auto& m : missing) {
    if ((m.type == MissingMechanism::Type::Mcar || m.type == MissingMechanism::Type::Prognostic) &&
        !(m.rate >= 0.0 && m.rate < 1.0)) {
      throw DataError("sim spec: missing rate must lie in [0, 1)");
    }
  }
}

SimSpec SimSpec::parse(std::istream& in) {
  SimSpec spec;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("sim spec line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "n") {
      spec.n = static_cast<int>(to_double(value, key));
    } else if (key == "seed") {
      spec.seed = std::stoull(value);
    } else if (key == "sources") {
      spec.source_sizes = to_ints(value, key);
    } else if (key == "signal_sources") {
      spec.signal_sources = to_ints(value, key);
    } else if (key == "signal_features") {
      spec.signal_features = static_cast<int>(to_double(value, key));
    } else if (key == "signal_strength") {
      spec.signal_strength = to_double(value, key);
    } else if (key == "rho") {
      spec.rho = to_double(value, key);
    } else if (key == "censoring") {
      spec.censoring = to_double(value, key);
    } else if (key == "median_time") {
      spec.median_time = to_double(value, key);
    } else if (key == "cell_missing") {
      spec.cell_missing = to_double(value, key);
    } else if (key == "center_probability") {
      spec.center_probability = to_double(value, key);
    } else if (key == "missing") {
      // one mechanism per source, separated by commas; a single entry applies to every source
      spec.missing.clear();
      for (const auto& part : split(value, ',')) spec.missing.push_back(MissingMechanism::parse(part));
    } else if (key.rfind("missing.", 0) == 0) {
      const int s = static_cast<int>(to_double(key.substr(8), key));
      if (s < 0) throw DataError("sim spec: bad source index in '" + key + "'");
      if (spec.missing.size() <= static_cast<std::size_t>(s)) spec.missing.resize(static_cast<std::size_t>(s) + 1);
      spec.missing[static_cast<std::size_t>(s)] = MissingMechanism::parse(value);
    } else {
      throw DataError("sim spec: unknown key '" + key + "'");
    }
  }
  if (spec.missing.size() == 1 && spec.source_sizes.size() > 1) spec.missing.resize(spec.source_sizes.size(), spec.missing[0]);
  spec.validate();
  return spec;
}

SimSpec SimSpec::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse(in);
}

void SimSpec::write(std::ostream& out) const {
  auto ints = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  std::ostringstream os;
  os << "n = " << n << "\nseed = " << seed << "\nsources = " << ints(source_sizes)
     << "\nsignal_sources = " << ints(signal_sources) << "\nsignal_features = " << signal_features
     << "\nsignal_strength = " << csv::exact(signal_strength) << "\nrho = " << csv::exact(rho) << "\ncensoring = " << csv::exact(censoring)
     << "\nmedian_time = " << csv::exact(median_time) << "\ncell_missing = " << csv::exact(cell_missing)
     << "\ncenter_probability = " << csv::exact(center_probability) << '\n';
  for (std::size_t s = 0; s < missing.size(); ++s) os << "missing." << s << " = " << missing[s].str() << '\n';
  out << os.str();
}

double SimResult::true_survival(Index i, double t) const {
  return std::exp(-baseline_rate * t * std::exp(true_risk[i]));
}

SimResult simulate(const SimSpec& spec) {
  spec.validate();
  const std::size_t S = spec.sources();
  const Index n = spec.n;
  Index p = 0;
  for (int sz : spec.source_sizes) p += sz;

  SimResult sim;
  Cohort& c = sim.cohort;
  c.features.resize(n, p);

  // features: x = sqrt(rho) * shared + sqrt(1 - rho) * own, per source
  Rng feat_rng(derive_seed(spec.seed, "features"));
  std::vector<Source> sources;
  Index col = 0;
  Vector lp = Vector::Zero(n);
  for (std::size_t s = 0; s < S; ++s) {
    const int ps = spec.source_sizes[s];
    Source src{source_letter(s), "Source " + source_letter(s), {}};
    for (int j = 0; j < ps; ++j) {
      src.columns.push_back(col + j);
      c.feature_names.push_back(src.id + "_" + std::to_string(j + 1));
    }
    for (Index i = 0; i < n; ++i) {
      const double shared = normal(feat_rng);
      for (int j = 0; j < ps; ++j) {
        c.features(i, col + j) = std::sqrt(spec.rho) * shared + std::sqrt(1.0 - spec.rho) * normal(feat_rng);
      }
    }
    if (std::find(spec.signal_sources.begin(), spec.signal_sources.end(), static_cast<int>(s)) !=
        spec.signal_sources.end()) {
      const int k = std::min(spec.signal_features, ps);
      // unit-variance sum of k equicorrelated features, scaled to the requested sd
      const double beta = spec.signal_strength / std::sqrt(k * (1.0 + (k - 1) * spec.rho));
      for (int j = 0; j < k; ++j) lp += beta * c.features.col(col + j);
    }
    col += ps;
    sources.push_back(std::move(src));
  }
  c.manifest = ModalityManifest(std::move(sources));
  sim.true_risk = lp;

  // outcomes: exponential event times, exponential censoring calibrated to the target rate
  sim.baseline_rate = std::log(2.0) / spec.median_time;
  Rng out_rng(derive_seed(spec.seed, "outcomes"));
  std::vector<double> event_time(static_cast<std::size_t>(n)), unit_censor(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    event_time[static_cast<std::size_t>(i)] = -std::log(uniform_open(out_rng)) / (sim.baseline_rate * std::exp(lp[i]));
    unit_censor[static_cast<std::size_t>(i)] = -std::log(uniform_open(out_rng));
  }
  auto censored_fraction = [&](double rate) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < event_time.size(); ++i) k += unit_censor[i] / rate < event_time[i] ? 1 : 0;
    return static_cast<double>(k) / static_cast<double>(event_time.size());
  };
  double lo = std::log(1e-9), hi = std::log(1e3);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (censored_fraction(std::exp(mid)) < spec.censoring ? lo : hi) = mid;
  }
  const double censor_rate = std::exp(hi);
  if (std::abs(censored_fraction(censor_rate) - spec.censoring) > 0.02) {
    throw DataError("simulate: censoring target unreachable at this sample size");
  }
  c.outcomes.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < event_time.size(); ++i) {
    const double cens = unit_censor[i] / censor_rate;
    const bool event = event_time[i] <= cens;
    // whole days, at least one
    const double t = std::max(1.0, std::ceil(std::min(event_time[i], cens)));
    c.outcomes[i] = SurvivalOutcome{t, event};
  }

  // missingness, applied after outcomes
  Rng miss_rng(derive_seed(spec.seed, "missingness"));
  sim.center.resize(static_cast<std::size_t>(n));
  for (auto& ctr : sim.center) ctr = uniform_open(miss_rng) < spec.center_probability ? 0 : 1;
  c.strata.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) c.strata[static_cast<std::size_t>(i)] = "center" + std::to_string(sim.center[static_cast<std::size_t>(i)]);
  const double lp_mean = lp.mean();
  const double lp_sd = std::sqrt((lp.array() - lp_mean).square().mean());
  for (std::size_t s = 0; s < S; ++s) {
    const MissingMechanism mech = s < spec.missing.size() ? spec.missing[s] : MissingMechanism{};
    const auto& cols = c.manifest[s].columns;
    for (Index i = 0; i < n; ++i) {
      bool absent = false;
      switch (mech.type) {
        case MissingMechanism::Type::None:
          break;
        case MissingMechanism::Type::Mcar:
          absent = uniform_open(miss_rng) < mech.rate;
          break;
        case MissingMechanism::Type::Center:
          absent = sim.center[static_cast<std::size_t>(i)] != 0;
          break;
        case MissingMechanism::Type::Prognostic: {
          const double z = lp_sd > 0.0 ? (lp[i] - lp_mean) / lp_sd : 0.0;
          const double logit = std::log(mech.rate / (1.0 - mech.rate)) + mech.strength * z;
          absent = uniform_open(miss_rng) < 1.0 / (1.0 + std::exp(-logit));
          break;
        }
      }
      if (absent) {
        for (Index cidx : cols) c.features(i, cidx) = kMissing;
        continue;
      }
      if (spec.cell_missing > 0.0) {
        std::vector<Index> hit;
        for (Index cidx : cols) {
          if (uniform_open(miss_rng) < spec.cell_missing) hit.push_back(cidx);
        }
        // scattered gaps stay below the block threshold
        const std::size_t cap = (cols.size() - 1) / 2;
        if (hit.size() > cap) hit.resize(cap);
        for (Index cidx : hit) c.features(i, cidx) = kMissing;
      }
    }
  }
  c.validate();
  return sim;
}

void write_ground_truth_csv(std::ostream& out, const SimResult& sim) {
  csv::write_row(out, {"row", "true_risk", "center", "true_survival_100", "true_survival_365"});
  for (Index i = 0; i < sim.true_risk.size(); ++i) {
    csv::write_row(out, {std::to_string(i), csv::fmt(sim.true_risk[i]), std::to_string(sim.center[static_cast<std::size_t>(i)]),
                         csv::fmt(sim.true_survival(i, 100.0)), csv::fmt(sim.true_survival(i, 365.0))});
  }
}

CohortSummary describe(const Cohort& cohort) {
  CohortSummary out;
  out.n = cohort.n();
  const auto prof = missingness_profile(cohort);
  std::vector<double> times;
  double events = 0.0;
  for (const auto& o : cohort.outcomes) {
    times.push_back(o.time);
    events += o.event ? 1.0 : 0.0;
  }
  std::sort(times.begin(), times.end());
  out.event_rate = times.empty() ? 0.0 : events / static_cast<double>(times.size());
  if (!times.empty()) {
    out.min_time = times.front();
    out.max_time = times.back();
    const std::size_t m = times.size();
    out.median_time = m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
  }
  for (std::size_t s = 0; s < cohort.num_sources(); ++s) {
    SourceSummary ss;
    ss.id = cohort.manifest[s].id;
    ss.name = cohort.manifest[s].name;
    ss.columns = cohort.manifest[s].columns.size();
    ss.cell_missing_rate = prof.source_rate[s];
    ss.block_missing_rate = cohort.n() > 0 ? static_cast<double>(prof.block_missing.col(static_cast<Index>(s)).sum()) /
                                                 static_cast<double>(cohort.n())
                                           : 0.0;
    out.sources.push_back(std::move(ss));
  }
  return out;
}

void write_summary_csv(std::ostream& out, const CohortSummary& summary) {
  csv::write_row(out, {"source_id", "source_name", "columns", "cell_missing_rate", "block_missing_rate"});
  for (const auto& s : summary.sources) {
    csv::write_row(out, {s.id, s.name, std::to_string(s.columns), csv::fmt(s.cell_missing_rate),
                         csv::fmt(s.block_missing_rate)});
  }
}

void write_summary_text(std::ostream& out, const CohortSummary& summary) {
  out << "patients: " << summary.n << "\nevent rate: " << csv::fmt(summary.event_rate)
      << "\nfollow-up (days): min " << csv::fmt(summary.min_time) << ", median " << csv::fmt(summary.median_time)
      << ", max " << csv::fmt(summary.max_time) << "\nsources:\n";
  for (const auto& s : summary.sources) {
    out << "  " << s.id << " (" << s.name << "): " << s.columns << " columns, cell missing "
        << csv::fmt(s.cell_missing_rate) << ", block missing " << csv::fmt(s.block_missing_rate) << '\n';
  }
}

}  // namespace msb
