#include "msb/cohort.hpp"

#include "msb/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

namespace msb {

Matrix select_rows(const Matrix& x, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

Matrix select_cols(const Matrix& x, const std::vector<Index>& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = x.col(cols[j]);
  return out;
}

ModalityManifest::ModalityManifest(std::vector<Source> sources) : sources_(std::move(sources)) {}

std::vector<std::size_t> ModalityManifest::validate(Index p) const {
  if (sources_.empty()) throw ManifestError("manifest has no sources");
  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(static_cast<std::size_t>(p), unset);
  for (std::size_t s = 0; s < sources_.size(); ++s) {
    if (sources_[s].columns.empty()) {
      throw ManifestError("source '" + sources_[s].id + "' has no columns");
    }
    for (Index c : sources_[s].columns) {
      if (c < 0 || c >= p) throw ManifestError("source '" + sources_[s].id + "' references column out of range");
      auto& o = owner[static_cast<std::size_t>(c)];
      if (o != unset) {
        throw ManifestError("column " + std::to_string(c) + " assigned to both '" + sources_[o].id +
                            "' and '" + sources_[s].id + "'");
      }
      o = s;
    }
  }
  for (std::size_t c = 0; c < owner.size(); ++c) {
    if (owner[c] == unset) throw ManifestError("column " + std::to_string(c) + " belongs to no source");
  }
  return owner;
}

bool ModalityManifest::same_partition(const ModalityManifest& other) const {
  if (size() != other.size()) return false;
  for (std::size_t s = 0; s < size(); ++s) {
    if (sources_[s].id != other.sources_[s].id || sources_[s].columns != other.sources_[s].columns) {
      return false;
    }
  }
  return true;
}

void Cohort::validate() const {
  if (n() < 1 || p() < 1) throw DataError("cohort needs at least one row and one column");
  if (static_cast<Index>(outcomes.size()) != n()) throw OutcomeError("outcome count does not match rows");
  if (!strata.empty() && static_cast<Index>(strata.size()) != n()) {
    throw DataError("strata count does not match rows");
  }
  if (!feature_names.empty() && static_cast<Index>(feature_names.size()) != p()) {
    throw DataError("feature name count does not match columns");
  }
  manifest.validate(p());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const double t = outcomes[i].time;
    if (!std::isfinite(t) || t < 0.0) {
      throw OutcomeError("row " + std::to_string(i) + ": time must be finite and nonnegative");
    }
  }
  for (Index i = 0; i < n(); ++i) {
    for (Index j = 0; j < p(); ++j) {
      if (std::isinf(features(i, j))) throw DataError("infinite feature value");
    }
  }
}

Cohort Cohort::subset(const std::vector<Index>& rows) const {
  Cohort c;
  c.features = select_rows(features, rows);
  c.feature_names = feature_names;
  c.manifest = manifest;
  c.outcomes = select(outcomes, rows);
  if (!strata.empty()) c.strata = select(strata, rows);
  return c;
}

Matrix Cohort::source_block(std::size_t s) const { return select_cols(features, manifest[s].columns); }

namespace {

double parse_cell(const std::string& raw) {
  std::string s = raw;
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return kMissing;
  auto e = s.find_last_not_of(" \t");
  s = s.substr(b, e - b + 1);
  if (s == "NA" || s == "NaN" || s == "nan") return kMissing;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return kMissing;
  return v;
}

}  // namespace

Cohort load_cohort(const std::string& features_path, const std::string& manifest_path,
                   const CohortColumns& columns) {
  const csv::Table data = csv::read_file(features_path);
  const csv::Table man = csv::read_file(manifest_path);

  const int time_col = data.column(columns.time);
  const int event_col = data.column(columns.event);
  if (time_col < 0) throw OutcomeError("time column '" + columns.time + "' not found");
  if (event_col < 0) throw OutcomeError("event column '" + columns.event + "' not found");
  int strata_col = -1;
  if (!columns.strata.empty()) {
    strata_col = data.column(columns.strata);
    if (strata_col < 0) throw DataError("strata column '" + columns.strata + "' not found");
  }

  const int m_name = man.column("column_name");
  const int m_sid = man.column("source_id");
  const int m_sname = man.column("source_name");
  if (m_name < 0 || m_sid < 0 || m_sname < 0) {
    throw ManifestError("manifest must have columns column_name, source_id, source_name");
  }

  // feature columns, in file order
  std::vector<int> feat_cols;
  std::vector<std::string> names;
  std::map<std::string, Index> name_to_index;
  for (std::size_t c = 0; c < data.header.size(); ++c) {
    const int ci = static_cast<int>(c);
    if (ci == time_col || ci == event_col || ci == strata_col) continue;
    if (name_to_index.count(data.header[c])) throw DataError("duplicate data column '" + data.header[c] + "'");
    name_to_index[data.header[c]] = static_cast<Index>(names.size());
    feat_cols.push_back(ci);
    names.push_back(data.header[c]);
  }
  if (names.empty()) throw DataError("no feature columns");

  std::vector<Source> sources;
  std::map<std::string, std::size_t> source_index;
  std::map<std::string, std::string> assigned;
  for (const auto& row : man.rows) {
    const std::string& col = row[static_cast<std::size_t>(m_name)];
    const std::string& sid = row[static_cast<std::size_t>(m_sid)];
    const std::string& sname = row[static_cast<std::size_t>(m_sname)];
    auto it = name_to_index.find(col);
    if (it == name_to_index.end()) throw ManifestError("manifest column '" + col + "' not present in data");
    if (auto prev = assigned.find(col); prev != assigned.end()) {
      throw ManifestError("column '" + col + "' assigned twice (sources '" + prev->second + "' and '" + sid + "')");
    }
    assigned[col] = sid;
    auto [sit, inserted] = source_index.try_emplace(sid, sources.size());
    if (inserted) sources.push_back(Source{sid, sname, {}});
    sources[sit->second].columns.push_back(it->second);
  }
  for (const auto& n : names) {
    if (!assigned.count(n)) throw ManifestError("column '" + n + "' missing from manifest");
  }
  for (auto& s : sources) std::sort(s.columns.begin(), s.columns.end());

  Cohort cohort;
  const Index n = static_cast<Index>(data.rows.size());
  cohort.features.resize(n, static_cast<Index>(names.size()));
  cohort.outcomes.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto& row = data.rows[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < feat_cols.size(); ++j) {
      cohort.features(i, static_cast<Index>(j)) = parse_cell(row[static_cast<std::size_t>(feat_cols[j])]);
    }
    const double t = parse_cell(row[static_cast<std::size_t>(time_col)]);
    const double e = parse_cell(row[static_cast<std::size_t>(event_col)]);
    if (is_missing(t) || t < 0.0) {
      throw OutcomeError("row " + std::to_string(i + 1) + ": time must be a nonnegative number");
    }
    if (e != 0.0 && e != 1.0) throw OutcomeError("row " + std::to_string(i + 1) + ": event must be 0 or 1");
    cohort.outcomes[static_cast<std::size_t>(i)] = SurvivalOutcome{t, e == 1.0};
    if (strata_col >= 0) cohort.strata.push_back(row[static_cast<std::size_t>(strata_col)]);
  }
  cohort.feature_names = std::move(names);
  cohort.manifest = ModalityManifest(std::move(sources));
  cohort.validate();
  return cohort;
}

void write_cohort(const Cohort& cohort, const std::string& features_path,
                  const std::string& manifest_path, const CohortColumns& columns) {
  std::vector<std::string> names = cohort.feature_names;
  if (names.empty()) {
    for (Index j = 0; j < cohort.p(); ++j) names.push_back("x" + std::to_string(j));
  }
  {
    std::ofstream out(features_path);
    if (!out) throw DataError("cannot write " + features_path);
    std::vector<std::string> header = names;
    header.push_back(columns.time);
    header.push_back(columns.event);
    const bool with_strata = !cohort.strata.empty() && !columns.strata.empty();
    if (with_strata) header.push_back(columns.strata);
    csv::write_row(out, header);
    for (Index i = 0; i < cohort.n(); ++i) {
      std::vector<std::string> row;
      for (Index j = 0; j < cohort.p(); ++j) row.push_back(csv::exact(cohort.features(i, j)));
      const auto& o = cohort.outcomes[static_cast<std::size_t>(i)];
      row.push_back(csv::exact(o.time));
      row.push_back(o.event ? "1" : "0");
      if (with_strata) row.push_back(cohort.strata[static_cast<std::size_t>(i)]);
      csv::write_row(out, row);
    }
  }
  std::ofstream out(manifest_path);
  if (!out) throw DataError("cannot write " + manifest_path);
  csv::write_row(out, {"column_name", "source_id", "source_name"});
  for (const auto& src : cohort.manifest.sources()) {
    for (Index c : src.columns) csv::write_row(out, {names[static_cast<std::size_t>(c)], src.id, src.name});
  }
}

MissingnessProfile missingness_profile(const Cohort& cohort) {
  const std::size_t S = cohort.num_sources();
  const Index n = cohort.n();
  MissingnessProfile prof;
  prof.rates.resize(n, static_cast<Index>(S));
  prof.block_missing.resize(n, static_cast<Index>(S));
  prof.source_rate.assign(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    const auto& cols = cohort.manifest[s].columns;
    const double ps = static_cast<double>(cols.size());
    std::size_t total = 0;
    for (Index i = 0; i < n; ++i) {
      std::size_t miss = 0;
      for (Index c : cols) miss += is_missing(cohort.features(i, c)) ? 1 : 0;
      total += miss;
      const double r = static_cast<double>(miss) / ps;
      prof.rates(i, static_cast<Index>(s)) = r;
      prof.block_missing(i, static_cast<Index>(s)) = r >= kBlockThreshold ? 1 : 0;
    }
    prof.source_rate[s] = n > 0 ? static_cast<double>(total) / (ps * static_cast<double>(n)) : 0.0;
  }
  return prof;
}

std::vector<Index> sort_by_block_pattern(const Cohort& cohort) {
  const auto prof = missingness_profile(cohort);
  std::vector<Index> perm(static_cast<std::size_t>(cohort.n()));
  std::iota(perm.begin(), perm.end(), Index{0});
  const Index S = prof.block_missing.cols();
  std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) {
    for (Index s = 0; s < S; ++s) {
      const int x = prof.block_missing(a, s), y = prof.block_missing(b, s);
      if (x != y) return x < y;
    }
    return false;
  });
  return perm;
}

}  // namespace msb
