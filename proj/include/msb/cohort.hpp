#pragma once

#include "msb/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace msb {

struct SurvivalOutcome {
  double time = 0.0;   // days
  bool event = false;  // false = right-censored
};

using Outcomes = std::vector<SurvivalOutcome>;

struct Source {
  std::string id;
  std::string name;
  std::vector<Index> columns;
};

/// Partition of the feature columns into data sources (modalities).
class ModalityManifest {
 public:
  ModalityManifest() = default;
  explicit ModalityManifest(std::vector<Source> sources);

  std::size_t size() const { return sources_.size(); }
  const Source& operator[](std::size_t s) const { return sources_[s]; }
  const std::vector<Source>& sources() const { return sources_; }

  /// Source owning each column; throws ManifestError unless the column sets
  /// are disjoint, nonempty and cover [0, p).
  std::vector<std::size_t> validate(Index p) const;

  bool same_partition(const ModalityManifest& other) const;

 private:
  std::vector<Source> sources_;
};

struct Cohort {
  Matrix features;  // n x p, NaN = missing
  std::vector<std::string> feature_names;
  ModalityManifest manifest;
  Outcomes outcomes;
  std::vector<std::string> strata;  // empty or length n

  Index n() const { return features.rows(); }
  Index p() const { return features.cols(); }
  std::size_t num_sources() const { return manifest.size(); }

  /// Throws on any broken invariant.
  void validate() const;

  Cohort subset(const std::vector<Index>& rows) const;

  /// Columns of source s (still containing missing cells).
  Matrix source_block(std::size_t s) const;
};

struct CohortColumns {
  std::string time = "time";
  std::string event = "event";
  std::string strata;  // optional
};

/// Reads a features CSV and a manifest CSV (column_name, source_id,
/// source_name). Empty cells, "NA" and unparseable numbers become missing.
Cohort load_cohort(const std::string& features_path, const std::string& manifest_path,
                   const CohortColumns& columns = {});

/// Writes a cohort so that load_cohort reproduces it bit for bit.
void write_cohort(const Cohort& cohort, const std::string& features_path,
                  const std::string& manifest_path, const CohortColumns& columns = {});

struct MissingnessProfile {
  Matrix rates;                     // n x S, per-row fraction of missing cells per source
  std::vector<double> source_rate;  // S, fraction of missing cells over the whole source
  Eigen::MatrixXi block_missing;    // n x S, 1 iff rate >= 0.5
};

inline constexpr double kBlockThreshold = 0.5;

MissingnessProfile missingness_profile(const Cohort& cohort);

/// Stable permutation ordering rows lexicographically by their block
/// indicator vectors.
std::vector<Index> sort_by_block_pattern(const Cohort& cohort);

}  // namespace msb
