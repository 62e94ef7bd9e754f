#pragma once

#include "msb/cohort.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace msb {

struct MissingMechanism {
  enum class Type { None, Mcar, Center, Prognostic };
  Type type = Type::None;
  double rate = 0.0;      // mcar: block-missing probability; prognostic: base probability
  double strength = 0.0;  // prognostic: log-odds change per sd of true risk

  static MissingMechanism parse(const std::string& text);  // "none", "mcar:0.4", "center", "prognostic:0.4:2"
  std::string str() const;
};

struct SimSpec {
  int n = 500;
  std::vector<int> source_sizes = {8, 40, 12, 5, 3, 142, 20, 25};
  std::vector<int> signal_sources = {0, 1, 4};
  int signal_features = 5;      // leading features per signal source with nonzero coefficients
  double signal_strength = 0.6; // sd of each signal source's contribution to the linear predictor
  double rho = 0.5;             // within-source equicorrelation
  double censoring = 0.3;       // target censored fraction
  double median_time = 300.0;   // days, at zero linear predictor
  double cell_missing = 0.02;   // scattered cells missing inside present blocks
  double center_probability = 0.45;  // share of patients at the coordinating center
  std::vector<MissingMechanism> missing;  // per source; missing entries mean None
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t sources() const { return source_sizes.size(); }

  /// key = value text; unknown keys are errors.
  static SimSpec parse(std::istream& in);
  static SimSpec from_file(const std::string& path);
  void write(std::ostream& out) const;
};

struct SimResult {
  Cohort cohort;
  Vector true_risk;        // linear predictor of the generating Cox model
  double baseline_rate = 0.0;  // constant baseline hazard per day
  std::vector<int> center;     // 0 = coordinating center

  /// True survival probability of patient i at time t.
  double true_survival(Index i, double t) const;
};

SimResult simulate(const SimSpec& spec);

void write_ground_truth_csv(std::ostream& out, const SimResult& sim);

struct SourceSummary {
  std::string id;
  std::string name;
  std::size_t columns = 0;
  double cell_missing_rate = 0.0;   // missing cells / all cells of the source
  double block_missing_rate = 0.0;  // rows with the 50% indicator set
};

struct CohortSummary {
  Index n = 0;
  double event_rate = 0.0;
  double min_time = 0.0, median_time = 0.0, max_time = 0.0;
  std::vector<SourceSummary> sources;
};

CohortSummary describe(const Cohort& cohort);
void write_summary_csv(std::ostream& out, const CohortSummary& summary);
void write_summary_text(std::ostream& out, const CohortSummary& summary);

}  // namespace msb
