#pragma once

#include "msb/survival.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace msb {

struct RsfParams {
  int trees = 100;
  int min_samples = 6;  // nodes with fewer samples become leaves
  int min_events = 3;   // nodes with fewer events become leaves
  int mtry = 0;         // 0 = ceil(sqrt(p))
  bool mia = false;     // route missing values as part of each split
  int jobs = 1;
};

/// Where missing values go at a split.
enum class MissingRoute : std::uint8_t {
  Left,      // missing joins x <= threshold
  Right,     // missing joins x > threshold
  Separate,  // missing left, every observed value right
};

const char* to_string(MissingRoute r);

struct SplitChoice {
  MissingRoute route = MissingRoute::Right;
  double statistic = 0.0;  // log-rank chi-square
};

/// Best routing of missing values for a fixed threshold, by log-rank
/// statistic. Routings leaving a side empty or without events are rejected;
/// returns nullopt when all three are.
std::optional<SplitChoice> split_mia(std::span<const double> values, double threshold,
                                     std::span<const SurvivalOutcome> outcomes);

struct SplitCandidate {
  Index feature = -1;
  double threshold = 0.0;
  MissingRoute route = MissingRoute::Right;
  double statistic = 0.0;
};

/// Exhaustive best log-rank split of `samples` (row indices, repeats allowed)
/// over `features`, thresholds at midpoints of distinct observed values.
/// Missing values are considered only when `mia` is set.
std::optional<SplitCandidate> find_best_split(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                                              std::span<const Index> samples, std::span<const Index> features,
                                              bool mia);

struct TreeNode {
  Index feature = -1;  // -1 for leaves
  double threshold = 0.0;
  MissingRoute route = MissingRoute::Right;
  int left = -1;
  int right = -1;
  int leaf = -1;
};

struct SurvivalTree {
  std::vector<TreeNode> nodes;       // nodes[0] is the root
  std::vector<StepCurve> leaves;     // Nelson-Aalen of in-bag members
  std::vector<double> leaf_grid_sum; // leaf hazard summed over the forest's event-time grid

  int leaf_of(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct FittedRsf {
  std::vector<SurvivalTree> trees;
  std::vector<double> event_times;  // distinct training event times
  Index features = 0;
  bool mia = false;
  std::vector<std::vector<std::uint32_t>> inbag;  // per tree, bootstrap counts per training row

  Vector predict_risk(const Matrix& x) const;
  /// Ensemble cumulative hazard at each grid point for one row.
  std::vector<double> cumulative_hazard(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                        std::span<const double> grid) const;
  /// Risk from trees whose bootstrap sample excluded each training row; NaN
  /// when a row was in bag for every tree.
  Vector oob_risk(const Matrix& train) const;
};

FittedRsf fit_rsf(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const RsfParams& params,
                  std::uint64_t seed);

}  // namespace msb
