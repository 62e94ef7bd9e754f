#pragma once

#include "msb/common.hpp"

#include <optional>

namespace msb {

/// NaN-aware k-nearest-neighbour imputer.
///
/// Distance between two rows is computed over coordinates observed in both,
/// rescaled by (total columns / shared columns). Each missing cell is filled
/// with the uniform mean of that column over the k nearest training rows that
/// observe it; ties in distance go to the lower training row. Rows with no
/// shared coordinates are never neighbours. Without any donor the cell takes
/// the training column mean.
class KnnImputer {
 public:
  static constexpr int kDefaultNeighbours = 5;

  KnnImputer() = default;
  explicit KnnImputer(int k, std::optional<double> global_fallback = std::nullopt);

  void fit(const Matrix& train);
  Matrix transform(const Matrix& x) const;
  Matrix fit_transform(const Matrix& x) {
    fit(x);
    return transform(x);
  }

  int k() const { return k_; }
  bool fitted() const { return fitted_; }
  Index columns() const { return train_.cols(); }
  const Matrix& reference() const { return train_; }
  /// Observed-value mean per column; NaN for columns never observed.
  const Vector& column_means() const { return means_; }
  std::optional<double> global_fallback() const { return fallback_; }

  /// Rebuilds a fitted imputer from stored state.
  static KnnImputer restore(int k, std::optional<double> fallback, Matrix reference);

 private:
  int k_ = kDefaultNeighbours;
  std::optional<double> fallback_;
  Matrix train_;
  Vector means_;
  bool fitted_ = false;
};

/// Scaled distance used by KnnImputer; +infinity without shared coordinates.
double nan_euclidean(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b);

}  // namespace msb
