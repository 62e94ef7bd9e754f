#include "msb/knn_imputer.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

namespace msb {

KnnImputer::KnnImputer(int k, std::optional<double> global_fallback) : k_(k), fallback_(global_fallback) {
  if (k < 1) throw DataError("knn imputer: k must be positive");
}

double nan_euclidean(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  double ss = 0.0;
  Index shared = 0;
  for (Index j = 0; j < a.size(); ++j) {
    if (is_missing(a[j]) || is_missing(b[j])) continue;
    const double d = a[j] - b[j];
    ss += d * d;
    ++shared;
  }
  if (shared == 0) return std::numeric_limits<double>::infinity();
  return std::sqrt(static_cast<double>(a.size()) / static_cast<double>(shared) * ss);
}

void KnnImputer::fit(const Matrix& train) {
  if (train.rows() < 1) throw DataError("knn imputer: empty training matrix");
  bool any = false;
  means_.resize(train.cols());
  for (Index j = 0; j < train.cols(); ++j) {
    double sum = 0.0;
    Index cnt = 0;
    for (Index i = 0; i < train.rows(); ++i) {
      if (!is_missing(train(i, j))) {
        sum += train(i, j);
        ++cnt;
      }
    }
    means_[j] = cnt > 0 ? sum / static_cast<double>(cnt) : kMissing;
    any = any || cnt > 0;
  }
  if (!any) throw DataError("knn imputer: no observed values in training matrix");
  train_ = train;
  fitted_ = true;
}

KnnImputer KnnImputer::restore(int k, std::optional<double> fallback, Matrix reference) {
  KnnImputer imp(k, fallback);
  imp.fit(reference);
  return imp;
}

Matrix KnnImputer::transform(const Matrix& x) const {
  if (!fitted_) throw DataError("knn imputer: not fitted");
  if (x.cols() != train_.cols()) throw DataError("knn imputer: column count mismatch");
  Matrix out = x;
  const Index m = train_.rows();
  std::vector<double> dist(static_cast<std::size_t>(m));
  std::vector<Index> cand;
  cand.reserve(static_cast<std::size_t>(m));
  for (Index i = 0; i < x.rows(); ++i) {
    bool has_missing = false;
    for (Index j = 0; j < x.cols() && !has_missing; ++j) has_missing = is_missing(x(i, j));
    if (!has_missing) continue;

    for (Index r = 0; r < m; ++r) dist[static_cast<std::size_t>(r)] = nan_euclidean(x.row(i), train_.row(r));

    for (Index j = 0; j < x.cols(); ++j) {
      if (!is_missing(x(i, j))) continue;
      cand.clear();
      for (Index r = 0; r < m; ++r) {
        if (!is_missing(train_(r, j)) && std::isfinite(dist[static_cast<std::size_t>(r)])) cand.push_back(r);
      }
      if (cand.empty()) {
        if (!is_missing(means_[j])) {
          out(i, j) = means_[j];
        } else if (fallback_) {
          out(i, j) = *fallback_;
        } else {
          throw DataError("knn imputer: column " + std::to_string(j) + " has no observed training value");
        }
        continue;
      }
      const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k_), cand.size());
      auto closer = [&](Index a, Index b) {
        const double da = dist[static_cast<std::size_t>(a)], db = dist[static_cast<std::size_t>(b)];
        return da < db || (da == db && a < b);
      };
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), closer);
      double sum = 0.0;
      for (std::size_t q = 0; q < take; ++q) sum += train_(cand[q], j);
      out(i, j) = sum / static_cast<double>(take);
    }
  }
  return out;
}

}  // namespace msb
