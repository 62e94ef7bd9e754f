#include "msb/rsf.hpp"

#include "msb/parallel.hpp"
#include "msb/random.hpp"

#include <algorithm>
#include <numeric>

namespace msb {

const char* to_string(MissingRoute r) {
  switch (r) {
    case MissingRoute::Left:
      return "missing-left";
    case MissingRoute::Right:
      return "missing-right";
    case MissingRoute::Separate:
      return "missing-vs-observed";
  }
  return "?";
}

std::optional<SplitChoice> split_mia(std::span<const double> values, double threshold,
                                     std::span<const SurvivalOutcome> outcomes) {
  if (values.size() != outcomes.size()) throw DataError("split_mia: length mismatch");
  std::optional<SplitChoice> best;
  for (MissingRoute route : {MissingRoute::Left, MissingRoute::Right, MissingRoute::Separate}) {
    std::vector<SurvivalOutcome> left, right;
    for (std::size_t i = 0; i < values.size(); ++i) {
      bool go_left;
      if (is_missing(values[i])) {
        go_left = route != MissingRoute::Right;
      } else {
        go_left = route != MissingRoute::Separate && values[i] <= threshold;
      }
      (go_left ? left : right).push_back(outcomes[i]);
    }
    auto has_event = [](const std::vector<SurvivalOutcome>& g) {
      return std::any_of(g.begin(), g.end(), [](const SurvivalOutcome& o) { return o.event; });
    };
    if (!has_event(left) || !has_event(right)) continue;
    const double stat = logrank_test(left, right).statistic;
    if (!best || stat > best->statistic) best = SplitChoice{route, stat};
  }
  return best;
}

namespace {

class Fenwick {
 public:
  explicit Fenwick(std::size_t n = 0) : tree_(n + 1, 0.0) {}
  void reset(std::size_t n) { tree_.assign(n + 1, 0.0); }
  void add(std::size_t i, double v) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += v;
  }
  /// Sum over indices [0, i).
  double prefix(std::size_t i) const {
    double s = 0.0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<double> tree_;
};

/// Survival summaries of one node, shared by every candidate split.
struct NodeSurvival {
  std::vector<std::size_t> slot;  // per sample position: number of node event times <= its time
  std::vector<char> event;
  std::vector<double> hcum, a0, a1;  // prefix sums, size K + 1
  std::size_t events = 0;

  void build(std::span<const SurvivalOutcome> outcomes, std::span<const Index> samples) {
    const std::size_t m = samples.size();
    auto time_of = [&](std::size_t q) { return outcomes[static_cast<std::size_t>(samples[q])].time; };
    order.resize(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    bool sorted = true;
    for (std::size_t q = 1; q < m && sorted; ++q) sorted = time_of(q - 1) <= time_of(q);
    if (!sorted) std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return time_of(a) < time_of(b); });

    event.resize(m);
    slot.resize(m);
    events = 0;
    hcum.assign(1, 0.0);
    a0.assign(1, 0.0);
    a1.assign(1, 0.0);
    std::size_t k = 0;
    while (k < m) {
      const double t = time_of(order[k]);
      std::size_t j = k;
      double d = 0.0;
      while (j < m && time_of(order[j]) == t) {
        const bool ev = outcomes[static_cast<std::size_t>(samples[order[j]])].event;
        event[order[j]] = ev ? 1 : 0;
        d += ev ? 1.0 : 0.0;
        ++j;
      }
      if (d > 0.0) {
        const double y = static_cast<double>(m - k);
        const double a = y > 1.0 ? d * (y - d) / (y * y * (y - 1.0)) : 0.0;
        hcum.push_back(hcum.back() + d / y);
        a0.push_back(a0.back() + a);
        a1.push_back(a1.back() + a * y);
        events += static_cast<std::size_t>(d);
      }
      for (std::size_t q = k; q < j; ++q) slot[order[q]] = hcum.size() - 1;
      k = j;
    }
  }

  std::size_t event_times() const { return hcum.size() - 1; }

 private:
  std::vector<std::size_t> order;
};

/// Incrementally maintained log-rank numerator and variance of a growing left child.
class LeftChild {
 public:
  explicit LeftChild(const NodeSurvival& node) : node_(node), count_(node.event_times() + 1), mass_(node.event_times() + 1) {}

  void clear() {
    count_.reset(node_.event_times() + 1);
    mass_.reset(node_.event_times() + 1);
    num_ = var_ = 0.0;
    n_ = events_ = 0;
  }

  void add(std::size_t q) {
    const std::size_t c = node_.slot[q];
    const double below_mass = mass_.prefix(c);
    const double at_or_above = static_cast<double>(n_) - count_.prefix(c);
    const double cross = below_mass + node_.a0[c] * at_or_above;
    var_ += node_.a1[c] - node_.a0[c] - 2.0 * cross;
    num_ += static_cast<double>(node_.event[q]) - node_.hcum[c];
    count_.add(c, 1.0);
    mass_.add(c, node_.a0[c]);
    ++n_;
    events_ += node_.event[q] ? 1 : 0;
  }

  /// Chi-square statistic, or -1 when the split is not admissible.
  double statistic(std::size_t total) const {
    if (n_ == 0 || n_ >= total || events_ == 0 || events_ >= node_.events) return -1.0;
    if (!(var_ > 1e-12)) return -1.0;
    return num_ * num_ / var_;
  }

 private:
  const NodeSurvival& node_;
  Fenwick count_, mass_;
  double num_ = 0.0, var_ = 0.0;
  std::size_t n_ = 0, events_ = 0;
};

struct SplitWorkspace {
  std::vector<std::pair<double, std::size_t>> obs;
  std::vector<std::size_t> miss;
};

std::optional<SplitCandidate> best_split_in_node(const Matrix& x, const NodeSurvival& node,
                                                 std::span<const Index> samples, std::span<const Index> features,
                                                 bool mia, SplitWorkspace& ws) {
  const std::size_t m = samples.size();
  std::optional<SplitCandidate> best;
  LeftChild left(node);
  auto& obs = ws.obs;
  auto& miss = ws.miss;
  for (Index f : features) {
    obs.clear();
    miss.clear();
    for (std::size_t q = 0; q < m; ++q) {
      const double v = x(samples[q], f);
      if (is_missing(v)) {
        miss.push_back(q);
      } else {
        obs.emplace_back(v, q);
      }
    }
    if (!miss.empty() && !mia) throw DataError("rsf: missing value in training data");
    if (obs.empty()) continue;
    std::sort(obs.begin(), obs.end());

    auto consider = [&](double stat, double threshold, MissingRoute route) {
      if (stat < 0.0) return;
      if (!best || stat > best->statistic) best = SplitCandidate{f, threshold, route, stat};
    };
    auto sweep = [&](MissingRoute route) {
      for (std::size_t r = 0; r + 1 < obs.size(); ++r) {
        left.add(obs[r].second);
        const double v = obs[r].first, w = obs[r + 1].first;
        if (v < w) {
          // the midpoint of adjacent doubles can round up to w
          const double mid = 0.5 * (v + w);
          consider(left.statistic(m), mid < w ? mid : v, route);
        }
      }
    };

    left.clear();
    sweep(MissingRoute::Right);
    if (!miss.empty()) {
      left.clear();
      for (std::size_t q : miss) left.add(q);
      consider(left.statistic(m), 0.0, MissingRoute::Separate);
      sweep(MissingRoute::Left);
    }
  }
  return best;
}

bool goes_left(const TreeNode& node, double v) {
  if (is_missing(v)) return node.route != MissingRoute::Right;
  if (node.route == MissingRoute::Separate) return false;
  return v <= node.threshold;
}

SurvivalTree grow_tree(const Matrix& x, std::span<const SurvivalOutcome> outcomes, std::vector<Index> samples,
                       const RsfParams& params, std::size_t mtry, std::span<const double> grid, Rng& rng) {
  SurvivalTree tree;
  struct Pending {
    int node;
    std::vector<Index> samples;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, std::move(samples)});
  std::vector<Index> all_features(static_cast<std::size_t>(x.cols()));
  std::iota(all_features.begin(), all_features.end(), Index{0});

  auto make_leaf = [&](int id, const std::vector<Index>& members) {
    std::vector<SurvivalOutcome> ys;
    ys.reserve(members.size());
    for (Index i : members) ys.push_back(outcomes[static_cast<std::size_t>(i)]);
    StepCurve chf = nelson_aalen(ys);
    double sum = 0.0;
    for (double t : grid) sum += chf(t);
    tree.nodes[static_cast<std::size_t>(id)].leaf = static_cast<int>(tree.leaves.size());
    tree.leaves.push_back(std::move(chf));
    tree.leaf_grid_sum.push_back(sum);
  };

  NodeSurvival surv;
  SplitWorkspace ws;
  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    surv.build(outcomes, cur.samples);
    if (cur.samples.size() < static_cast<std::size_t>(params.min_samples) ||
        surv.events < static_cast<std::size_t>(params.min_events)) {
      make_leaf(cur.node, cur.samples);
      continue;
    }
    // partial Fisher-Yates for mtry distinct features
    for (std::size_t k = 0; k < mtry; ++k) {
      const std::size_t r = k + uniform_index(rng, all_features.size() - k);
      std::swap(all_features[k], all_features[r]);
    }
    std::vector<Index> candidates(all_features.begin(), all_features.begin() + static_cast<std::ptrdiff_t>(mtry));
    const auto split = best_split_in_node(x, surv, cur.samples, candidates, params.mia, ws);
    if (!split) {
      make_leaf(cur.node, cur.samples);
      continue;
    }
    TreeNode node;
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.route = split->route;
    std::vector<Index> lhs, rhs;
    bool any_missing = false;
    for (Index i : cur.samples) {
      any_missing = any_missing || is_missing(x(i, node.feature));
      (goes_left(node, x(i, node.feature)) ? lhs : rhs).push_back(i);
    }
    // unseen missing values follow the larger child
    if (!any_missing) node.route = lhs.size() >= rhs.size() ? MissingRoute::Left : MissingRoute::Right;
    node.left = static_cast<int>(tree.nodes.size());
    node.right = node.left + 1;
    tree.nodes[static_cast<std::size_t>(cur.node)] = node;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    stack.push_back({node.right, std::move(rhs)});
    stack.push_back({node.left, std::move(lhs)});
  }
  return tree;
}

}  // namespace

std::optional<SplitCandidate> find_best_split(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                                              std::span<const Index> samples, std::span<const Index> features,
                                              bool mia) {
  NodeSurvival node;
  node.build(outcomes, samples);
  SplitWorkspace ws;
  return best_split_in_node(x, node, samples, features, mia, ws);
}

int SurvivalTree::leaf_of(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int id = 0;
  for (;;) {
    const TreeNode& node = nodes[static_cast<std::size_t>(id)];
    if (node.leaf >= 0) return node.leaf;
    id = goes_left(node, row[node.feature]) ? node.left : node.right;
  }
}

FittedRsf fit_rsf(const Matrix& x, std::span<const SurvivalOutcome> outcomes, const RsfParams& params,
                  std::uint64_t seed) {
  if (x.rows() != static_cast<Index>(outcomes.size())) throw DataError("rsf: row count mismatch");
  if (params.trees < 1) throw DataError("rsf: need at least one tree");
  if (!params.mia && x.hasNaN()) throw DataError("rsf: missing value in training data");
  FittedRsf forest;
  forest.features = x.cols();
  forest.mia = params.mia;
  const EventTable tab = event_table(outcomes);
  forest.event_times = tab.times;

  const std::size_t p = static_cast<std::size_t>(x.cols());
  std::size_t mtry = params.mtry > 0 ? static_cast<std::size_t>(params.mtry)
                                     : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
  mtry = std::clamp<std::size_t>(mtry, 1, p);

  const std::size_t n = outcomes.size();
  const std::size_t T = static_cast<std::size_t>(params.trees);
  forest.trees.resize(T);
  forest.inbag.resize(T);
  parallel_for(T, params.jobs, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::uint32_t> counts(n, 0);
    std::vector<Index> sample(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = uniform_index(rng, n);
      sample[i] = static_cast<Index>(r);
      ++counts[r];
    }
    // time order lets every node summarize its survival data in one pass
    std::sort(sample.begin(), sample.end(), [&](Index a, Index b) {
      const double ta = outcomes[static_cast<std::size_t>(a)].time, tb = outcomes[static_cast<std::size_t>(b)].time;
      return ta < tb || (ta == tb && a < b);
    });
    forest.trees[t] = grow_tree(x, outcomes, std::move(sample), params, mtry, forest.event_times, rng);
    forest.inbag[t] = std::move(counts);
  });
  return forest;
}

Vector FittedRsf::predict_risk(const Matrix& x) const {
  if (x.cols() != features) throw DataError("rsf: column count mismatch");
  Vector risk = Vector::Zero(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (const auto& tree : trees) s += tree.leaf_grid_sum[static_cast<std::size_t>(tree.leaf_of(x.row(i)))];
    risk[i] = s / static_cast<double>(trees.size());
  }
  return risk;
}

std::vector<double> FittedRsf::cumulative_hazard(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                                 std::span<const double> grid) const {
  std::vector<double> h(grid.size(), 0.0);
  for (const auto& tree : trees) {
    const StepCurve& leaf = tree.leaves[static_cast<std::size_t>(tree.leaf_of(row))];
    for (std::size_t g = 0; g < grid.size(); ++g) h[g] += leaf(grid[g]);
  }
  for (double& v : h) v /= static_cast<double>(trees.size());
  return h;
}

Vector FittedRsf::oob_risk(const Matrix& train) const {
  if (train.cols() != features) throw DataError("rsf: column count mismatch");
  Vector risk(train.rows());
  for (Index i = 0; i < train.rows(); ++i) {
    double s = 0.0;
    std::size_t used = 0;
    for (std::size_t t = 0; t < trees.size(); ++t) {
      if (t < inbag.size() && static_cast<std::size_t>(i) < inbag[t].size() && inbag[t][static_cast<std::size_t>(i)] > 0) {
        continue;
      }
      s += trees[t].leaf_grid_sum[static_cast<std::size_t>(trees[t].leaf_of(train.row(i)))];
      ++used;
    }
    risk[i] = used ? s / static_cast<double>(used) : kMissing;
  }
  return risk;
}

}  // namespace msb
