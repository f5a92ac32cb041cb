#include "tdc/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tdc/error.hpp"
#include "tdc/parallel.hpp"

namespace tdc {

void validate(const ForestHyperparams& hp) {
  if (hp.n_trees < 1 || hp.max_depth < 1 || hp.min_samples_split < 2 ||
      !(hp.feature_fraction > 0.0 && hp.feature_fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidParams,
                "forest hyperparameters need n_trees >= 1, max_depth >= 1, "
                "min_samples_split >= 2, feature_fraction in (0,1]");
  }
}

void FeatureMatrix::add_row(std::span<const double> row) {
  if (row.size() != n_features_) {
    throw Error(ErrorKind::SchemaMismatch, "row has " + std::to_string(row.size()) +
                                               " features, expected " + std::to_string(n_features_));
  }
  values_.insert(values_.end(), row.begin(), row.end());
}

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const TreeNode& n = nodes_[i];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? i + 1 : static_cast<std::size_t>(n.right);
  }
  return nodes_[i].value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0;
  double sse = 0;  // left + right
};

class Builder {
 public:
  Builder(const FeatureMatrix& X, std::span<const double> y, const ForestHyperparams& hp, Rng& rng,
          std::vector<double>* importance)
      : X_(X), y_(y), hp_(hp), rng_(rng), importance_(importance) {
    std::size_t nf = X.features();
    n_candidates_ = std::min(nf, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(
                                                              hp.feature_fraction * static_cast<double>(nf) - 1e-12))));
    features_.resize(nf);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  void grow(std::vector<std::size_t>& rows, int depth) {
    const double m = static_cast<double>(rows.size());
    double mean = 0;
    for (auto r : rows) mean += y_[r];
    mean /= m;
    double sse = 0;
    for (auto r : rows) sse += (y_[r] - mean) * (y_[r] - mean);

    std::size_t self = nodes_.size();
    nodes_.push_back(TreeNode{-1, 0.0, mean, -1});
    if (depth >= hp_.max_depth || rows.size() < static_cast<std::size_t>(hp_.min_samples_split) ||
        sse <= 0.0) {
      return;
    }
    SplitChoice best = find_split(rows, mean, sse);
    if (best.feature < 0) return;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (X_.at(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(r);
    }
    if (importance_) (*importance_)[static_cast<std::size_t>(best.feature)] += std::max(0.0, sse - best.sse);
    nodes_[self].feature = best.feature;
    nodes_[self].threshold = best.threshold;
    rows.clear();
    rows.shrink_to_fit();
    grow(left, depth + 1);
    nodes_[self].right = static_cast<int>(nodes_.size());
    grow(right, depth + 1);
  }

  SplitChoice find_split(const std::vector<std::size_t>& rows, double mean, double parent_sse) {
    // Partial Fisher-Yates picks the candidate features; with every feature
    // selected the natural order is kept.
    if (n_candidates_ < features_.size()) {
      std::iota(features_.begin(), features_.end(), std::size_t{0});
      for (std::size_t i = 0; i < n_candidates_; ++i) {
        std::swap(features_[i], features_[i + uniform_index(rng_, features_.size() - i)]);
      }
    }
    SplitChoice best;
    best.sse = parent_sse - 1e-12 * std::max(1.0, parent_sse);
    const std::size_t m = rows.size();
    pairs_.resize(m);
    for (std::size_t c = 0; c < n_candidates_; ++c) {
      std::size_t f = features_[c];
      for (std::size_t i = 0; i < m; ++i) pairs_[i] = {X_.at(rows[i], f), y_[rows[i]] - mean};
      std::sort(pairs_.begin(), pairs_.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (pairs_.front().first == pairs_.back().first) continue;
      double total = 0, total_sq = 0;
      for (const auto& p : pairs_) {
        total += p.second;
        total_sq += p.second * p.second;
      }
      double left = 0, left_sq = 0;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        left += pairs_[i].second;
        left_sq += pairs_[i].second * pairs_[i].second;
        if (pairs_[i].first == pairs_[i + 1].first) continue;
        double nl = static_cast<double>(i + 1), nr = static_cast<double>(m - i - 1);
        double right = total - left, right_sq = total_sq - left_sq;
        double sse = std::max(0.0, left_sq - left * left / nl) + std::max(0.0, right_sq - right * right / nr);
        if (sse < best.sse) {
          double lo = pairs_[i].first, hi = pairs_[i + 1].first;
          double mid = lo + (hi - lo) / 2.0;
          best = {static_cast<int>(f), mid < hi ? mid : lo, sse};
        }
      }
    }
    return best;
  }

  const FeatureMatrix& X_;
  std::span<const double> y_;
  const ForestHyperparams& hp_;
  Rng& rng_;
  std::vector<double>* importance_;
  std::size_t n_candidates_ = 0;
  std::vector<std::size_t> features_;
  std::vector<std::pair<double, double>> pairs_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

RegressionTree train_tree(const FeatureMatrix& X, std::span<const double> y,
                          std::span<const std::size_t> rows, const ForestHyperparams& hp, Rng& rng,
                          std::vector<double>* importance) {
  validate(hp);
  if (rows.empty() || X.features() == 0) throw Error(ErrorKind::EmptyTraining, "no training rows");
  if (y.size() != X.rows()) throw Error(ErrorKind::InvalidArgument, "target length differs from row count");
  if (importance) importance->assign(X.features(), 0.0);
  Builder b(X, y, hp, rng, importance);
  return RegressionTree(b.build({rows.begin(), rows.end()}));
}

double RandomForest::predict(std::span<const double> x) const {
  double sum = 0;
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> RandomForest::importance() const {
  std::vector<double> out = importance_;
  double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (total > 0) {
    for (double& v : out) v /= total;
  }
  return out;
}

RandomForest train_forest(const FeatureMatrix& X, std::span<const double> y,
                          const ForestHyperparams& hp, unsigned jobs) {
  validate(hp);
  const std::size_t n = X.rows();
  if (n == 0) throw Error(ErrorKind::EmptyTraining, "no training rows");
  const auto n_trees = static_cast<std::size_t>(hp.n_trees);
  std::vector<RegressionTree> trees(n_trees);
  std::vector<std::vector<double>> importances(n_trees);
  parallel_for(n_trees, jobs, [&](std::size_t t) {
    Rng rng(derive_seed(hp.seed, t));
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = uniform_index(rng, n);
    trees[t] = train_tree(X, y, sample, hp, rng, &importances[t]);
  });
  std::vector<double> importance(X.features(), 0.0);
  for (const auto& imp : importances) {
    for (std::size_t f = 0; f < imp.size(); ++f) importance[f] += imp[f];
  }
  return RandomForest(std::move(trees), std::move(importance));
}

MapeResult mape(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty()) {
    throw Error(ErrorKind::InvalidArgument, "mape needs equal, non-empty inputs");
  }
  MapeResult r;
  double sum = 0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == 0.0) {
      ++r.excluded;
      continue;
    }
    sum += std::abs(y_true[i] - y_pred[i]) / std::abs(y_true[i]);
    ++counted;
  }
  if (counted == 0) throw Error(ErrorKind::AllTargetsZero, "every true value is zero");
  r.value = 100.0 * sum / static_cast<double>(counted);
  return r;
}

}  // namespace tdc
