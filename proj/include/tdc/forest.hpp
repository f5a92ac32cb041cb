#pragma once

// Regression trees (CART, variance reduction) and bagged random forests.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tdc/rng.hpp"

namespace tdc {

struct ForestHyperparams {
  int n_trees = 50;
  int max_depth = 10;
  int min_samples_split = 2;
  /// Share of features examined at each split, rounded up.
  double feature_fraction = 1.0 / 3.0;
  std::uint64_t seed = 0;

  bool operator==(const ForestHyperparams&) const = default;
};

void validate(const ForestHyperparams& hp);

/// Dense row-major feature matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t n_features) : n_features_(n_features) {}

  void add_row(std::span<const double> row);
  std::size_t rows() const noexcept { return n_features_ ? values_.size() / n_features_ : 0; }
  std::size_t features() const noexcept { return n_features_; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * n_features_, n_features_};
  }
  double at(std::size_t r, std::size_t f) const { return values_[r * n_features_ + f]; }

 private:
  std::size_t n_features_ = 0;
  std::vector<double> values_;
};

/// Nodes are stored in preorder: a split node's left child directly follows
/// it, `right` indexes the right child.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  double value = 0;  // leaf prediction (mean target of its rows)
  int right = -1;

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_count() const;

  bool operator==(const RegressionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

/// Greedy CART on the given rows (indices into X / y, repeats allowed).
/// Thresholds are midpoints between consecutive distinct values. When
/// `importance` is given, each split adds its decrease of the summed squared
/// error to its feature's slot. Errors: EmptyTraining.
RegressionTree train_tree(const FeatureMatrix& X, std::span<const double> y,
                          std::span<const std::size_t> rows, const ForestHyperparams& hp, Rng& rng,
                          std::vector<double>* importance = nullptr);

class RandomForest {
 public:
  RandomForest() = default;
  RandomForest(std::vector<RegressionTree> trees, std::vector<double> importance)
      : trees_(std::move(trees)), importance_(std::move(importance)) {}

  /// Mean of the trees' predictions.
  double predict(std::span<const double> x) const;
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  /// Raw (unnormalized) decrease of squared error per feature.
  const std::vector<double>& raw_importance() const noexcept { return importance_; }
  /// Raw importance normalized to sum 1; all zeros when no split exists.
  std::vector<double> importance() const;

  bool operator==(const RandomForest&) const = default;

 private:
  std::vector<RegressionTree> trees_;
  std::vector<double> importance_;
};

/// n_trees trees on bootstrap resamples; tree t uses the stream
/// derive_seed(hp.seed, t). Errors: EmptyTraining, InvalidParams.
RandomForest train_forest(const FeatureMatrix& X, std::span<const double> y,
                          const ForestHyperparams& hp, unsigned jobs = 1);

struct MapeResult {
  double value = 0;       // percent
  std::size_t excluded = 0;  // rows with a zero true value
};

/// 100/n * sum |t - p| / |t| over rows with t != 0.
/// Errors: InvalidArgument (length mismatch / empty), AllTargetsZero.
MapeResult mape(std::span<const double> y_true, std::span<const double> y_pred);

}  // namespace tdc
