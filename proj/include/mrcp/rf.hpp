#pragma once

#include "mrcp/core.hpp"
#include "mrcp/windows.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mrcp::rf {

/// One node of a flat tree. Internal nodes send x[feature] <= threshold to
/// `left`; leaves (feature < 0) index their class counts via `leaf`.
struct Node {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf = -1;
};

struct Tree {
  std::vector<Node> nodes;  // root at 0
  /// n_leaves x n_classes training counts.
  std::vector<std::uint32_t> leaf_counts;

  /// Leaf node index reached by x.
  std::size_t leaf_of(std::span<const double> x) const;
  /// Majority class of a leaf, ties to the lowest class.
  int leaf_class(std::size_t node, std::size_t n_classes) const;
};

struct RfOptions {
  std::size_t n_trees = 50;
  /// 0 selects round(sqrt(d)).
  std::size_t mtry = 0;
  std::size_t min_leaf = 1;
  /// 0 means unlimited depth.
  std::size_t max_depth = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct RfModel {
  std::vector<Tree> trees;
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::size_t mtry = 0;
  std::size_t min_leaf = 1;
  std::size_t max_depth = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::optional<double> oob_accuracy;
  std::size_t window_length = 0;
  std::size_t window_start = 0;
};

/// Draw multiset of one tree's bootstrap (n draws with replacement).
std::vector<std::size_t> bootstrap_sample(std::size_t n, std::uint64_t seed, std::size_t tree);

/// Grows the forest; trees are independent and built in parallel from
/// per-tree seed streams. `n_classes` 0 takes K from the labels.
RfModel fit_rf(const Eigen::MatrixXd& x, std::span<const int> labels, const RfOptions& opt = {},
               std::size_t n_classes = 0);

struct Prediction {
  int label = 0;
  std::vector<std::size_t> votes;
};

Prediction predict_rf(const RfModel& m, std::span<const double> x);
std::vector<int> predict_rf(const RfModel& m, const Eigen::MatrixXd& x);

/// Class with the most votes, ties to the lowest index.
int majority(std::span<const std::size_t> votes);

struct WindowFit {
  RfModel model;
  WindowSelection selection;
};

/// The sLDA window-selection procedure with a forest as the classifier.
WindowFit sliding_window_select(const EpochSet& e, std::size_t win_len, std::size_t step, const SplitPlan& split,
                                const RfOptions& opt, TrainingLog* log = nullptr);

std::string serialize(const RfModel& m);
RfModel deserialize(std::string_view bytes);
void save(const RfModel& m, const std::filesystem::path& path);
RfModel load(const std::filesystem::path& path);

}  // namespace mrcp::rf
