#pragma once

#include "mrcp/core.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <mutex>
#include <span>
#include <vector>

namespace mrcp {

/// Trials x (channels * len) features; column t * channels + c holds channel
/// c at sample start + t. Throws WindowOutOfBounds.
Eigen::MatrixXd flatten_window(const EpochSet& e, std::size_t start, std::size_t len);

/// Window length in samples nearest to `seconds` at `fs`.
std::size_t window_samples(double seconds, double fs);

/// Candidate window starts 0, step, 2*step, ... for fully contained windows.
std::vector<std::size_t> window_starts(std::size_t n_samples, std::size_t len, std::size_t step);

/// Thread-safe record of the trial indices handed to every training call.
class TrainingLog {
 public:
  void record(std::span<const std::size_t> indices);
  std::size_t calls() const;
  /// Number of (call, index) pairs where a training call received one of `indices`.
  std::size_t appearances(std::span<const std::size_t> indices) const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::vector<std::size_t>> calls_;
};

/// Trains on x_train/y_train and returns predicted labels for x_test.
using FoldClassifier = std::function<std::vector<int>(const Eigen::MatrixXd& x_train, std::span<const int> y_train,
                                                      const Eigen::MatrixXd& x_test, std::size_t fold_id)>;

struct WindowSelection {
  std::size_t length = 0;
  std::size_t step = 0;
  std::vector<std::size_t> starts;
  /// Mean CV accuracy per start.
  std::vector<double> curve;
  std::size_t best_start = 0;
  /// Fold accuracies at best_start, repeat-major.
  std::vector<double> best_fold_accuracies;
  std::vector<bool> best_fold_failed;
};

/// Scores every window by repeated k-fold CV over the plan's training part
/// (validation trials are never touched). A fold whose classifier throws
/// scores 0. Ties go to the earliest start.
WindowSelection scan_windows(const EpochSet& e, std::size_t len, std::size_t step, const SplitPlan& plan,
                             const FoldClassifier& classify, TrainingLog* log = nullptr);

std::vector<int> labels_at(std::span<const int> labels, std::span<const std::size_t> indices);
Eigen::MatrixXd rows_at(const Eigen::MatrixXd& x, std::span<const std::size_t> indices);

}  // namespace mrcp
