#pragma once

#include "mrcp/core.hpp"
#include "mrcp/windows.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mrcp::slda {

struct ShrinkageEstimate {
  double gamma = 1.0;
  /// True when the centred data carry no variance; gamma is then 1.
  bool degenerate = false;
};

/// Analytic shrinkage weight toward nu * I for class-centred data, from the
/// sample variances of the covariance entries; clipped to [0, 1].
ShrinkageEstimate estimate_shrinkage(const std::vector<Eigen::MatrixXd>& per_class);
ShrinkageEstimate estimate_shrinkage(const Eigen::MatrixXd& x, std::span<const int> labels);

struct SldaModel {
  Eigen::MatrixXd class_means;        // K x d
  Eigen::MatrixXd shrunk_covariance;  // d x d
  double gamma = 0.0;
  double nu = 0.0;
  bool degenerate = false;
  std::vector<double> priors;
  std::size_t window_length = 0;
  std::size_t window_start = 0;
  /// Sigma^-1 mu_k as columns (d x K) and the constant terms.
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  std::size_t dim() const { return static_cast<std::size_t>(class_means.cols()); }
  std::size_t n_classes() const { return static_cast<std::size_t>(class_means.rows()); }
};

/// Class means, pooled covariance S (divided by n - K), and
/// (1 - gamma) S + gamma nu I with nu = trace(S) / d. Labels index classes
/// 0..K-1; `n_classes` 0 takes K from the labels. Every class needs two
/// trials. `forced_gamma` bypasses the estimate.
SldaModel fit_slda(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t n_classes = 0,
                   std::optional<double> forced_gamma = std::nullopt);

struct Prediction {
  int label = 0;
  std::vector<double> scores;
};

/// argmax_k x' W_k + b_k with ties to the smallest class index.
Prediction predict_slda(const SldaModel& m, std::span<const double> x);
std::vector<int> predict_slda(const SldaModel& m, const Eigen::MatrixXd& x);

/// Discriminant weights through the Woodbury identity, without forming the
/// d x d covariance. Used for the many fits of a window scan.
struct Discriminant {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
  double gamma = 0.0;

  std::vector<int> predict(const Eigen::MatrixXd& x) const;
};
Discriminant fit_discriminant(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t n_classes);

struct WindowFit {
  SldaModel model;
  WindowSelection selection;
};

/// CV-scored scan over window starts, then a refit on all training trials
/// of the plan at the best start.
WindowFit sliding_window_select(const EpochSet& e, std::size_t win_len, std::size_t step, const SplitPlan& split,
                                TrainingLog* log = nullptr);

std::string serialize(const SldaModel& m);
SldaModel deserialize(std::string_view bytes);
void save(const SldaModel& m, const std::filesystem::path& path);
SldaModel load(const std::filesystem::path& path);

}  // namespace mrcp::slda
