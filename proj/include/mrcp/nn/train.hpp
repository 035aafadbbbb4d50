#pragma once

#include "mrcp/core.hpp"
#include "mrcp/nn/cnn.hpp"

#include <cstdint>
#include <vector>

namespace mrcp::nn {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 300;
  std::size_t early_stop_patience = 20;
  /// Share of training trials held back for model selection (0 selects on
  /// training loss).
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Throws InvalidConfig on out-of-range values.
  void validate() const;
};

/// Adam optimiser state for one model.
class Adam {
 public:
  Adam(const CnnModel& model, const TrainConfig& cfg);
  void step(CnnModel& model, const Gradients& grads);

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::uint64_t t_ = 0;
  std::vector<Buffer> m_;
  std::vector<Buffer> v_;
};

struct EpochRecord {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double holdout_loss = 0.0;
  double holdout_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch finished
  bool stopped_early = false;
  bool diverged = false;
};

struct TrainResult {
  CnnModel model;
  TrainHistory history;
};

/// Mini-batch training with early stopping on a stratified held-back part of
/// `train`. Returns the state with the lowest held-back loss, in inference
/// mode. A non-finite loss or parameter ends training with the last finite
/// state and history.diverged set.
TrainResult train_cnn(const CnnSpec& spec, const EpochSet& train, const TrainConfig& cfg);

/// Mean cross-entropy and accuracy of a model in inference mode.
std::pair<double, double> evaluate_cnn(const CnnModel& model, const EpochSet& e);

struct GridRanges {
  std::vector<std::size_t> temporal_kernel{20, 30, 40};
  std::vector<std::size_t> depth{20, 40};
  std::vector<std::size_t> pool_kernel{10, 15};
  std::vector<std::size_t> fc1_units{40, 80};
};

struct GridCell {
  std::size_t participant = 0;
  CnnSpec spec;
  double accuracy = 0.0;
  bool failed = false;
};

struct GridResult {
  CnnSpec spec;
  /// Winning combination per participant.
  std::vector<CnnSpec> winners;
  std::vector<GridCell> cells;
};

/// Scores every combination per participant by stratified k-fold accuracy,
/// then takes the per-parameter majority of the participants' winners
/// (ties to the smaller value). Cells run in parallel with independent
/// seeds; a cell that throws scores 0.
GridResult grid_search(const GridRanges& ranges, const std::vector<EpochSet>& datasets, const TrainConfig& cfg,
                       int folds = 5);

/// Per-parameter majority vote, ties to the smaller value.
std::size_t majority_vote(const std::vector<std::size_t>& values);

}  // namespace mrcp::nn
