#pragma once

#include "mrcp/core.hpp"
#include "mrcp/nn/layers.hpp"
#include "mrcp/nn/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mrcp::nn {

struct CnnSpec {
  std::size_t temporal_kernel = 30;
  std::size_t spatial_kernel = 58;  // = input channels
  std::size_t depth = 40;
  std::size_t pool_kernel = 15;
  std::size_t fc1_units = 80;
  std::size_t n_classes = 3;
  std::size_t n_samples = 80;  // input epoch length

  std::size_t conv_length() const { return n_samples - temporal_kernel + 1; }
  std::size_t pooled_length() const { return conv_length() / pool_kernel; }
  std::size_t flat_features() const { return depth * pooled_length(); }

  /// Throws InvalidSpec unless all sizes are positive and the pooled
  /// feature map is nonempty.
  void validate() const;
  bool operator==(const CnnSpec&) const = default;
};

/// Gradient arrays in the order of CnnModel::parameters().
using Gradients = std::vector<Buffer>;

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
  Tensor probabilities;
  std::vector<BatchNorm::Cache> bn_caches;  // bn1, bn2
};

/// The seven-layer network: temporal conv, spatial conv, pooling and two
/// dense layers, with batch-norm and ELU after each convolution.
class CnnModel {
 public:
  CnnModel() = default;
  /// Fan-in scaled uniform weights from Rng(seed); zero biases.
  CnnModel(const CnnSpec& spec, std::uint64_t seed);

  const CnnSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  /// Trainable arrays, in a fixed order.
  std::vector<ParamRef> parameters();
  std::vector<ConstParamRef> parameters() const;
  /// Batch-norm running statistics.
  std::vector<ParamRef> buffers();
  std::vector<ConstParamRef> buffers() const;

  /// Class probabilities (N x n_classes) for an (N,1,C,T) batch. Batch-norm
  /// uses running statistics in inference mode and batch statistics in
  /// train mode; the model is never modified.
  Tensor forward(const Tensor& x) const;
  /// Probabilities for one channels x samples epoch, inference mode.
  std::vector<double> predict_proba(const SignalMatrix& epoch) const;
  /// Class index per epoch, inference mode.
  std::vector<int> predict(const EpochSet& e) const;
  Tensor predict_proba(const EpochSet& e) const;

  /// Pre-softmax outputs, for the given mode.
  Tensor logits(const Tensor& x, Mode mode) const;

  /// Mean cross-entropy and train-mode gradients. Throws NonFiniteLoss.
  LossAndGradients loss_and_gradients(const Tensor& x, std::span<const int> labels) const;
  /// Running-statistics update from a train-mode pass.
  void update_running_stats(const std::vector<BatchNorm::Cache>& caches);

  /// Layer names and output shapes for an input shape, computed from the
  /// spec arithmetic alone.
  std::vector<std::pair<std::string, Tensor::Shape>> trace_shapes(const Tensor::Shape& input) const;

  bool all_finite() const;

  TemporalConv conv1;
  BatchNorm bn1;
  SpatialConv conv2;
  BatchNorm bn2;
  AvgPool pool;
  Dense fc1;
  Dense fc2;
  Elu elu;

 private:
  CnnSpec spec_;
  std::uint64_t seed_ = 0;
  Mode mode_ = Mode::inference;
};

/// Packs selected epochs into an (N,1,C,T) tensor.
Tensor to_tensor(const EpochSet& e, std::span<const std::size_t> indices);
Tensor to_tensor(const EpochSet& e);

}  // namespace mrcp::nn
