#pragma once

#include "mrcp/nn/tensor.hpp"
#include "mrcp/rng.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mrcp::nn {

enum class Mode { train, inference };

/// Named view of one parameter (or buffer) array.
struct ParamRef {
  std::string name;
  std::span<double> values;
};

struct ConstParamRef {
  std::string name;
  std::span<const double> values;
};

/// Convolution along time with one input plane: (N,1,C,T) -> (N,D,C,T-K+1).
struct TemporalConv {
  std::size_t depth = 0;
  std::size_t kernel = 0;
  Buffer weight;  // depth x kernel
  Buffer bias;    // depth

  TemporalConv() = default;
  TemporalConv(std::size_t depth, std::size_t kernel);
  void init(Rng& rng);

  Tensor forward(const Tensor& x) const;
  /// Accumulates into d_weight/d_bias; returns the input gradient when asked
  /// (an empty tensor otherwise).
  Tensor backward(const Tensor& x, const Tensor& grad_out, std::span<double> d_weight, std::span<double> d_bias,
                  bool input_grad) const;
};

/// Convolution over the whole channel axis: (N,Din,C,T) -> (N,Dout,1,T).
struct SpatialConv {
  std::size_t depth_in = 0;
  std::size_t depth_out = 0;
  std::size_t channels = 0;
  Buffer weight;  // depth_out x depth_in x channels
  Buffer bias;    // depth_out

  SpatialConv() = default;
  SpatialConv(std::size_t depth_in, std::size_t depth_out, std::size_t channels);
  void init(Rng& rng);

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& grad_out, std::span<double> d_weight, std::span<double> d_bias) const;
};

/// Per-feature (axis 1) normalisation over batch, height and width.
struct BatchNorm {
  std::size_t features = 0;
  double momentum = 0.1;
  double eps = 1e-5;
  Buffer gamma;
  Buffer beta;
  Buffer running_mean;
  Buffer running_var;

  /// Values remembered from a train-mode forward pass.
  struct Cache {
    Tensor xhat;
    Buffer inv_std;
    Buffer batch_mean;
    Buffer batch_var;  // biased
    std::size_t count = 0;          // elements per feature
  };

  BatchNorm() = default;
  explicit BatchNorm(std::size_t features, double momentum = 0.1, double eps = 1e-5);

  /// Train mode uses batch statistics and fills `cache`; inference mode
  /// uses the running statistics.
  Tensor forward(const Tensor& x, Mode mode, Cache* cache) const;
  /// Train-mode gradient (through the batch statistics).
  Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<double> d_gamma, std::span<double> d_beta) const;
  /// Exponential running-statistics update from a train-mode pass
  /// (unbiased variance), clamped so running_var >= eps.
  void update_running(const Cache& cache);
};

struct Elu {
  double alpha = 1.0;

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& grad_out) const;
};

/// Non-overlapping mean over the last axis: (N,C,H,W) -> (N,C,H,W/k).
struct AvgPool {
  std::size_t kernel = 1;

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& grad_out) const;
};

/// Fully connected: (N,F,1,1) -> (N,O,1,1).
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  Buffer weight;  // out x in
  Buffer bias;    // out

  Dense() = default;
  Dense(std::size_t in, std::size_t out);
  void init(Rng& rng);

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& grad_out, std::span<double> d_weight, std::span<double> d_bias) const;
};

/// Row-wise softmax of (N,K,1,1) logits.
Tensor softmax(const Tensor& logits);

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
  Tensor probabilities;
};

/// Mean categorical cross-entropy of softmax(logits) against labels.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace mrcp::nn
