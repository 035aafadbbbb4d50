#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mrcp::nn {

/// Contiguous storage aligned for Eigen vector loads.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

/// Dense 4-D array in (batch, feature, height, width) order, row-major.
class Tensor {
 public:
  using Shape = std::array<std::size_t, 4>;

  Tensor() = default;
  Tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, double fill = 0.0);
  explicit Tensor(Shape shape, double fill = 0.0);

  const Shape& shape() const { return shape_; }
  std::size_t n() const { return shape_[0]; }
  std::size_t c() const { return shape_[1]; }
  std::size_t h() const { return shape_[2]; }
  std::size_t w() const { return shape_[3]; }
  std::size_t size() const { return data_.size(); }
  /// Elements per batch item.
  std::size_t item_size() const { return shape_[1] * shape_[2] * shape_[3]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> item(std::size_t i) { return {data_.data() + i * item_size(), item_size()}; }
  std::span<const double> item(std::size_t i) const { return {data_.data() + i * item_size(), item_size()}; }

  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Same data, new shape of equal size.
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_{0, 0, 0, 0};
  Buffer data_;
};

std::string shape_string(const Tensor::Shape& shape);

}  // namespace mrcp::nn
