#include "mrcp/nn/tensor.hpp"

#include "mrcp/error.hpp"

namespace mrcp::nn {

Tensor::Tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, double fill)
    : shape_{n, c, h, w}, data_(n * c * h * w, fill) {}

Tensor::Tensor(Shape shape, double fill) : Tensor(shape[0], shape[1], shape[2], shape[3], fill) {}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape[0] * shape[1] * shape[2] * shape[3] != data_.size()) {
    raise(ErrorKind::ShapeMismatch, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  Tensor out = *this;
  out.shape_ = shape;
  return out;
}

std::string shape_string(const Tensor::Shape& shape) {
  return std::to_string(shape[0]) + "x" + std::to_string(shape[1]) + "x" + std::to_string(shape[2]) + "x" +
         std::to_string(shape[3]);
}

}  // namespace mrcp::nn
