#include "mrcp/nn/layers.hpp"

#include "mrcp/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace mrcp::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using MapConstVec = Eigen::Map<const Eigen::VectorXd>;

void fill_uniform(Buffer& w, double fan_in, Rng& rng) {
  const double bound = std::sqrt(3.0 / fan_in);
  for (double& v : w) v = rng.uniform(-bound, bound);
}

void require_shape(bool ok, const std::string& layer, const Tensor& x, const std::string& expected) {
  if (!ok) raise(ErrorKind::ShapeMismatch, layer + " expects " + expected + ", got " + shape_string(x.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const std::string& layer) {
  if (a.shape() != b.shape()) {
    raise(ErrorKind::ShapeMismatch,
          layer + " gradient shape " + shape_string(b.shape()) + " does not match " + shape_string(a.shape()));
  }
}

}  // namespace

// ---- temporal convolution ----

TemporalConv::TemporalConv(std::size_t depth, std::size_t kernel)
    : depth(depth), kernel(kernel), weight(depth * kernel, 0.0), bias(depth, 0.0) {}

void TemporalConv::init(Rng& rng) {
  fill_uniform(weight, static_cast<double>(kernel), rng);
  std::fill(bias.begin(), bias.end(), 0.0);
}

Tensor TemporalConv::forward(const Tensor& x) const {
  require_shape(x.c() == 1 && x.w() >= kernel && kernel > 0, "temporal conv", x,
                "N x 1 x C x T with T >= " + std::to_string(kernel));
  const std::size_t n = x.n();
  const std::size_t ch = x.h();
  const std::size_t t = x.w();
  const std::size_t t1 = t - kernel + 1;
  Tensor out(n, depth, ch, t1);
  RowMat col(kernel, ch * t1);
  const MapConstMat w(weight.data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(kernel));
  const MapConstVec b(bias.data(), static_cast<Eigen::Index>(depth));
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = x.item(i).data();
    for (std::size_t k = 0; k < kernel; ++k) {
      double* dst = col.data() + k * ch * t1;
      for (std::size_t c = 0; c < ch; ++c) std::copy_n(src + c * t + k, t1, dst + c * t1);
    }
    MapMat y(out.item(i).data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(ch * t1));
    y.noalias() = w * col;
    y.colwise() += b;
  }
  return out;
}

Tensor TemporalConv::backward(const Tensor& x, const Tensor& grad_out, std::span<double> d_weight,
                              std::span<double> d_bias, bool input_grad) const {
  const std::size_t n = x.n();
  const std::size_t ch = x.h();
  const std::size_t t = x.w();
  const std::size_t t1 = t - kernel + 1;
  require_shape(grad_out.shape() == Tensor::Shape{n, depth, ch, t1}, "temporal conv backward", grad_out,
                shape_string({n, depth, ch, t1}));
  MapMat dw(d_weight.data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(kernel));
  MapVec db(d_bias.data(), static_cast<Eigen::Index>(depth));
  const MapConstMat w(weight.data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(kernel));
  Tensor dx = input_grad ? Tensor(x.shape()) : Tensor();
  RowMat col(kernel, ch * t1);
  RowMat dcol;
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = x.item(i).data();
    for (std::size_t k = 0; k < kernel; ++k) {
      double* dst = col.data() + k * ch * t1;
      for (std::size_t c = 0; c < ch; ++c) std::copy_n(src + c * t + k, t1, dst + c * t1);
    }
    const MapConstMat g(grad_out.item(i).data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(ch * t1));
    dw.noalias() += g * col.transpose();
    db += g.rowwise().sum();
    if (input_grad) {
      dcol.noalias() = w.transpose() * g;
      double* dst = dx.item(i).data();
      for (std::size_t k = 0; k < kernel; ++k) {
        const double* from = dcol.data() + k * ch * t1;
        for (std::size_t c = 0; c < ch; ++c) {
          for (std::size_t j = 0; j < t1; ++j) dst[c * t + j + k] += from[c * t1 + j];
        }
      }
    }
  }
  return dx;
}

// ---- spatial convolution ----

SpatialConv::SpatialConv(std::size_t depth_in, std::size_t depth_out, std::size_t channels)
    : depth_in(depth_in),
      depth_out(depth_out),
      channels(channels),
      weight(depth_out * depth_in * channels, 0.0),
      bias(depth_out, 0.0) {}

void SpatialConv::init(Rng& rng) {
  fill_uniform(weight, static_cast<double>(depth_in * channels), rng);
  std::fill(bias.begin(), bias.end(), 0.0);
}

Tensor SpatialConv::forward(const Tensor& x) const {
  require_shape(x.c() == depth_in && x.h() == channels, "spatial conv", x,
                "N x " + std::to_string(depth_in) + " x " + std::to_string(channels) + " x T");
  const std::size_t n = x.n();
  const std::size_t t = x.w();
  const std::size_t k = depth_in * channels;
  Tensor out(n, depth_out, 1, t);
  const MapConstMat w(weight.data(), static_cast<Eigen::Index>(depth_out), static_cast<Eigen::Index>(k));
  const MapConstVec b(bias.data(), static_cast<Eigen::Index>(depth_out));
  for (std::size_t i = 0; i < n; ++i) {
    const MapConstMat xi(x.item(i).data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
    MapMat y(out.item(i).data(), static_cast<Eigen::Index>(depth_out), static_cast<Eigen::Index>(t));
    y.noalias() = w * xi;
    y.colwise() += b;
  }
  return out;
}

Tensor SpatialConv::backward(const Tensor& x, const Tensor& grad_out, std::span<double> d_weight,
                             std::span<double> d_bias) const {
  const std::size_t n = x.n();
  const std::size_t t = x.w();
  const std::size_t k = depth_in * channels;
  require_shape(grad_out.shape() == Tensor::Shape{n, depth_out, 1, t}, "spatial conv backward", grad_out,
                shape_string({n, depth_out, 1, t}));
  MapMat dw(d_weight.data(), static_cast<Eigen::Index>(depth_out), static_cast<Eigen::Index>(k));
  MapVec db(d_bias.data(), static_cast<Eigen::Index>(depth_out));
  const MapConstMat w(weight.data(), static_cast<Eigen::Index>(depth_out), static_cast<Eigen::Index>(k));
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const MapConstMat xi(x.item(i).data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
    const MapConstMat g(grad_out.item(i).data(), static_cast<Eigen::Index>(depth_out), static_cast<Eigen::Index>(t));
    dw.noalias() += g * xi.transpose();
    db += g.rowwise().sum();
    MapMat dxi(dx.item(i).data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
    dxi.noalias() = w.transpose() * g;
  }
  return dx;
}

// ---- batch normalisation ----

BatchNorm::BatchNorm(std::size_t features, double momentum, double eps)
    : features(features),
      momentum(momentum),
      eps(eps),
      gamma(features, 1.0),
      beta(features, 0.0),
      running_mean(features, 0.0),
      running_var(features, 1.0) {}

Tensor BatchNorm::forward(const Tensor& x, Mode mode, Cache* cache) const {
  require_shape(x.c() == features, "batch norm", x, "N x " + std::to_string(features) + " x H x W");
  const std::size_t n = x.n();
  const std::size_t plane = x.h() * x.w();
  Tensor out(x.shape());
  if (mode == Mode::inference) {
    for (std::size_t f = 0; f < features; ++f) {
      const double scale = gamma[f] / std::sqrt(running_var[f] + eps);
      const double shift = beta[f] - running_mean[f] * scale;
      for (std::size_t i = 0; i < n; ++i) {
        const double* src = x.data() + (i * features + f) * plane;
        double* dst = out.data() + (i * features + f) * plane;
        for (std::size_t j = 0; j < plane; ++j) dst[j] = src[j] * scale + shift;
      }
    }
    return out;
  }

  if (cache == nullptr) raise(ErrorKind::ShapeMismatch, "batch norm train mode needs a cache");
  const std::size_t count = n * plane;
  cache->xhat = Tensor(x.shape());
  cache->inv_std.assign(features, 0.0);
  cache->batch_mean.assign(features, 0.0);
  cache->batch_var.assign(features, 0.0);
  cache->count = count;
  for (std::size_t f = 0; f < features; ++f) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* src = x.data() + (i * features + f) * plane;
      for (std::size_t j = 0; j < plane; ++j) sum += src[j];
    }
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* src = x.data() + (i * features + f) * plane;
      for (std::size_t j = 0; j < plane; ++j) ss += (src[j] - mean) * (src[j] - mean);
    }
    const double var = ss / static_cast<double>(count);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    cache->batch_mean[f] = mean;
    cache->batch_var[f] = var;
    cache->inv_std[f] = inv_std;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * features + f) * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        const double xh = (x.data()[off + j] - mean) * inv_std;
        cache->xhat.data()[off + j] = xh;
        out.data()[off + j] = gamma[f] * xh + beta[f];
      }
    }
  }
  return out;
}

Tensor BatchNorm::backward(const Cache& cache, const Tensor& grad_out, std::span<double> d_gamma,
                           std::span<double> d_beta) const {
  require_same(cache.xhat, grad_out, "batch norm");
  const std::size_t n = grad_out.n();
  const std::size_t plane = grad_out.h() * grad_out.w();
  const double m = static_cast<double>(cache.count);
  Tensor dx(grad_out.shape());
  for (std::size_t f = 0; f < features; ++f) {
    double sum_dy = 0.0;
    double sum_dy_xh = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * features + f) * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        sum_dy += grad_out.data()[off + j];
        sum_dy_xh += grad_out.data()[off + j] * cache.xhat.data()[off + j];
      }
    }
    d_gamma[f] += sum_dy_xh;
    d_beta[f] += sum_dy;
    const double k = gamma[f] * cache.inv_std[f] / m;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * features + f) * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        dx.data()[off + j] = k * (m * grad_out.data()[off + j] - sum_dy - cache.xhat.data()[off + j] * sum_dy_xh);
      }
    }
  }
  return dx;
}

void BatchNorm::update_running(const Cache& cache) {
  const double m = static_cast<double>(cache.count);
  const double correction = m > 1.0 ? m / (m - 1.0) : 1.0;
  for (std::size_t f = 0; f < features; ++f) {
    running_mean[f] = (1.0 - momentum) * running_mean[f] + momentum * cache.batch_mean[f];
    const double v = (1.0 - momentum) * running_var[f] + momentum * cache.batch_var[f] * correction;
    running_var[f] = std::max(v, eps);
  }
}

// ---- ELU ----

Tensor Elu::forward(const Tensor& x) const {
  Tensor out(x.shape());
  const double* src = x.data();
  double* dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = src[i] > 0.0 ? src[i] : alpha * std::expm1(src[i]);
  return out;
}

Tensor Elu::backward(const Tensor& x, const Tensor& grad_out) const {
  require_same(x, grad_out, "elu");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    dx.data()[i] = grad_out.data()[i] * (v > 0.0 ? 1.0 : alpha * std::exp(v));
  }
  return dx;
}

// ---- average pooling ----

Tensor AvgPool::forward(const Tensor& x) const {
  require_shape(kernel > 0 && x.w() >= kernel, "average pool", x, "width >= " + std::to_string(kernel));
  const std::size_t w_out = x.w() / kernel;
  const std::size_t rows = x.n() * x.c() * x.h();
  Tensor out(x.n(), x.c(), x.h(), w_out);
  const double inv = 1.0 / static_cast<double>(kernel);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = x.data() + r * x.w();
    double* dst = out.data() + r * w_out;
    for (std::size_t o = 0; o < w_out; ++o) {
      double s = 0.0;
      for (std::size_t k = 0; k < kernel; ++k) s += src[o * kernel + k];
      dst[o] = s * inv;
    }
  }
  return out;
}

Tensor AvgPool::backward(const Tensor& x, const Tensor& grad_out) const {
  const std::size_t w_out = x.w() / kernel;
  require_shape(grad_out.shape() == Tensor::Shape{x.n(), x.c(), x.h(), w_out}, "average pool backward", grad_out,
                shape_string({x.n(), x.c(), x.h(), w_out}));
  const std::size_t rows = x.n() * x.c() * x.h();
  Tensor dx(x.shape());
  const double inv = 1.0 / static_cast<double>(kernel);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* g = grad_out.data() + r * w_out;
    double* dst = dx.data() + r * x.w();
    for (std::size_t o = 0; o < w_out; ++o) {
      for (std::size_t k = 0; k < kernel; ++k) dst[o * kernel + k] = g[o] * inv;
    }
  }
  return dx;
}

// ---- dense ----

Dense::Dense(std::size_t in, std::size_t out) : in(in), out(out), weight(in * out, 0.0), bias(out, 0.0) {}

void Dense::init(Rng& rng) {
  fill_uniform(weight, static_cast<double>(in), rng);
  std::fill(bias.begin(), bias.end(), 0.0);
}

Tensor Dense::forward(const Tensor& x) const {
  require_shape(x.item_size() == in, "dense", x, "N x " + std::to_string(in) + " features");
  const auto n = static_cast<Eigen::Index>(x.n());
  Tensor y(x.n(), out, 1, 1);
  const MapConstMat xm(x.data(), n, static_cast<Eigen::Index>(in));
  const MapConstMat w(weight.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  const MapConstVec b(bias.data(), static_cast<Eigen::Index>(out));
  MapMat ym(y.data(), n, static_cast<Eigen::Index>(out));
  ym.noalias() = xm * w.transpose();
  ym.rowwise() += b.transpose();
  return y;
}

Tensor Dense::backward(const Tensor& x, const Tensor& grad_out, std::span<double> d_weight,
                       std::span<double> d_bias) const {
  require_shape(grad_out.n() == x.n() && grad_out.item_size() == out, "dense backward", grad_out,
                "N x " + std::to_string(out));
  const auto n = static_cast<Eigen::Index>(x.n());
  const MapConstMat xm(x.data(), n, static_cast<Eigen::Index>(in));
  const MapConstMat g(grad_out.data(), n, static_cast<Eigen::Index>(out));
  const MapConstMat w(weight.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  MapMat dw(d_weight.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  MapVec db(d_bias.data(), static_cast<Eigen::Index>(out));
  dw.noalias() += g.transpose() * xm;
  db += g.colwise().sum().transpose();
  Tensor dx(x.shape());
  MapMat dxm(dx.data(), n, static_cast<Eigen::Index>(in));
  dxm.noalias() = g * w;
  return dx;
}

// ---- softmax / loss ----

Tensor softmax(const Tensor& logits) {
  const std::size_t k = logits.item_size();
  Tensor p(logits.n(), k, 1, 1);
  for (std::size_t i = 0; i < logits.n(); ++i) {
    const auto z = logits.item(i);
    auto q = p.item(i);
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      q[j] = std::exp(z[j] - mx);
      s += q[j];
    }
    for (std::size_t j = 0; j < k; ++j) q[j] /= s;
  }
  return p;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (labels.size() != logits.n() || labels.empty()) {
    raise(ErrorKind::ShapeMismatch, "loss needs one label per batch item (" + std::to_string(labels.size()) +
                                        " labels, " + std::to_string(logits.n()) + " items)");
  }
  const std::size_t k = logits.item_size();
  LossResult r;
  r.probabilities = softmax(logits);
  r.grad_logits = Tensor(logits.n(), k, 1, 1);
  const double inv_n = 1.0 / static_cast<double>(logits.n());
  for (std::size_t i = 0; i < logits.n(); ++i) {
    const auto label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      raise(ErrorKind::ShapeMismatch, "label " + std::to_string(label) + " outside " + std::to_string(k) + " classes");
    }
    const auto z = logits.item(i);
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - mx);
    r.loss += (std::log(s) + mx - z[static_cast<std::size_t>(label)]) * inv_n;
    const auto p = r.probabilities.item(i);
    auto g = r.grad_logits.item(i);
    for (std::size_t j = 0; j < k; ++j) g[j] = (p[j] - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0)) * inv_n;
  }
  return r;
}

}  // namespace mrcp::nn
