#include "mrcp/nn/cnn.hpp"

#include "mrcp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mrcp::nn {

void CnnSpec::validate() const {
  if (temporal_kernel == 0 || spatial_kernel == 0 || depth == 0 || pool_kernel == 0 || fc1_units == 0 ||
      n_classes < 2 || n_samples == 0) {
    raise(ErrorKind::InvalidSpec, "all network sizes must be positive and n_classes >= 2");
  }
  if (temporal_kernel > n_samples || pooled_length() < 1) {
    raise(ErrorKind::InvalidSpec, "temporal kernel " + std::to_string(temporal_kernel) + " and pool " +
                                      std::to_string(pool_kernel) + " leave no features from " +
                                      std::to_string(n_samples) + " samples");
  }
}

CnnModel::CnnModel(const CnnSpec& spec, std::uint64_t seed)
    : conv1(spec.depth, spec.temporal_kernel),
      bn1(spec.depth),
      conv2(spec.depth, spec.depth, spec.spatial_kernel),
      bn2(spec.depth),
      pool{spec.pool_kernel},
      fc1((spec.validate(), spec.flat_features()), spec.fc1_units),
      fc2(spec.fc1_units, spec.n_classes),
      spec_(spec),
      seed_(seed) {
  Rng rng(seed, 0x636e6e);
  conv1.init(rng);
  conv2.init(rng);
  fc1.init(rng);
  fc2.init(rng);
}

std::vector<ParamRef> CnnModel::parameters() {
  return {{"conv1.weight", conv1.weight}, {"conv1.bias", conv1.bias}, {"bn1.gamma", bn1.gamma},
          {"bn1.beta", bn1.beta},         {"conv2.weight", conv2.weight}, {"conv2.bias", conv2.bias},
          {"bn2.gamma", bn2.gamma},       {"bn2.beta", bn2.beta},         {"fc1.weight", fc1.weight},
          {"fc1.bias", fc1.bias},         {"fc2.weight", fc2.weight},     {"fc2.bias", fc2.bias}};
}

std::vector<ConstParamRef> CnnModel::parameters() const {
  std::vector<ConstParamRef> out;
  for (auto& p : const_cast<CnnModel*>(this)->parameters()) out.push_back({p.name, p.values});
  return out;
}

std::vector<ParamRef> CnnModel::buffers() {
  return {{"bn1.running_mean", bn1.running_mean},
          {"bn1.running_var", bn1.running_var},
          {"bn2.running_mean", bn2.running_mean},
          {"bn2.running_var", bn2.running_var}};
}

std::vector<ConstParamRef> CnnModel::buffers() const {
  std::vector<ConstParamRef> out;
  for (auto& p : const_cast<CnnModel*>(this)->buffers()) out.push_back({p.name, p.values});
  return out;
}

namespace {

void require_input(const CnnSpec& spec, const Tensor& x) {
  if (x.c() != 1 || x.h() != spec.spatial_kernel || x.w() != spec.n_samples || x.n() == 0) {
    raise(ErrorKind::ShapeMismatch, "network expects N x 1 x " + std::to_string(spec.spatial_kernel) + " x " +
                                        std::to_string(spec.n_samples) + " input, got " + shape_string(x.shape()));
  }
}

}  // namespace

Tensor CnnModel::logits(const Tensor& x, Mode mode) const {
  require_input(spec_, x);
  BatchNorm::Cache c1;
  BatchNorm::Cache c2;
  auto* p1 = mode == Mode::train ? &c1 : nullptr;
  auto* p2 = mode == Mode::train ? &c2 : nullptr;
  Tensor h = elu.forward(bn1.forward(conv1.forward(x), mode, p1));
  h = elu.forward(bn2.forward(conv2.forward(h), mode, p2));
  h = pool.forward(h);
  h = h.reshaped({h.n(), h.item_size(), 1, 1});
  h = elu.forward(fc1.forward(h));
  return fc2.forward(h);
}

Tensor CnnModel::forward(const Tensor& x) const { return softmax(logits(x, mode_)); }

std::vector<double> CnnModel::predict_proba(const SignalMatrix& epoch) const {
  Tensor x(1, 1, static_cast<std::size_t>(epoch.rows()), static_cast<std::size_t>(epoch.cols()));
  std::copy_n(epoch.data(), x.size(), x.data());
  const Tensor p = softmax(logits(x, Mode::inference));
  return {p.data(), p.data() + p.size()};
}

Tensor CnnModel::predict_proba(const EpochSet& e) const {
  if (e.size() == 0) return Tensor(0, spec_.n_classes, 1, 1);
  return softmax(logits(to_tensor(e), Mode::inference));
}

std::vector<int> CnnModel::predict(const EpochSet& e) const {
  const Tensor p = predict_proba(e);
  std::vector<int> out(p.n());
  for (std::size_t i = 0; i < p.n(); ++i) {
    const auto row = p.item(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

LossAndGradients CnnModel::loss_and_gradients(const Tensor& x, std::span<const int> labels) const {
  require_input(spec_, x);
  LossAndGradients r;
  r.bn_caches.resize(2);
  for (const auto& p : parameters()) r.gradients.emplace_back(p.values.size(), 0.0);
  auto& g = r.gradients;

  const Tensor a1 = conv1.forward(x);
  const Tensor b1 = bn1.forward(a1, Mode::train, &r.bn_caches[0]);
  const Tensor e1 = elu.forward(b1);
  const Tensor a2 = conv2.forward(e1);
  const Tensor b2 = bn2.forward(a2, Mode::train, &r.bn_caches[1]);
  const Tensor e2 = elu.forward(b2);
  const Tensor p = pool.forward(e2);
  const Tensor f = p.reshaped({p.n(), p.item_size(), 1, 1});
  const Tensor h1 = fc1.forward(f);
  const Tensor e3 = elu.forward(h1);
  const Tensor z = fc2.forward(e3);
  auto loss = softmax_cross_entropy(z, labels);
  if (!std::isfinite(loss.loss)) raise(ErrorKind::NonFiniteLoss, "training loss is not finite");
  r.loss = loss.loss;
  r.probabilities = std::move(loss.probabilities);

  Tensor d = fc2.backward(e3, loss.grad_logits, g[10], g[11]);
  d = elu.backward(h1, d);
  d = fc1.backward(f, d, g[8], g[9]);
  d = pool.backward(e2, d.reshaped(p.shape()));
  d = elu.backward(b2, d);
  d = bn2.backward(r.bn_caches[1], d, g[6], g[7]);
  d = conv2.backward(e1, d, g[4], g[5]);
  d = elu.backward(b1, d);
  d = bn1.backward(r.bn_caches[0], d, g[2], g[3]);
  conv1.backward(x, d, g[0], g[1], false);
  return r;
}

void CnnModel::update_running_stats(const std::vector<BatchNorm::Cache>& caches) {
  bn1.update_running(caches.at(0));
  bn2.update_running(caches.at(1));
}

std::vector<std::pair<std::string, Tensor::Shape>> CnnModel::trace_shapes(const Tensor::Shape& input) const {
  if (input[1] != 1 || input[2] != spec_.spatial_kernel || input[3] != spec_.n_samples) {
    raise(ErrorKind::ShapeMismatch, "network expects N x 1 x " + std::to_string(spec_.spatial_kernel) + " x " +
                                        std::to_string(spec_.n_samples) + " input, got " + shape_string(input));
  }
  const std::size_t n = input[0];
  const std::size_t t1 = spec_.conv_length();
  const std::size_t tp = spec_.pooled_length();
  return {{"input", input},
          {"temporal_conv", {n, spec_.depth, spec_.spatial_kernel, t1}},
          {"spatial_conv", {n, spec_.depth, 1, t1}},
          {"avg_pool", {n, spec_.depth, 1, tp}},
          {"flatten", {n, spec_.flat_features(), 1, 1}},
          {"fc1", {n, spec_.fc1_units, 1, 1}},
          {"fc2", {n, spec_.n_classes, 1, 1}}};
}

bool CnnModel::all_finite() const {
  auto finite = [](const ConstParamRef& p) {
    return std::all_of(p.values.begin(), p.values.end(), [](double v) { return std::isfinite(v); });
  };
  const auto ps = parameters();
  const auto bs = buffers();
  return std::all_of(ps.begin(), ps.end(), finite) && std::all_of(bs.begin(), bs.end(), finite);
}

Tensor to_tensor(const EpochSet& e, std::span<const std::size_t> indices) {
  if (indices.empty()) return {};
  const std::size_t ch = e.n_channels();
  const std::size_t t = e.n_samples();
  Tensor x(indices.size(), 1, ch, t);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& m = e.trials.at(indices[i]);
    if (static_cast<std::size_t>(m.rows()) != ch || static_cast<std::size_t>(m.cols()) != t) {
      raise(ErrorKind::ShapeMismatch, "trial " + std::to_string(indices[i]) + " shape differs from the set");
    }
    std::copy_n(m.data(), ch * t, x.item(i).data());
  }
  return x;
}

Tensor to_tensor(const EpochSet& e) {
  std::vector<std::size_t> all(e.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return to_tensor(e, all);
}

}  // namespace mrcp::nn
