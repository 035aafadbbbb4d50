#include "mrcp/nn/train.hpp"

#include "mrcp/error.hpp"
#include "mrcp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace mrcp::nn {

namespace {

/// Activation buffers are large and short-lived; keep them on the heap
/// instead of a fresh mmap per allocation.
void keep_large_allocations() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
  });
#endif
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    raise(ErrorKind::InvalidConfig, "learning_rate must be finite and non-negative");
  }
  if (batch_size < 1) raise(ErrorKind::InvalidConfig, "batch_size must be at least 1");
  if (max_epochs < 1) raise(ErrorKind::InvalidConfig, "max_epochs must be at least 1");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    raise(ErrorKind::InvalidConfig, "holdout_fraction must be in [0, 1)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
    raise(ErrorKind::InvalidConfig, "Adam needs 0 <= beta < 1 and eps > 0");
  }
}

Adam::Adam(const CnnModel& model, const TrainConfig& cfg)
    : lr_(cfg.learning_rate), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.adam_eps) {
  for (const auto& p : model.parameters()) {
    m_.emplace_back(p.values.size(), 0.0);
    v_.emplace_back(p.values.size(), 0.0);
  }
}

void Adam::step(CnnModel& model, const Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k].values;
    const auto& g = grads.at(k);
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

std::pair<double, double> evaluate_cnn(const CnnModel& model, const EpochSet& e) {
  if (e.size() == 0) return {0.0, 0.0};
  const Tensor z = model.logits(to_tensor(e), Mode::inference);
  const auto r = softmax_cross_entropy(z, e.labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto p = r.probabilities.item(i);
    if (std::max_element(p.begin(), p.end()) - p.begin() == e.labels[i]) ++correct;
  }
  return {r.loss, static_cast<double>(correct) / static_cast<double>(e.size())};
}

namespace {

/// Stratified hold-back: round(f * n_c) trials per class, keeping at least
/// one training trial per class.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(const std::vector<int>& labels, double f,
                                                                           Rng rng) {
  std::vector<std::size_t> train;
  std::vector<std::size_t> held;
  const int n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  for (int c = 0; c < n_classes; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) idx.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(idx));
    auto n_held = static_cast<std::size_t>(std::llround(f * static_cast<double>(idx.size())));
    if (!idx.empty()) n_held = std::min(n_held, idx.size() - 1);
    held.insert(held.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_held));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_held), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  return {train, held};
}

}  // namespace

TrainResult train_cnn(const CnnSpec& spec, const EpochSet& train, const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  train.check_consistent();
  keep_large_allocations();
  if (train.size() < cfg.batch_size) {
    raise(ErrorKind::TooFewTrials, std::to_string(train.size()) + " trials for batch size " +
                                       std::to_string(cfg.batch_size));
  }
  if (std::set<int>(train.labels.begin(), train.labels.end()).size() < 2) {
    raise(ErrorKind::TooFewTrials, "training needs at least 2 classes present");
  }
  if (train.n_channels() != spec.spatial_kernel || train.n_samples() != spec.n_samples) {
    raise(ErrorKind::ShapeMismatch, "epochs are " + std::to_string(train.n_channels()) + " x " +
                                        std::to_string(train.n_samples()) + ", network expects " +
                                        std::to_string(spec.spatial_kernel) + " x " + std::to_string(spec.n_samples));
  }

  const Rng root(cfg.seed, 0x747261696e);
  auto [fit_idx, held_idx] = holdout_split(train.labels, cfg.holdout_fraction, root.split(1));
  const EpochSet held = train.subset(held_idx);
  const Tensor x_all = to_tensor(train, fit_idx);
  const std::size_t item = x_all.item_size();

  TrainResult result{CnnModel(spec, cfg.seed), {}};
  CnnModel& model = result.model;
  model.set_mode(Mode::train);
  Adam adam(model, cfg);
  CnnModel best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(fit_idx.size());
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs && !result.history.diverged; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = root.split(100 + epoch);
    rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();) {
      std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      if (order.size() - stop == 1) stop = order.size();  // no single-trial batches
      const std::size_t nb = stop - start;
      Tensor xb(nb, 1, x_all.h(), x_all.w());
      std::vector<int> yb(nb);
      for (std::size_t j = 0; j < nb; ++j) {
        const std::size_t k = order[start + j];
        std::copy_n(x_all.data() + k * item, item, xb.item(j).data());
        yb[j] = train.labels[fit_idx[k]];
      }
      start = stop;

      LossAndGradients lg;
      try {
        lg = model.loss_and_gradients(xb, yb);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteLoss) throw;
        result.history.diverged = true;
        break;
      }
      CnnModel before = model;
      adam.step(model, lg.gradients);
      model.update_running_stats(lg.bn_caches);
      if (!model.all_finite()) {
        model = std::move(before);
        result.history.diverged = true;
        break;
      }
      loss_sum += lg.loss * static_cast<double>(nb);
      seen += nb;
      for (std::size_t j = 0; j < nb; ++j) {
        const auto p = lg.probabilities.item(j);
        if (std::max_element(p.begin(), p.end()) - p.begin() == yb[j]) ++correct;
      }
    }
    if (result.history.diverged) break;

    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    if (held.size() > 0) std::tie(rec.holdout_loss, rec.holdout_accuracy) = evaluate_cnn(model, held);
    result.history.epochs.push_back(rec);

    const double criterion = held.size() > 0 ? rec.holdout_loss : rec.train_loss;
    if (criterion < best_loss) {
      best_loss = criterion;
      best = model;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience && cfg.early_stop_patience > 0) {
      result.history.stopped_early = true;
      break;
    }
  }
  if (!result.history.diverged) model = std::move(best);
  model.set_mode(Mode::inference);
  return result;
}

std::size_t majority_vote(const std::vector<std::size_t>& values) {
  if (values.empty()) raise(ErrorKind::EmptyInput, "majority vote over no values");
  std::vector<std::size_t> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::size_t best = sorted.front();
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (j - i > best_count) {
      best_count = j - i;
      best = sorted[i];
    }
    i = j;
  }
  return best;
}

}  // namespace mrcp::nn
