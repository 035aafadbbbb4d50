#include "mrcp/windows.hpp"

#include "mrcp/error.hpp"
#include "mrcp/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace mrcp {

Eigen::MatrixXd flatten_window(const EpochSet& e, std::size_t start, std::size_t len) {
  const std::size_t n_samples = e.n_samples();
  if (len == 0 || start + len > n_samples) {
    raise(ErrorKind::WindowOutOfBounds, "window [" + std::to_string(start) + ", " + std::to_string(start + len) +
                                            ") outside " + std::to_string(n_samples) + "-sample epochs");
  }
  const std::size_t ch = e.n_channels();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(e.size()), static_cast<Eigen::Index>(ch * len));
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto& m = e.trials[i];
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < ch; ++c) {
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t * ch + c)) =
            m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(start + t));
      }
    }
  }
  return x;
}

std::size_t window_samples(double seconds, double fs) {
  return static_cast<std::size_t>(std::llround(seconds * fs));
}

std::vector<std::size_t> window_starts(std::size_t n_samples, std::size_t len, std::size_t step) {
  if (step == 0) raise(ErrorKind::InvalidConfig, "window step must be positive");
  std::vector<std::size_t> out;
  for (std::size_t s = 0; len > 0 && s + len <= n_samples; s += step) out.push_back(s);
  return out;
}

void TrainingLog::record(std::span<const std::size_t> indices) {
  std::lock_guard lock(mutex_);
  calls_.emplace_back(indices.begin(), indices.end());
}

std::size_t TrainingLog::calls() const {
  std::lock_guard lock(mutex_);
  return calls_.size();
}

std::size_t TrainingLog::appearances(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> probe(indices.begin(), indices.end());
  std::sort(probe.begin(), probe.end());
  std::lock_guard lock(mutex_);
  std::size_t hits = 0;
  for (const auto& call : calls_) {
    for (auto i : call) hits += std::binary_search(probe.begin(), probe.end(), i) ? 1 : 0;
  }
  return hits;
}

std::vector<int> labels_at(std::span<const int> labels, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels[i]);
  return out;
}

Eigen::MatrixXd rows_at(const Eigen::MatrixXd& x, std::span<const std::size_t> indices) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), x.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(indices[i]));
  return out;
}

WindowSelection scan_windows(const EpochSet& e, std::size_t len, std::size_t step, const SplitPlan& plan,
                             const FoldClassifier& classify, TrainingLog* log) {
  WindowSelection sel;
  sel.length = len;
  sel.step = step;
  sel.starts = window_starts(e.n_samples(), len, step);
  if (sel.starts.empty()) {
    raise(ErrorKind::WindowOutOfBounds,
          std::to_string(len) + "-sample window does not fit " + std::to_string(e.n_samples()) + "-sample epochs");
  }
  const std::size_t n_folds = plan.n_repeats() * plan.n_folds();
  if (n_folds == 0) raise(ErrorKind::InvalidConfig, "split plan has no folds");

  std::vector<std::vector<std::size_t>> fold_train(n_folds);
  for (std::size_t k = 0; k < n_folds; ++k) fold_train[k] = plan.fold_training(k / plan.n_folds(), k % plan.n_folds());

  std::vector<double> acc(sel.starts.size() * n_folds, 0.0);
  std::vector<char> failed(acc.size(), 0);
  parallel_for(sel.starts.size(), [&](std::size_t w) {
    const Eigen::MatrixXd x = flatten_window(e, sel.starts[w], len);
    for (std::size_t k = 0; k < n_folds; ++k) {
      const auto& train = fold_train[k];
      const auto& test = plan.fold_assignments[k / plan.n_folds()][k % plan.n_folds()];
      if (log != nullptr) log->record(train);
      try {
        const auto y_train = labels_at(e.labels, train);
        const auto pred = classify(rows_at(x, train), y_train, rows_at(x, test), k);
        std::size_t hit = 0;
        for (std::size_t i = 0; i < test.size(); ++i) hit += pred.at(i) == e.labels[test[i]] ? 1 : 0;
        acc[w * n_folds + k] = test.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(test.size());
      } catch (const Error&) {
        failed[w * n_folds + k] = 1;
      }
    }
  });

  sel.curve.resize(sel.starts.size());
  std::size_t best = 0;
  for (std::size_t w = 0; w < sel.starts.size(); ++w) {
    double s = 0.0;
    for (std::size_t k = 0; k < n_folds; ++k) s += acc[w * n_folds + k];
    sel.curve[w] = s / static_cast<double>(n_folds);
    if (sel.curve[w] > sel.curve[best]) best = w;
  }
  sel.best_start = sel.starts[best];
  sel.best_fold_accuracies.assign(acc.begin() + static_cast<std::ptrdiff_t>(best * n_folds),
                                  acc.begin() + static_cast<std::ptrdiff_t>((best + 1) * n_folds));
  for (std::size_t k = 0; k < n_folds; ++k) sel.best_fold_failed.push_back(failed[best * n_folds + k] != 0);
  return sel;
}

}  // namespace mrcp
