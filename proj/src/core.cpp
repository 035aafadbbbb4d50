#include "mrcp/core.hpp"

#include "mrcp/error.hpp"
#include "mrcp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace mrcp {

std::vector<Violation> validate_recording(const Recording& r) {
  std::vector<Violation> out;
  if (r.data.rows() < 1) out.push_back({"data", "n_channels must be >= 1"});
  if (r.data.cols() < 1) out.push_back({"data", "n_samples must be >= 1"});
  if (!(r.fs > 0.0) || !std::isfinite(r.fs)) {
    out.push_back({"fs", "sampling rate must be positive and finite, got " + std::to_string(r.fs)});
  }
  if (r.channel_labels.size() != r.n_channels()) {
    out.push_back({"channel_labels", "expected " + std::to_string(r.n_channels()) + " labels, got " +
                                         std::to_string(r.channel_labels.size())});
  }
  std::set<std::string> seen;
  for (const auto& label : r.channel_labels) {
    if (!seen.insert(label).second) out.push_back({"channel_labels", "duplicate label '" + label + "'"});
  }
  for (Eigen::Index c = 0; c < r.data.rows(); ++c) {
    for (Eigen::Index t = 0; t < r.data.cols(); ++t) {
      if (!std::isfinite(r.data(c, t))) {
        out.push_back({"data", "non-finite sample at (channel " + std::to_string(c) + ", sample " +
                                   std::to_string(t) + ")"});
      }
    }
  }
  return out;
}

void require_valid(const Recording& r) {
  const auto violations = validate_recording(r);
  if (!violations.empty()) {
    raise(ErrorKind::InvalidRecording, violations.front().field + ": " + violations.front().detail);
  }
}

std::string_view to_string(Movement m) {
  switch (m) {
    case Movement::touch: return "touch";
    case Movement::grasp: return "grasp";
    case Movement::palmar: return "palmar";
    case Movement::lateral: return "lateral";
  }
  return "unknown";
}

std::optional<Movement> parse_movement(std::string_view name) {
  for (Movement m : {Movement::touch, Movement::grasp, Movement::palmar, Movement::lateral}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<Violation> validate_events(const EventList& ev, std::size_t n_samples, double fs) {
  std::vector<Violation> out;
  const auto n = static_cast<std::int64_t>(n_samples);
  for (std::size_t i = 0; i < ev.onsets.size(); ++i) {
    const auto s = ev.onsets[i].sample;
    if (s < 0 || s >= n) out.push_back({"onsets", "onset " + std::to_string(i) + " outside recording"});
    if (i > 0 && s <= ev.onsets[i - 1].sample) {
      out.push_back({"onsets", "onset " + std::to_string(i) + " not strictly increasing"});
    }
  }
  const auto guard_pre = static_cast<std::int64_t>(std::llround(kGuardPreSeconds * fs));
  const auto guard_post = static_cast<std::int64_t>(std::llround(kGuardPostSeconds * fs));
  for (std::size_t i = 0; i < ev.rest_intervals.size(); ++i) {
    const auto& iv = ev.rest_intervals[i];
    const std::string name = "rest interval " + std::to_string(i);
    if (iv.start < 0 || iv.end > n || iv.start >= iv.end) {
      out.push_back({"rest_intervals", name + " empty or outside recording"});
    }
    if (i > 0 && iv.start < ev.rest_intervals[i - 1].end) {
      out.push_back({"rest_intervals", name + " overlaps or precedes its predecessor"});
    }
    for (const auto& onset : ev.onsets) {
      const auto lo = onset.sample - guard_pre;
      const auto hi = onset.sample + guard_post;
      if (iv.start < hi && lo < iv.end) {
        out.push_back({"rest_intervals", name + " overlaps the movement window of onset at sample " +
                                             std::to_string(onset.sample)});
      }
    }
  }
  return out;
}

std::size_t EpochSet::n_channels() const {
  return trials.empty() ? channel_labels.size() : static_cast<std::size_t>(trials.front().rows());
}

std::size_t EpochSet::n_samples() const {
  return trials.empty() ? 0 : static_cast<std::size_t>(trials.front().cols());
}

EpochSet EpochSet::subset(std::span<const std::size_t> indices) const {
  EpochSet out;
  out.class_names = class_names;
  out.channel_labels = channel_labels;
  out.fs = fs;
  out.t0_offset = t0_offset;
  out.trials.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    if (i >= trials.size()) raise(ErrorKind::DimensionMismatch, "trial index out of range");
    out.trials.push_back(trials[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

void EpochSet::check_consistent() const {
  if (labels.size() != trials.size()) raise(ErrorKind::ShapeMismatch, "labels/trials length mismatch");
  for (const auto& t : trials) {
    if (t.rows() != trials.front().rows() || t.cols() != trials.front().cols()) {
      raise(ErrorKind::ShapeMismatch, "trials differ in shape");
    }
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= class_names.size()) {
      raise(ErrorKind::ShapeMismatch, "label " + std::to_string(l) + " has no class name");
    }
  }
}

EpochSet concat(const EpochSet& a, const EpochSet& b) {
  if (a.size() > 0 && b.size() > 0) {
    if (a.fs != b.fs) raise(ErrorKind::ShapeMismatch, "cannot concatenate epochs at different rates");
    if (a.n_channels() != b.n_channels() || a.n_samples() != b.n_samples()) {
      raise(ErrorKind::ShapeMismatch, "cannot concatenate epochs of different shape");
    }
  }
  EpochSet out;
  out.fs = a.size() > 0 ? a.fs : b.fs;
  out.t0_offset = a.size() > 0 ? a.t0_offset : b.t0_offset;
  out.channel_labels = a.channel_labels.empty() ? b.channel_labels : a.channel_labels;
  out.class_names = a.class_names;
  std::vector<int> remap(b.class_names.size());
  for (std::size_t k = 0; k < b.class_names.size(); ++k) {
    auto it = std::find(out.class_names.begin(), out.class_names.end(), b.class_names[k]);
    if (it == out.class_names.end()) {
      out.class_names.push_back(b.class_names[k]);
      it = out.class_names.end() - 1;
    }
    remap[k] = static_cast<int>(it - out.class_names.begin());
  }
  out.trials = a.trials;
  out.labels = a.labels;
  for (std::size_t i = 0; i < b.size(); ++i) {
    out.trials.push_back(b.trials[i]);
    out.labels.push_back(remap[static_cast<std::size_t>(b.labels[i])]);
  }
  return out;
}

std::vector<std::size_t> SplitPlan::fold_training(std::size_t repeat, std::size_t fold) const {
  const auto& held = fold_assignments.at(repeat).at(fold);
  std::vector<std::size_t> sorted_held(held.begin(), held.end());
  std::sort(sorted_held.begin(), sorted_held.end());
  std::vector<std::size_t> out;
  out.reserve(train_indices.size());
  for (auto i : train_indices) {
    if (!std::binary_search(sorted_held.begin(), sorted_held.end(), i)) out.push_back(i);
  }
  return out;
}

namespace {

std::map<int, std::vector<std::size_t>> group_by_class(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}

}  // namespace

SplitPlan make_split_plan(std::span<const int> labels, std::uint64_t seed, const SplitConfig& cfg) {
  if (cfg.folds < 2 || cfg.repeats < 1 || !(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0)) {
    raise(ErrorKind::InvalidConfig, "split needs folds >= 2, repeats >= 1, 0 <= validation_fraction < 1");
  }
  auto groups = group_by_class(labels);
  for (const auto& [label, members] : groups) {
    if (members.size() < static_cast<std::size_t>(cfg.folds)) {
      raise(ErrorKind::TooFewTrials, "class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                                         " trials; stratified " + std::to_string(cfg.folds) +
                                         "-fold splitting needs at least " + std::to_string(cfg.folds));
    }
  }

  const Rng base(seed, 0);
  SplitPlan plan;
  plan.seed = seed;

  // Per-class validation quotas by largest remainder, summing to round(f * N).
  const double total = static_cast<double>(labels.size());
  const auto n_validation = static_cast<std::size_t>(std::llround(cfg.validation_fraction * total));
  struct Quota {
    int label;
    std::size_t count;
    double remainder;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [label, members] : groups) {
    const double ideal = static_cast<double>(members.size()) * static_cast<double>(n_validation) / total;
    const auto whole = static_cast<std::size_t>(std::floor(ideal));
    quotas.push_back({label, whole, ideal - static_cast<double>(whole)});
    assigned += whole;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
  for (std::size_t k = 0; assigned < n_validation; ++k, ++assigned) quotas[order[k % order.size()]].count += 1;

  Rng holdout_rng = base.split(1);
  std::map<int, std::vector<std::size_t>> train_by_class;
  for (const auto& q : quotas) {
    auto members = groups[q.label];
    holdout_rng.shuffle(std::span(members));
    plan.validation_indices.insert(plan.validation_indices.end(), members.begin(),
                                   members.begin() + static_cast<std::ptrdiff_t>(q.count));
    auto& train = train_by_class[q.label];
    train.assign(members.begin() + static_cast<std::ptrdiff_t>(q.count), members.end());
    std::sort(train.begin(), train.end());
    plan.train_indices.insert(plan.train_indices.end(), train.begin(), train.end());
  }
  std::sort(plan.train_indices.begin(), plan.train_indices.end());
  std::sort(plan.validation_indices.begin(), plan.validation_indices.end());

  const auto n_folds = static_cast<std::size_t>(cfg.folds);
  for (int r = 0; r < cfg.repeats; ++r) {
    Rng rng = base.split(100 + static_cast<std::uint64_t>(r));
    std::vector<std::vector<std::size_t>> folds(n_folds);
    std::size_t offset = 0;
    for (auto& [label, members] : train_by_class) {
      auto shuffled = members;
      rng.shuffle(std::span(shuffled));
      for (std::size_t i = 0; i < shuffled.size(); ++i) folds[(offset + i) % n_folds].push_back(shuffled[i]);
      offset = (offset + shuffled.size()) % n_folds;
    }
    for (auto& fold : folds) rng.shuffle(std::span(fold));
    plan.fold_assignments.push_back(std::move(folds));
  }
  return plan;
}

std::vector<std::string> check_split_plan(const SplitPlan& plan, std::span<const int> labels) {
  std::vector<std::string> problems;
  const std::size_t n = labels.size();
  std::vector<int> where(n, 0);
  for (auto i : plan.train_indices) {
    if (i >= n) {
      problems.push_back("train index " + std::to_string(i) + " out of range");
      continue;
    }
    where[i] += 1;
  }
  for (auto i : plan.validation_indices) {
    if (i >= n) {
      problems.push_back("validation index " + std::to_string(i) + " out of range");
      continue;
    }
    where[i] += 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (where[i] != 1) problems.push_back("trial " + std::to_string(i) + " appears " + std::to_string(where[i]) + " times");
  }
  if (!problems.empty()) return problems;

  auto count = [&](std::span<const std::size_t> idx) {
    std::map<int, double> c;
    for (auto i : idx) c[labels[i]] += 1.0;
    return c;
  };
  const auto all = group_by_class(labels);
  const auto val_counts = count(plan.validation_indices);
  const auto train_counts = count(plan.train_indices);
  const double frac = static_cast<double>(plan.validation_indices.size()) / static_cast<double>(n);
  for (const auto& [label, members] : all) {
    const double expected = frac * static_cast<double>(members.size());
    const double got = val_counts.contains(label) ? val_counts.at(label) : 0.0;
    if (std::abs(got - expected) > 1.0) {
      problems.push_back("validation holds " + std::to_string(got) + " trials of class " + std::to_string(label) +
                         ", expected about " + std::to_string(expected));
    }
  }

  std::vector<std::size_t> train_sorted = plan.train_indices;
  std::sort(train_sorted.begin(), train_sorted.end());
  for (std::size_t r = 0; r < plan.fold_assignments.size(); ++r) {
    const auto& folds = plan.fold_assignments[r];
    std::vector<std::size_t> merged;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      merged.insert(merged.end(), folds[f].begin(), folds[f].end());
      const auto fold_counts = count(folds[f]);
      for (const auto& [label, c] : train_counts) {
        const double got = fold_counts.contains(label) ? fold_counts.at(label) : 0.0;
        if (std::abs(got - c / static_cast<double>(folds.size())) > 1.0) {
          std::ostringstream msg;
          msg << "repeat " << r << " fold " << f << " holds " << got << " trials of class " << label;
          problems.push_back(msg.str());
        }
      }
    }
    std::sort(merged.begin(), merged.end());
    if (merged != train_sorted) {
      problems.push_back("repeat " + std::to_string(r) + " folds do not partition the training set");
    }
  }
  return problems;
}

}  // namespace mrcp
