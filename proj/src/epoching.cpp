#include "mrcp/epoching.hpp"

#include "mrcp/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mrcp::epoching {

namespace {

std::int64_t to_samples(double seconds, double fs) { return static_cast<std::int64_t>(std::llround(seconds * fs)); }

SignalMatrix slice(const Recording& r, std::int64_t start, std::int64_t length) {
  return r.data.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(length));
}

}  // namespace

EpochSet extract_epochs(const Recording& r, const EventList& ev, double t_pre, double t_post) {
  if (!(t_post > t_pre)) raise(ErrorKind::InvalidConfig, "epoch window needs t_post > t_pre");
  const std::int64_t pre = to_samples(t_pre, r.fs);
  const std::int64_t post = to_samples(t_post, r.fs);
  const std::int64_t length = to_samples(t_post - t_pre, r.fs);
  const auto n = static_cast<std::int64_t>(r.n_samples());

  std::set<Movement> present;
  for (const auto& o : ev.onsets) present.insert(o.label);

  EpochSet out;
  out.fs = r.fs;
  out.t0_offset = to_samples(-t_pre, r.fs);
  out.channel_labels = r.channel_labels;
  for (Movement m : present) out.class_names.emplace_back(to_string(m));
  for (const auto& o : ev.onsets) {
    const std::int64_t start = o.sample + pre;
    if (start < 0 || o.sample + post > n || start + length > n) {
      raise(ErrorKind::OnsetOutOfBounds, "onset at sample " + std::to_string(o.sample) + " needs [" +
                                             std::to_string(start) + ", " + std::to_string(start + length) +
                                             ") inside a recording of " + std::to_string(n) + " samples");
    }
    out.trials.push_back(slice(r, start, length));
    const auto cls = std::distance(present.begin(), present.find(o.label));
    out.labels.push_back(static_cast<int>(cls));
  }
  return out;
}

EpochSet extract_rest_epochs(const Recording& r, const EventList& ev, double epoch_len, std::size_t n_target) {
  const std::int64_t length = to_samples(epoch_len, r.fs);
  if (length < 1) raise(ErrorKind::InvalidConfig, "rest epoch length must be at least one sample");
  for (const auto& v : validate_events(ev, r.n_samples(), r.fs)) {
    if (v.field == "rest_intervals") raise(ErrorKind::InvalidEvents, v.detail);
  }
  EpochSet out;
  out.fs = r.fs;
  out.t0_offset = to_samples(kGuardPreSeconds, r.fs);
  out.channel_labels = r.channel_labels;
  out.class_names = {"rest"};
  std::size_t available = 0;
  for (const auto& iv : ev.rest_intervals) {
    for (std::int64_t start = iv.start; start + length <= iv.end; start += length) {
      ++available;
      if (out.trials.size() < n_target) {
        out.trials.push_back(slice(r, start, length));
        out.labels.push_back(0);
      }
    }
  }
  if (out.trials.size() < n_target) {
    raise(ErrorKind::InsufficientRestData, "rest intervals hold " + std::to_string(available) + " windows of " +
                                               std::to_string(length) + " samples, " + std::to_string(n_target) +
                                               " requested");
  }
  return out;
}

EventList rescale_events(const EventList& ev, double from_fs, double to_fs) {
  const double ratio = to_fs / from_fs;
  EventList out;
  for (const auto& o : ev.onsets) {
    out.onsets.push_back({static_cast<std::int64_t>(std::llround(static_cast<double>(o.sample) * ratio)), o.label});
  }
  for (const auto& iv : ev.rest_intervals) {
    const auto start = static_cast<std::int64_t>(std::ceil(static_cast<double>(iv.start) * ratio - 1e-9));
    const auto end = static_cast<std::int64_t>(std::floor(static_cast<double>(iv.end) * ratio + 1e-9));
    if (end > start) out.rest_intervals.push_back({start, end});
  }
  return out;
}

std::string to_string(RejectReason reason) {
  return reason == RejectReason::amplitude ? "amplitude" : "kurtosis";
}

double excess_kurtosis(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : x) {
    const double d = (v - mean) * (v - mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

std::pair<EpochSet, RejectionReport> reject_outliers(const EpochSet& e, double amp_limit, double kurt_factor) {
  if (e.size() < 2) raise(ErrorKind::TooFewTrials, "outlier rejection needs at least 2 trials");
  e.check_consistent();
  const std::size_t n_trials = e.size();
  const std::size_t n_channels = e.n_channels();

  std::vector<std::vector<double>> kurt(n_trials, std::vector<double>(n_channels));
  for (std::size_t i = 0; i < n_trials; ++i) {
    for (std::size_t c = 0; c < n_channels; ++c) {
      const auto row = e.trials[i].row(static_cast<Eigen::Index>(c));
      kurt[i][c] = excess_kurtosis(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    }
  }

  RejectionReport report;
  report.amp_limit = amp_limit;
  report.kurt_factor = kurt_factor;
  report.kurtosis_bounds.resize(n_channels);
  for (std::size_t c = 0; c < n_channels; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n_trials; ++i) mean += kurt[i][c];
    mean /= static_cast<double>(n_trials);
    double var = 0.0;
    for (std::size_t i = 0; i < n_trials; ++i) var += (kurt[i][c] - mean) * (kurt[i][c] - mean);
    var /= static_cast<double>(n_trials);
    report.kurtosis_bounds[c] = mean + kurt_factor * std::sqrt(var);
  }

  for (std::size_t i = 0; i < n_trials; ++i) {
    std::vector<RejectReason> reasons;
    if (e.trials[i].cwiseAbs().maxCoeff() > amp_limit) reasons.push_back(RejectReason::amplitude);
    for (std::size_t c = 0; c < n_channels; ++c) {
      if (kurt[i][c] > report.kurtosis_bounds[c]) {
        reasons.push_back(RejectReason::kurtosis);
        break;
      }
    }
    if (reasons.empty()) {
      report.kept_indices.push_back(i);
    } else {
      report.rejected_indices.push_back(i);
      report.reasons.push_back(std::move(reasons));
    }
  }
  return {e.subset(report.kept_indices), std::move(report)};
}

EpochSet build_dataset(const Recording& r, const EventList& ev, const DatasetConfig& cfg) {
  auto movement = extract_epochs(r, ev, cfg.t_pre, cfg.t_post);
  std::size_t n_rest = cfg.rest_count;
  if (n_rest == 0 && movement.n_classes() > 0) {
    n_rest = static_cast<std::size_t>(std::llround(static_cast<double>(movement.size()) /
                                                   static_cast<double>(movement.n_classes())));
  }
  auto rest = extract_rest_epochs(r, ev, cfg.rest_epoch_s, n_rest);
  rest.t0_offset = movement.t0_offset;
  return concat(movement, rest);
}

}  // namespace mrcp::epoching
