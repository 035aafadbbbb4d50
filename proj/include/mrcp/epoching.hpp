#pragma once

#include "mrcp/core.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mrcp::epoching {

/// One epoch per onset over [onset + round(t_pre*fs), onset + round(t_post*fs)).
/// Class names are the movements present, in enum order.
EpochSet extract_epochs(const Recording& r, const EventList& ev, double t_pre, double t_post);

/// Tiles non-overlapping windows of epoch_len seconds from the start of each
/// rest interval, left to right, until n_target epochs are collected.
EpochSet extract_rest_epochs(const Recording& r, const EventList& ev, double epoch_len, std::size_t n_target);

/// Maps event sample indices to another sampling rate. Onsets are rounded;
/// rest intervals shrink inwards so they stay inside the original span.
EventList rescale_events(const EventList& ev, double from_fs, double to_fs);

enum class RejectReason { amplitude, kurtosis };
std::string to_string(RejectReason reason);

struct RejectionReport {
  std::vector<std::size_t> kept_indices;
  std::vector<std::size_t> rejected_indices;
  /// reasons[i] belongs to rejected_indices[i].
  std::vector<std::vector<RejectReason>> reasons;
  double amp_limit = 0.0;
  double kurt_factor = 0.0;
  /// Per-channel kurtosis bound (mean + factor * std across trials).
  std::vector<double> kurtosis_bounds;
};

/// Excess kurtosis (Gaussian -> 0) with population moments; 0 for a constant signal.
double excess_kurtosis(std::span<const double> x);

/// Keeps a trial iff max |x| <= amp_limit and, on every channel, its
/// kurtosis does not exceed the across-trial mean by more than
/// kurt_factor across-trial standard deviations.
std::pair<EpochSet, RejectionReport> reject_outliers(const EpochSet& e, double amp_limit, double kurt_factor);

struct DatasetConfig {
  double t_pre = -2.0;
  double t_post = 3.0;
  double rest_epoch_s = 5.0;
  /// 0 selects the mean per-movement-class onset count.
  std::size_t rest_count = 0;
};

/// Movement epochs followed by rest epochs, as one 3-class set.
EpochSet build_dataset(const Recording& r, const EventList& ev, const DatasetConfig& cfg = {});

}  // namespace mrcp::epoching
