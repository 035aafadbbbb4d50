#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mrcp {

/// Channel-major sample matrix: one row per channel, one column per sample.
using SignalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Continuous multichannel recording, amplitudes in microvolts.
struct Recording {
  SignalMatrix data;
  double fs = 0.0;
  std::vector<std::string> channel_labels;

  std::size_t n_channels() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t n_samples() const { return static_cast<std::size_t>(data.cols()); }
};

struct Violation {
  std::string field;
  std::string detail;
};

/// Empty iff every Recording invariant holds; one entry per offending item.
std::vector<Violation> validate_recording(const Recording& r);

/// Throws InvalidRecording naming the first violation.
void require_valid(const Recording& r);

enum class Movement { touch, grasp, palmar, lateral };

std::string_view to_string(Movement m);
std::optional<Movement> parse_movement(std::string_view name);

struct Onset {
  std::int64_t sample = 0;
  Movement label = Movement::touch;
};

/// Half-open sample interval [start, end).
struct Interval {
  std::int64_t start = 0;
  std::int64_t end = 0;

  std::int64_t length() const { return end - start; }
};

struct EventList {
  std::vector<Onset> onsets;
  std::vector<Interval> rest_intervals;
};

/// Movement window that rest intervals must avoid, in seconds around onset.
inline constexpr double kGuardPreSeconds = 2.0;
inline constexpr double kGuardPostSeconds = 3.0;

std::vector<Violation> validate_events(const EventList& ev, std::size_t n_samples, double fs);

/// Trials x channels x samples, with per-trial class index into class_names.
struct EpochSet {
  std::vector<SignalMatrix> trials;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<std::string> channel_labels;
  double fs = 0.0;
  std::int64_t t0_offset = 0;

  std::size_t size() const { return trials.size(); }
  std::size_t n_channels() const;
  std::size_t n_samples() const;
  std::size_t n_classes() const { return class_names.size(); }

  EpochSet subset(std::span<const std::size_t> indices) const;
  /// Throws ShapeMismatch when trials disagree in shape or labels are inconsistent.
  void check_consistent() const;
};

/// Concatenates two epoch sets recorded at the same rate; class names are
/// merged in order of first appearance and labels remapped accordingly.
EpochSet concat(const EpochSet& a, const EpochSet& b);

struct SplitConfig {
  double validation_fraction = 0.25;
  int repeats = 10;
  int folds = 5;
};

/// Stratified hold-out split plus repeated k-fold assignments over the
/// training part. Indices refer to trial positions in the labelled set.
struct SplitPlan {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
  /// fold_assignments[repeat][fold] lists the held-out training trials.
  std::vector<std::vector<std::vector<std::size_t>>> fold_assignments;
  std::uint64_t seed = 0;

  std::size_t n_repeats() const { return fold_assignments.size(); }
  std::size_t n_folds() const { return fold_assignments.empty() ? 0 : fold_assignments.front().size(); }
  /// Training trials of one CV round: train_indices minus the held-out fold.
  std::vector<std::size_t> fold_training(std::size_t repeat, std::size_t fold) const;
};

SplitPlan make_split_plan(std::span<const int> labels, std::uint64_t seed, const SplitConfig& cfg = {});

/// Re-verifies partition, coverage, and stratification of a plan against
/// the labels it was built for; returns a description of each problem.
std::vector<std::string> check_split_plan(const SplitPlan& plan, std::span<const int> labels);

}  // namespace mrcp
