#pragma once

#include "mrcp/core.hpp"
#include "mrcp/nn/train.hpp"
#include "mrcp/rf.hpp"
#include "mrcp/slda.hpp"
#include "mrcp/windows.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mrcp::eval {

/// Fraction of exact matches. Throws LengthMismatch, EmptyInput.
double accuracy(std::span<const int> preds, std::span<const int> truth);

/// Upper bound of the adjusted Wald interval around 1/n_classes, with the
/// two-sided (1 - alpha/2) normal quantile.
double chance_level(std::size_t n_classes, std::size_t n_trials, double alpha = 0.05);

using Confusion = std::vector<std::vector<std::size_t>>;

/// Rows are true classes, columns predictions.
Confusion confusion_matrix(std::span<const int> preds, std::span<const int> truth, std::size_t n_classes);

enum class ModelKind { cnn, slda, rf };
std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct CvConfig {
  ModelKind kind = ModelKind::slda;
  /// Window length in seconds (sLDA and RF).
  double window_s = 1.0;
  std::size_t window_step = 2;
  rf::RfOptions forest;
  nn::CnnSpec cnn;
  nn::TrainConfig train;
  /// Epoch cap for each of the per-fold CNN fits.
  std::size_t cv_max_epochs = 5;
  double alpha = 0.05;
  /// Fingerprint of the upstream (preprocessing) configuration.
  std::string upstream_fingerprint;

  /// Canonical text of every setting, used for the fingerprint.
  std::string canonical() const;
};

struct EvalReport {
  std::string model;
  double accuracy = 0.0;
  Confusion confusion;
  double chance_level = 0.0;
  std::size_t n_validation = 0;
  std::vector<double> per_fold;
  std::vector<bool> fold_failed;
  bool complete = true;
  /// Window metadata (sLDA and RF).
  std::size_t window_length = 0;
  std::size_t window_start = 0;
  std::vector<double> window_curve;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  std::string upstream_fingerprint;

  double fold_mean() const;
};

/// Result of run_cv together with the model refit on the training part.
struct CvOutcome {
  EvalReport report;
  nn::CnnModel cnn;
  slda::SldaModel slda;
  rf::RfModel forest;
};

/// Repeated k-fold CV on the plan's training part (fold accuracies), then a
/// refit on all training trials scored on the untouched validation part.
/// The plan is re-verified first. Every training call is recorded in `log`.
CvOutcome run_cv(const EpochSet& data, const CvConfig& cfg, const SplitPlan& split, TrainingLog* log = nullptr);

/// Fingerprint text (16 hex digits) of a string.
std::string fingerprint(const std::string& text);

struct ReportRow {
  std::string participant;
  std::string model;
  double accuracy = 0.0;
  double chance_level = 0.0;
  std::size_t n_validation = 0;
  std::size_t window_length = 0;
  std::size_t window_start = 0;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  std::string upstream_fingerprint;
};

struct ComparisonTable {
  std::vector<std::string> participants;
  std::vector<std::string> models;
  /// accuracy[p][m]; NaN when missing.
  std::vector<std::vector<double>> accuracy;
  std::vector<double> mean;
  /// Population standard deviation over participants.
  std::vector<double> std_dev;
  /// Index of the best model per participant.
  std::vector<std::size_t> best;

  std::string to_csv() const;
  std::string to_text() const;
};

/// Participants and models in order of first appearance.
ComparisonTable compare_models(const std::vector<ReportRow>& rows);

/// Delimited records: header plus one row per report.
std::string rows_to_csv(const std::vector<ReportRow>& rows);
std::vector<ReportRow> rows_from_csv(const std::string& text);

std::string confusion_to_text(const Confusion& c, const std::vector<std::string>& class_names);
/// Multi-line human-readable summary of one report.
std::string report_to_text(const EvalReport& r, const std::vector<std::string>& class_names);

}  // namespace mrcp::eval
