#pragma once

#include "mrcp/dsp.hpp"
#include "mrcp/epoching.hpp"
#include "mrcp/nn/train.hpp"
#include "mrcp/rf.hpp"
#include "mrcp/synth.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mrcp {

/// Every tunable of the pipeline, addressable as "section.key".
struct PipelineConfig {
  synth::SynthSpec synth;
  dsp::PreprocessConfig preprocess;
  epoching::DatasetConfig epoch;
  double reject_amp_uv = 125.0;
  double reject_kurt_factor = 4.0;
  SplitConfig split;
  std::uint64_t split_seed = 7;
  std::vector<double> window_lengths_s{0.6, 0.8, 1.0};
  std::size_t window_step = 2;
  rf::RfOptions forest;
  nn::CnnSpec cnn;
  nn::TrainConfig train;
  std::size_t cv_max_epochs = 5;
  double alpha = 0.05;
  nn::GridRanges grid;
  int grid_folds = 5;

  /// Throws InvalidConfig for an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  /// Applies "key=value".
  void apply_override(const std::string& assignment);

  /// Resolved "[section]" / "key = value" document.
  std::string to_ini() const;
  /// Starts from defaults; unknown sections or keys are errors.
  static PipelineConfig from_ini(const std::string& text);

  /// Hash of the whole resolved document.
  std::string fingerprint() const;
  /// Hash of the sections that shape the epochs (preprocess, epoch, reject).
  std::string preprocessing_fingerprint() const;
};

}  // namespace mrcp
