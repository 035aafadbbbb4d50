#pragma once

#include "mrcp/core.hpp"
#include "mrcp/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mrcp::synth {

/// Asymmetric Gaussian negativity around `latency_s` after onset.
struct ClassTemplate {
  Movement movement = Movement::touch;
  double peak_uv = -8.0;
  double latency_s = 0.05;
  double rise_s = 0.5;  // sigma before the peak
  double fall_s = 0.2;  // sigma after the peak
};

struct SynthSpec {
  std::size_t n_channels = 58;
  double fs = 256.0;
  std::size_t n_trials_per_class = 80;
  std::vector<ClassTemplate> classes{{Movement::touch, -8.0, 0.05, 0.5, 0.2},
                                     {Movement::grasp, -10.4, 0.20, 0.5, 0.2}};
  /// Index of the maximal-weight channel, labelled "C1".
  std::size_t center_channel = 19;
  /// Channels are laid out row-wise on a grid of this width.
  std::size_t grid_width = 8;
  /// Grid distance at which the cosine weight reaches zero.
  double weight_radius = 4.0;
  /// Multiplies every template (0 gives a template-free recording).
  double template_gain = 1.0;
  double noise_exponent = 1.0;
  double noise_rms_uv = 4.0;
  double line_noise_uv = 1.0;
  double line_hz = 50.0;
  std::size_t reps_per_session = 20;
  double rest_block_s = 180.0;
  double onset_spacing_s = 6.0;
  double onset_jitter_s = 2.0;
  double margin_s = 10.0;
  std::uint64_t seed = 1;

  /// Throws InvalidSpec.
  void validate() const;
};

struct SynthData {
  Recording recording;
  EventList events;
  /// Class index (into spec.classes) of every onset.
  std::vector<int> trial_classes;
  std::vector<double> channel_weights;
  std::uint64_t seed = 0;
};

/// Template value at time t (seconds from onset); zero beyond five sigmas.
double template_value(const ClassTemplate& c, double t);

/// Cosine fall-off from the centre channel on the channel grid.
std::vector<double> channel_weights(const SynthSpec& spec);

/// Channel labels: "C1" at the centre channel, "E<index>" elsewhere.
std::vector<std::string> channel_labels(const SynthSpec& spec);

SynthData generate(const SynthSpec& spec);

/// Template-to-noise ratio of a spec: |first class peak| * gain / noise RMS.
double snr_of(const SynthSpec& spec);

/// One dataset per SNR, sharing the base seed (so noise and onsets are
/// identical) with templates scaled to reach each SNR.
std::vector<SynthData> snr_sweep(const SynthSpec& spec, const std::vector<double>& snr_values);

/// Coloured noise with power spectrum ~ 1/f^exponent and the given RMS.
std::vector<double> power_law_noise(std::size_t n, double exponent, double rms, Rng& rng);

}  // namespace mrcp::synth
