#include "mrcp/synth.hpp"

#include "mrcp/error.hpp"
#include "mrcp/parallel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <limits>
#include <numbers>

namespace mrcp::synth {

namespace {

constexpr double kSupportSigmas = 5.0;
/// Clearance between a rest block and the nearest onset, seconds.
constexpr double kRestClearance = 4.0;

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Smallest 2^a 3^b 5^c >= n.
std::size_t smooth_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 2);; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2, 3, 5}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

}  // namespace

void SynthSpec::validate() const {
  auto bad = [](const std::string& msg) { raise(ErrorKind::InvalidSpec, msg); };
  if (n_channels < 2) bad("at least 2 channels are required");
  if (!(fs > 0.0) || !std::isfinite(fs)) bad("sampling rate must be positive");
  if (classes.empty()) bad("at least one movement class is required");
  if (n_trials_per_class < 1) bad("n_trials_per_class must be at least 1");
  for (const auto& c : classes) {
    if (!(c.peak_uv < 0.0)) bad("movement templates need a negative peak");
    if (!(c.rise_s > 0.0 && c.fall_s > 0.0)) bad("template widths must be positive");
    if (!std::isfinite(c.latency_s) || std::abs(c.latency_s) > 1.0) bad("template latency must lie within 1 s of onset");
  }
  if (center_channel >= n_channels) bad("centre channel outside the channel range");
  if (grid_width < 1 || !(weight_radius > 0.0)) bad("channel grid needs width >= 1 and a positive radius");
  if (!(template_gain >= 0.0) || !std::isfinite(template_gain)) bad("template gain must be finite and non-negative");
  if (!(noise_rms_uv >= 0.0) || !(line_noise_uv >= 0.0)) bad("noise amplitudes must be non-negative");
  if (!(noise_exponent >= 0.0 && noise_exponent <= 3.0)) bad("noise exponent must lie in [0, 3]");
  if (!(line_hz > 0.0 && line_hz < fs / 2.0)) bad("line frequency must lie below Nyquist");
  if (reps_per_session < 1) bad("reps_per_session must be at least 1");
  if (!(rest_block_s > 0.0)) bad("rest blocks must have positive length");
  if (!(onset_spacing_s >= 6.0) || !(onset_jitter_s >= 0.0)) bad("onset spacing must be at least 6 s, jitter non-negative");
  if (!(margin_s >= 0.0)) bad("margin must be non-negative");
}

double template_value(const ClassTemplate& c, double t) {
  const double dt = t - c.latency_s;
  const double sigma = dt < 0.0 ? c.rise_s : c.fall_s;
  if (std::abs(dt) > kSupportSigmas * sigma) return 0.0;
  return c.peak_uv * std::exp(-0.5 * (dt / sigma) * (dt / sigma));
}

std::vector<double> channel_weights(const SynthSpec& spec) {
  std::vector<double> w(spec.n_channels);
  const auto cx = static_cast<double>(spec.center_channel % spec.grid_width);
  const auto cy = static_cast<double>(spec.center_channel / spec.grid_width);
  for (std::size_t c = 0; c < spec.n_channels; ++c) {
    const double dx = static_cast<double>(c % spec.grid_width) - cx;
    const double dy = static_cast<double>(c / spec.grid_width) - cy;
    const double d = std::hypot(dx, dy);
    w[c] = d >= spec.weight_radius ? 0.0 : std::cos(0.5 * std::numbers::pi * d / spec.weight_radius);
  }
  return w;
}

std::vector<std::string> channel_labels(const SynthSpec& spec) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < spec.n_channels; ++c) {
    out.push_back(c == spec.center_channel ? "C1" : "E" + std::to_string(c + 1));
  }
  return out;
}

std::vector<double> power_law_noise(std::size_t n, double exponent, double rms, Rng& rng) {
  std::vector<double> out(n, 0.0);
  if (n == 0 || rms == 0.0) return out;
  const std::size_t m = smooth_size(n);
  const std::size_t bins = m / 2 + 1;
  auto* spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins));
  auto* time = static_cast<double*>(fftw_malloc(sizeof(double) * m));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_c2r_1d(static_cast<int>(m), spec, time, FFTW_ESTIMATE);
  }
  spec[0][0] = 0.0;
  spec[0][1] = 0.0;
  for (std::size_t k = 1; k < bins; ++k) {
    const double amp = std::pow(static_cast<double>(k), -0.5 * exponent);
    spec[k][0] = amp * rng.normal();
    spec[k][1] = (m % 2 == 0 && k == bins - 1) ? 0.0 : amp * rng.normal();
  }
  fftw_execute(plan);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += time[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (time[i] - mean) * (time[i] - mean);
  const double scale = ss > 0.0 ? rms / std::sqrt(ss / static_cast<double>(n)) : 0.0;
  for (std::size_t i = 0; i < n; ++i) out[i] = (time[i] - mean) * scale;
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(spec);
  fftw_free(time);
  return out;
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  const Rng root(spec.seed, 0x73796e);
  Rng layout = root.split(1);
  const std::size_t k = spec.classes.size();

  // Session layout: rest, first half of the sessions, rest, second half, rest.
  std::vector<int> session_class;
  const std::size_t per_class = (spec.n_trials_per_class + spec.reps_per_session - 1) / spec.reps_per_session;
  for (std::size_t s = 0; s < per_class * k; ++s) session_class.push_back(static_cast<int>(s % k));
  std::vector<std::size_t> remaining(k, spec.n_trials_per_class);

  std::vector<std::pair<double, double>> rest;  // seconds
  std::vector<std::pair<double, int>> onsets;   // seconds, class
  double t = spec.margin_s;
  auto add_rest = [&]() {
    rest.emplace_back(t, t + spec.rest_block_s);
    t += spec.rest_block_s + kRestClearance;
  };
  add_rest();
  const std::size_t half = (session_class.size() + 1) / 2;
  for (std::size_t s = 0; s < session_class.size(); ++s) {
    if (s == half) {
      t += kRestClearance - spec.onset_spacing_s;
      add_rest();
    }
    const int c = session_class[s];
    const std::size_t reps = std::min(spec.reps_per_session, remaining[static_cast<std::size_t>(c)]);
    remaining[static_cast<std::size_t>(c)] -= reps;
    for (std::size_t r = 0; r < reps; ++r) {
      onsets.emplace_back(t, c);
      t += spec.onset_spacing_s + layout.uniform(0.0, spec.onset_jitter_s);
    }
  }
  t += kRestClearance - spec.onset_spacing_s;
  add_rest();
  const double end = t - kRestClearance + spec.margin_s;
  const auto n = static_cast<std::size_t>(std::ceil(end * spec.fs));

  SynthData out;
  out.seed = spec.seed;
  out.channel_weights = channel_weights(spec);
  Recording& rec = out.recording;
  rec.fs = spec.fs;
  rec.channel_labels = channel_labels(spec);
  rec.data = SignalMatrix::Zero(static_cast<Eigen::Index>(spec.n_channels), static_cast<Eigen::Index>(n));

  parallel_for(spec.n_channels, [&](std::size_t c) {
    Rng rng = root.split(100 + c);
    const auto noise = power_law_noise(n, spec.noise_exponent, spec.noise_rms_uv, rng);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    auto row = rec.data.row(static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < n; ++i) {
      double v = noise[i];
      if (spec.line_noise_uv > 0.0) {
        v += spec.line_noise_uv *
             std::sin(2.0 * std::numbers::pi * spec.line_hz * static_cast<double>(i) / spec.fs + phase);
      }
      row(static_cast<Eigen::Index>(i)) = v;
    }
  });

  for (const auto& [ts, tr] : rest) {
    out.events.rest_intervals.push_back({static_cast<std::int64_t>(std::ceil(ts * spec.fs)),
                                         static_cast<std::int64_t>(std::floor(tr * spec.fs))});
  }
  for (const auto& [ts, c] : onsets) {
    const auto& tpl = spec.classes[static_cast<std::size_t>(c)];
    const auto onset = static_cast<std::int64_t>(std::llround(ts * spec.fs));
    out.events.onsets.push_back({onset, tpl.movement});
    out.trial_classes.push_back(c);
    if (spec.template_gain == 0.0) continue;
    const auto lo = onset + static_cast<std::int64_t>(std::floor((tpl.latency_s - kSupportSigmas * tpl.rise_s) * spec.fs));
    const auto hi = onset + static_cast<std::int64_t>(std::ceil((tpl.latency_s + kSupportSigmas * tpl.fall_s) * spec.fs));
    for (std::int64_t j = std::max<std::int64_t>(lo, 0); j <= hi && j < static_cast<std::int64_t>(n); ++j) {
      const double v = spec.template_gain * template_value(tpl, static_cast<double>(j - onset) / spec.fs);
      if (v == 0.0) continue;
      for (std::size_t ch = 0; ch < spec.n_channels; ++ch) {
        if (out.channel_weights[ch] != 0.0) rec.data(static_cast<Eigen::Index>(ch), j) += out.channel_weights[ch] * v;
      }
    }
  }
  return out;
}

double snr_of(const SynthSpec& spec) {
  if (spec.classes.empty() || spec.noise_rms_uv == 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(spec.classes.front().peak_uv) * spec.template_gain / spec.noise_rms_uv;
}

std::vector<SynthData> snr_sweep(const SynthSpec& spec, const std::vector<double>& snr_values) {
  std::vector<SynthData> out;
  for (double snr : snr_values) {
    if (!(snr >= 0.0) || !std::isfinite(snr)) raise(ErrorKind::InvalidSpec, "SNR values must be finite and non-negative");
    SynthSpec s = spec;
    const double peak = spec.classes.empty() ? 1.0 : std::abs(spec.classes.front().peak_uv);
    s.template_gain = spec.noise_rms_uv > 0.0 ? snr * spec.noise_rms_uv / peak : snr;
    out.push_back(generate(s));
  }
  return out;
}

}  // namespace mrcp::synth
