#pragma once

#include "mrcp/core.hpp"

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mrcp::dsp {

enum class FilterFamily { chebyshev1, butterworth, notch, custom };

std::string to_string(FilterFamily family);

struct DesignMeta {
  FilterFamily family = FilterFamily::custom;
  int order = 0;
  double low_hz = 0.0;   // band-pass lower edge, or notch centre
  double high_hz = 0.0;  // band-pass upper edge, or notch centre
  double fs = 0.0;       // 0 when designed in normalised frequency
  double ripple_or_q = 0.0;
};

/// One cascade stage in transposed direct form II; a[0] == 1.
struct Section {
  std::vector<double> b;
  std::vector<double> a;
};

/// IIR filter held as a cascade of low-order sections. The expanded
/// transfer-function coefficients are available through b()/a(), but all
/// filtering runs on the sections, which stay well conditioned for the
/// very low band edges used in MRCP work.
class IirFilter {
 public:
  /// Identity filter (b = [1], a = [1]).
  IirFilter();
  IirFilter(std::vector<Section> sections, DesignMeta meta);

  /// Wraps a single transfer function; normalises so that a[0] == 1.
  static IirFilter from_coefficients(std::vector<double> b, std::vector<double> a);

  const std::vector<Section>& sections() const { return sections_; }
  const DesignMeta& meta() const { return meta_; }

  /// Expanded numerator / denominator (polynomial product of the sections).
  std::vector<double> b() const;
  std::vector<double> a() const;
  /// Total order: max(len(b), len(a)) - 1 of the expanded transfer function.
  std::size_t order() const;

  /// H(e^{j omega}) with omega in radians per sample.
  std::complex<double> response(double omega) const;
  /// |H| at a frequency in Hz; requires meta().fs > 0.
  double magnitude_at(double hz) const;

  std::vector<std::complex<double>> poles() const;
  bool is_stable(double margin = 1e-9) const;

 private:
  std::vector<Section> sections_;
  DesignMeta meta_;
};

/// Band-pass design (Butterworth or Chebyshev type I). `order` is the
/// low-pass prototype order, so the resulting band-pass has order 2*order.
/// `ripple_db` is ignored for Butterworth.
IirFilter design_bandpass(FilterFamily family, int order, double low_hz, double high_hz, double fs,
                          double ripple_db = 0.5);

/// Second-order notch with zeros on the unit circle at `center_hz`.
IirFilter design_notch(double center_hz, double fs, double q);

/// Dispatching form: notch uses low_hz as the centre and ripple_or_q as Q.
IirFilter design_filter(const DesignMeta& request);

/// Single causal pass through the cascade (zero initial state).
std::vector<double> lfilter(const IirFilter& f, std::span<const double> x);

/// Zero-phase forward-backward filtering with mirror-symmetric edge extension
/// and steady-state initial conditions. The extension covers the slowest
/// pole's 60 dB decay, at least 3*order and at most len(x) - 1 samples. The result is the
/// mean of the forward-backward and backward-forward passes, which makes the
/// operation exactly commute with time reversal.
std::vector<double> filtfilt(const IirFilter& f, std::span<const double> x);

/// Filters every channel of a recording with filtfilt (channels in parallel).
Recording filtfilt(const IirFilter& f, const Recording& r);

/// Common average reference: subtracts the across-channel mean at every sample.
Recording car(const Recording& r);

/// Reduced fraction p/q approximating target/source.
struct RateRatio {
  std::size_t up = 1;
  std::size_t down = 1;
};
RateRatio rational_ratio(double target_fs, double source_fs);

/// Kaiser-windowed sinc anti-aliasing kernel for p/q resampling
/// (10 zero crossings per side, beta = 5), DC gain == up.
std::vector<double> resample_kernel(const RateRatio& ratio);

/// Polyphase rational resampling of one signal; output length is
/// round(n * up / down).
std::vector<double> resample(std::span<const double> x, const RateRatio& ratio);

/// Downsamples every channel to target_fs (must be below r.fs).
Recording resample(const Recording& r, double target_fs);

struct PreprocessConfig {
  double broad_low_hz = 0.01;
  double broad_high_hz = 100.0;
  int broad_order = 8;
  double cheby_ripple_db = 0.5;
  bool notch = true;
  double notch_hz = 50.0;
  double notch_q = 35.0;
  double mrcp_low_hz = 0.3;
  double mrcp_high_hz = 3.0;
  int mrcp_order = 4;
  bool car = true;
  double target_fs = 16.0;
};

/// Chebyshev band-pass -> notch -> Butterworth band-pass (all zero-phase)
/// -> CAR -> resample.
Recording preprocess_chain(const Recording& r, const PreprocessConfig& cfg = {});

}  // namespace mrcp::dsp
