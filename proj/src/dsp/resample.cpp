#include "mrcp/dsp.hpp"
#include "mrcp/error.hpp"
#include "mrcp/parallel.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace mrcp::dsp {

namespace {

constexpr int kZeroCrossings = 10;
constexpr double kKaiserBeta = 5.0;
constexpr std::size_t kMaxFactor = 4096;

}  // namespace

RateRatio rational_ratio(double target_fs, double source_fs) {
  if (!(target_fs > 0.0) || !(source_fs > 0.0)) raise(ErrorKind::InvalidTarget, "rates must be positive");
  const double ratio = target_fs / source_fs;
  // Continued-fraction convergents of the ratio.
  double x = ratio;
  long long h_prev = 1, h = static_cast<long long>(std::floor(x));
  long long k_prev = 0, k = 1;
  for (int iter = 0; iter < 64; ++iter) {
    if (std::abs(static_cast<double>(h) / static_cast<double>(k) - ratio) <= 1e-12 * ratio) break;
    const double frac = x - std::floor(x);
    if (frac < 1e-15) break;
    x = 1.0 / frac;
    const auto a = static_cast<long long>(std::floor(x));
    const long long h_next = a * h + h_prev;
    const long long k_next = a * k + k_prev;
    h_prev = h;
    k_prev = k;
    h = h_next;
    k = k_next;
    if (static_cast<std::size_t>(std::max(h, k)) > kMaxFactor) break;
  }
  if (h < 1 || std::abs(static_cast<double>(h) / static_cast<double>(k) - ratio) > 1e-9 * ratio ||
      static_cast<std::size_t>(std::max(h, k)) > kMaxFactor) {
    std::ostringstream msg;
    msg << "cannot express " << target_fs << "/" << source_fs << " as a small rational ratio";
    raise(ErrorKind::InvalidTarget, msg.str());
  }
  const auto g = std::gcd(h, k);
  return RateRatio{static_cast<std::size_t>(h / g), static_cast<std::size_t>(k / g)};
}

std::vector<double> resample_kernel(const RateRatio& ratio) {
  const std::size_t factor = std::max(ratio.up, ratio.down);
  const std::size_t length = 2 * kZeroCrossings * factor + 1;
  const double center = static_cast<double>(length - 1) / 2.0;
  const double cutoff = 1.0 / (2.0 * static_cast<double>(factor));  // cycles per upsampled sample
  const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
  std::vector<double> h(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) - center;
    const double arg = 2.0 * cutoff * t;
    const double sinc = (t == 0.0) ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = t / center;
    const double window = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
    h[i] = 2.0 * cutoff * sinc * window;
  }
  const double sum = std::accumulate(h.begin(), h.end(), 0.0);
  for (auto& v : h) v *= static_cast<double>(ratio.up) / sum;
  return h;
}

std::vector<double> resample(std::span<const double> x, const RateRatio& ratio) {
  const auto h = resample_kernel(ratio);
  const auto p = static_cast<long long>(ratio.up);
  const auto q = static_cast<long long>(ratio.down);
  const auto taps = static_cast<long long>(h.size());
  const long long delay = (taps - 1) / 2;
  const auto n_in = static_cast<long long>(x.size());
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(x.size()) * static_cast<double>(p) /
                                                           static_cast<double>(q)));
  std::vector<double> y(n_out, 0.0);
  for (std::size_t m = 0; m < n_out; ++m) {
    // y[m] = sum_n x[n] h[m q + delay - n p]: the polyphase branch is fixed by m.
    const long long t = static_cast<long long>(m) * q + delay;
    long long n_hi = t / p;
    long long n_lo = (t - taps + 1 + p - 1) / p;
    if (t - taps + 1 < 0) n_lo = 0;
    n_hi = std::min(n_hi, n_in - 1);
    double acc = 0.0;
    for (long long n = n_lo; n <= n_hi; ++n) acc += x[static_cast<std::size_t>(n)] * h[static_cast<std::size_t>(t - n * p)];
    y[m] = acc;
  }
  return y;
}

Recording resample(const Recording& r, double target_fs) {
  if (!(target_fs < r.fs)) {
    std::ostringstream msg;
    msg << "only downsampling is supported (target " << target_fs << " Hz, source " << r.fs << " Hz)";
    raise(ErrorKind::InvalidTarget, msg.str());
  }
  const auto ratio = rational_ratio(target_fs, r.fs);
  const auto n_out = static_cast<Eigen::Index>(std::llround(static_cast<double>(r.n_samples()) *
                                                            static_cast<double>(ratio.up) /
                                                            static_cast<double>(ratio.down)));
  if (n_out < 1) raise(ErrorKind::InvalidTarget, "resampled recording would be empty");
  Recording out;
  out.fs = target_fs;
  out.channel_labels = r.channel_labels;
  out.data.resize(r.data.rows(), n_out);
  parallel_for(r.n_channels(), [&](std::size_t c) {
    const auto row = r.data.row(static_cast<Eigen::Index>(c));
    const auto y = resample(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), ratio);
    for (Eigen::Index t = 0; t < n_out; ++t) out.data(static_cast<Eigen::Index>(c), t) = y[static_cast<std::size_t>(t)];
  });
  return out;
}

}  // namespace mrcp::dsp
