#include "mrcp/dsp.hpp"
#include "mrcp/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mrcp::dsp {

using cplx = std::complex<double>;

std::string to_string(FilterFamily family) {
  switch (family) {
    case FilterFamily::chebyshev1: return "chebyshev1";
    case FilterFamily::butterworth: return "butterworth";
    case FilterFamily::notch: return "notch";
    case FilterFamily::custom: return "custom";
  }
  return "custom";
}

namespace {

std::vector<double> poly_mul(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> out(p.size() + q.size() - 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) out[i + j] += p[i] * q[j];
  }
  return out;
}

cplx poly_eval_z(const std::vector<double>& c, cplx zinv) {
  // c[0] + c[1] z^-1 + ... evaluated by Horner in z^-1.
  cplx acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * zinv + *it;
  return acc;
}

std::vector<cplx> poly_roots(const std::vector<double>& a) {
  // Roots in z of a[0] z^n + a[1] z^{n-1} + ... + a[n].
  std::size_t n = a.size();
  while (n > 1 && a[n - 1] == 0.0) --n;  // trailing zeros are roots at the origin
  std::vector<cplx> roots(a.size() - n, cplx(0.0, 0.0));
  const std::size_t deg = n - 1;
  if (deg == 0) return roots;
  if (deg == 1) {
    roots.emplace_back(-a[1] / a[0], 0.0);
    return roots;
  }
  if (deg == 2) {
    const double b = a[1] / a[0];
    const double c = a[2] / a[0];
    const cplx disc = std::sqrt(cplx(b * b - 4.0 * c, 0.0));
    const cplx q = -0.5 * (cplx(b, 0.0) + (b >= 0 ? disc : -disc));
    const cplx r1 = q;
    const cplx r2 = (std::abs(q) > 0.0) ? cplx(c, 0.0) / q : cplx(0.0, 0.0);
    roots.push_back(r1);
    roots.push_back(r2);
    return roots;
  }
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(deg), static_cast<Eigen::Index>(deg));
  for (std::size_t j = 0; j < deg; ++j) companion(0, static_cast<Eigen::Index>(j)) = -a[j + 1] / a[0];
  for (std::size_t i = 1; i < deg; ++i) companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) roots.push_back(solver.eigenvalues()(i));
  return roots;
}

// Analog low-pass prototype (cutoff 1 rad/s), all-pole.
std::vector<cplx> prototype_poles(FilterFamily family, int order, double ripple_db) {
  std::vector<cplx> poles;
  const double n = static_cast<double>(order);
  if (family == FilterFamily::butterworth) {
    for (int k = 0; k < order; ++k) {
      const double theta = std::numbers::pi * (2.0 * k + n + 1.0) / (2.0 * n);
      poles.push_back(std::polar(1.0, theta));
    }
  } else {
    const double eps = std::sqrt(std::pow(10.0, ripple_db / 10.0) - 1.0);
    const double mu = std::asinh(1.0 / eps) / n;
    for (int k = 0; k < order; ++k) {
      const double theta = std::numbers::pi * (2.0 * k + 1.0) / (2.0 * n);
      poles.emplace_back(-std::sinh(mu) * std::sin(theta), std::cosh(mu) * std::cos(theta));
    }
  }
  return poles;
}

// Low-pass -> band-pass pole mapping: s -> (s^2 + w0^2) / (s * bw).
// The smaller root is formed as w0^2 / larger root to avoid cancellation.
std::vector<cplx> lowpass_to_bandpass(const std::vector<cplx>& poles, double w0, double bw) {
  std::vector<cplx> out;
  for (const auto& p : poles) {
    const cplx half = p * (bw / 2.0);
    const cplx root = std::sqrt(half * half - w0 * w0);
    const cplx plus = half + root;
    const cplx minus = half - root;
    const cplx big = std::abs(plus) >= std::abs(minus) ? plus : minus;
    out.push_back(big);
    out.push_back(w0 * w0 / big);
  }
  return out;
}

Section section_from_roots(const std::vector<cplx>& zeros, const std::vector<cplx>& poles) {
  auto quad = [](const std::vector<cplx>& r) {
    if (r.size() == 2) {
      return std::vector<double>{1.0, -(r[0] + r[1]).real(), (r[0] * r[1]).real()};
    }
    if (r.size() == 1) return std::vector<double>{1.0, -r[0].real()};
    return std::vector<double>{1.0};
  };
  return Section{quad(zeros), quad(poles)};
}

// Groups roots into conjugate pairs (or pairs of reals).
std::vector<std::vector<cplx>> pair_roots(std::vector<cplx> roots) {
  constexpr double tol = 1e-12;
  std::vector<std::vector<cplx>> pairs;
  std::vector<cplx> reals;
  std::vector<cplx> upper;
  for (const auto& r : roots) {
    if (std::abs(r.imag()) <= tol * std::max(1.0, std::abs(r))) {
      reals.emplace_back(r.real(), 0.0);
    } else if (r.imag() > 0) {
      upper.push_back(r);
    }
  }
  for (const auto& r : upper) pairs.push_back({r, std::conj(r)});
  std::sort(reals.begin(), reals.end(), [](cplx x, cplx y) { return x.real() < y.real(); });
  for (std::size_t i = 0; i < reals.size(); i += 2) {
    if (i + 1 < reals.size()) {
      pairs.push_back({reals[i], reals[i + 1]});
    } else {
      pairs.push_back({reals[i]});
    }
  }
  return pairs;
}

}  // namespace

IirFilter::IirFilter() : sections_{Section{{1.0}, {1.0}}}, meta_{} {}

IirFilter::IirFilter(std::vector<Section> sections, DesignMeta meta)
    : sections_(std::move(sections)), meta_(meta) {
  if (sections_.empty()) sections_.push_back(Section{{1.0}, {1.0}});
  for (auto& s : sections_) {
    if (s.a.empty() || s.b.empty() || s.a[0] == 0.0) {
      raise(ErrorKind::UnstableDesign, "section needs non-empty b, a with a[0] != 0");
    }
    const double a0 = s.a[0];
    for (auto& v : s.a) v /= a0;
    for (auto& v : s.b) v /= a0;
    for (double v : s.a) {
      if (!std::isfinite(v)) raise(ErrorKind::UnstableDesign, "non-finite denominator coefficient");
    }
    for (double v : s.b) {
      if (!std::isfinite(v)) raise(ErrorKind::UnstableDesign, "non-finite numerator coefficient");
    }
  }
}

IirFilter IirFilter::from_coefficients(std::vector<double> b, std::vector<double> a) {
  DesignMeta meta;
  meta.order = static_cast<int>(std::max(b.size(), a.size())) - 1;
  return IirFilter({Section{std::move(b), std::move(a)}}, meta);
}

std::vector<double> IirFilter::b() const {
  std::vector<double> out{1.0};
  for (const auto& s : sections_) out = poly_mul(out, s.b);
  return out;
}

std::vector<double> IirFilter::a() const {
  std::vector<double> out{1.0};
  for (const auto& s : sections_) out = poly_mul(out, s.a);
  return out;
}

std::size_t IirFilter::order() const {
  std::size_t nb = 1;
  std::size_t na = 1;
  for (const auto& s : sections_) {
    nb += s.b.size() - 1;
    na += s.a.size() - 1;
  }
  return std::max(nb, na) - 1;
}

std::complex<double> IirFilter::response(double omega) const {
  const cplx zinv = std::polar(1.0, -omega);
  cplx h = 1.0;
  for (const auto& s : sections_) h *= poly_eval_z(s.b, zinv) / poly_eval_z(s.a, zinv);
  return h;
}

double IirFilter::magnitude_at(double hz) const {
  if (!(meta_.fs > 0.0)) raise(ErrorKind::InvalidBand, "filter has no sampling rate attached");
  return std::abs(response(2.0 * std::numbers::pi * hz / meta_.fs));
}

std::vector<std::complex<double>> IirFilter::poles() const {
  std::vector<cplx> out;
  for (const auto& s : sections_) {
    auto r = poly_roots(s.a);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

bool IirFilter::is_stable(double margin) const {
  for (const auto& p : poles()) {
    if (!(std::abs(p) < 1.0 - margin)) return false;
  }
  return true;
}

IirFilter design_bandpass(FilterFamily family, int order, double low_hz, double high_hz, double fs,
                          double ripple_db) {
  if (family != FilterFamily::butterworth && family != FilterFamily::chebyshev1) {
    raise(ErrorKind::InvalidBand, "band-pass design supports butterworth and chebyshev1 only");
  }
  if (order < 1) raise(ErrorKind::InvalidBand, "order must be >= 1");
  if (!(fs > 0.0) || !(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < fs / 2.0)) {
    std::ostringstream msg;
    msg << "band-pass edges must satisfy 0 < low < high < fs/2, got (" << low_hz << ", " << high_hz
        << ") at fs " << fs;
    raise(ErrorKind::InvalidBand, msg.str());
  }
  if (family == FilterFamily::chebyshev1 && !(ripple_db > 0.0)) {
    raise(ErrorKind::InvalidBand, "chebyshev ripple must be positive");
  }

  // Pre-warped analog band edges for the bilinear transform.
  const double fs2 = 2.0 * fs;
  const double w1 = fs2 * std::tan(std::numbers::pi * low_hz / fs);
  const double w2 = fs2 * std::tan(std::numbers::pi * high_hz / fs);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  const auto analog = lowpass_to_bandpass(prototype_poles(family, order, ripple_db), w0, bw);
  std::vector<cplx> digital_poles;
  for (const auto& p : analog) digital_poles.push_back((fs2 + p) / (fs2 - p));

  // Band-pass zeros: `order` at s = 0 (z = 1) and `order` at infinity (z = -1).
  auto pole_pairs = pair_roots(digital_poles);
  std::sort(pole_pairs.begin(), pole_pairs.end(),
            [](const auto& x, const auto& y) { return std::abs(x[0]) < std::abs(y[0]); });
  int remaining_dc = order;
  int remaining_nyq = order;
  std::vector<Section> sections;
  for (const auto& pair : pole_pairs) {
    // Each conjugate pair takes one zero at DC and one at Nyquist; leftover
    // real poles (odd prototypes) pair zeros the same way.
    std::vector<cplx> zeros;
    for (std::size_t k = 0; k < pair.size(); ++k) {
      if ((k % 2 == 0 && remaining_dc > 0) || remaining_nyq == 0) {
        zeros.emplace_back(1.0, 0.0);
        --remaining_dc;
      } else {
        zeros.emplace_back(-1.0, 0.0);
        --remaining_nyq;
      }
    }
    sections.push_back(section_from_roots(zeros, pair));
  }

  // Passband normalisation at the digital image of the analog centre, where
  // the band-pass response equals the prototype's DC gain.
  const double center_omega = 2.0 * std::atan(w0 / fs2);
  const cplx zinv = std::polar(1.0, -center_omega);
  double target = 1.0;
  if (family == FilterFamily::chebyshev1 && order % 2 == 0) {
    target = 1.0 / std::sqrt(std::pow(10.0, ripple_db / 10.0));
  }
  for (auto& s : sections) {
    const double m = std::abs(poly_eval_z(s.b, zinv) / poly_eval_z(s.a, zinv));
    for (auto& v : s.b) v /= m;
  }
  cplx total = 1.0;
  for (const auto& s : sections) total *= poly_eval_z(s.b, zinv) / poly_eval_z(s.a, zinv);
  const double sign = total.real() >= 0.0 ? 1.0 : -1.0;
  for (auto& v : sections.front().b) v *= sign * target / std::abs(total);

  DesignMeta meta{family, order, low_hz, high_hz, fs, family == FilterFamily::chebyshev1 ? ripple_db : 0.0};
  IirFilter filter(std::move(sections), meta);
  if (!filter.is_stable()) raise(ErrorKind::UnstableDesign, "designed band-pass has a pole on or outside the unit circle");
  return filter;
}

IirFilter design_notch(double center_hz, double fs, double q) {
  if (!(fs > 0.0) || !(center_hz > 0.0) || !(center_hz < fs / 2.0)) {
    std::ostringstream msg;
    msg << "notch centre must satisfy 0 < f < fs/2, got " << center_hz << " at fs " << fs;
    raise(ErrorKind::InvalidBand, msg.str());
  }
  if (!(q > 0.0)) raise(ErrorKind::InvalidBand, "notch quality factor must be positive");
  const double w0 = 2.0 * std::numbers::pi * center_hz / fs;
  const double bandwidth = w0 / q;
  const double gain = 1.0 / (1.0 + std::tan(bandwidth / 2.0));
  const double c = std::cos(w0);
  Section s{{gain, -2.0 * gain * c, gain}, {1.0, -2.0 * gain * c, 2.0 * gain - 1.0}};
  IirFilter filter({s}, DesignMeta{FilterFamily::notch, 2, center_hz, center_hz, fs, q});
  if (!filter.is_stable()) raise(ErrorKind::UnstableDesign, "notch pole on or outside the unit circle");
  return filter;
}

IirFilter design_filter(const DesignMeta& request) {
  switch (request.family) {
    case FilterFamily::notch:
      return design_notch(request.low_hz, request.fs, request.ripple_or_q);
    case FilterFamily::butterworth:
    case FilterFamily::chebyshev1:
      return design_bandpass(request.family, request.order, request.low_hz, request.high_hz, request.fs,
                             request.ripple_or_q);
    case FilterFamily::custom:
      break;
  }
  raise(ErrorKind::InvalidBand, "custom filters are built from coefficients, not designed");
}

}  // namespace mrcp::dsp
