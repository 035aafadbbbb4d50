#include "mrcp/dsp.hpp"
#include "mrcp/error.hpp"
#include "mrcp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mrcp::dsp {

namespace {

struct Stage {
  std::vector<double> b;  // padded to n
  std::vector<double> a;  // padded to n
  std::vector<double> zi; // unit-step steady state, length n - 1
  double dc_gain = 0.0;
};

std::vector<Stage> make_stages(const IirFilter& f) {
  std::vector<Stage> stages;
  for (const auto& s : f.sections()) {
    Stage st;
    const std::size_t n = std::max(s.a.size(), s.b.size());
    st.b = s.b;
    st.a = s.a;
    st.b.resize(n, 0.0);
    st.a.resize(n, 0.0);
    const double sum_b = std::accumulate(st.b.begin(), st.b.end(), 0.0);
    const double sum_a = std::accumulate(st.a.begin(), st.a.end(), 0.0);
    st.dc_gain = sum_b / sum_a;
    // Steady state of the transposed direct form for a constant unit input.
    st.zi.assign(n - 1, 0.0);
    for (std::size_t i = n - 1; i-- > 0;) {
      const double tail = (i + 2 < n) ? st.zi[i + 1] : 0.0;
      st.zi[i] = st.b[i + 1] - st.a[i + 1] * st.dc_gain + tail;
    }
    stages.push_back(std::move(st));
  }
  return stages;
}

void run_stage(const Stage& st, std::vector<double>& x, double state_scale) {
  const std::size_t n = st.b.size();
  if (n == 1) {
    for (auto& v : x) v *= st.b[0];
    return;
  }
  if (n == 3) {
    const double b0 = st.b[0], b1 = st.b[1], b2 = st.b[2], a1 = st.a[1], a2 = st.a[2];
    double z0 = st.zi[0] * state_scale;
    double z1 = st.zi[1] * state_scale;
    for (auto& v : x) {
      const double in = v;
      const double y = b0 * in + z0;
      z0 = b1 * in - a1 * y + z1;
      z1 = b2 * in - a2 * y;
      v = y;
    }
    return;
  }
  std::vector<double> z(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) z[i] = st.zi[i] * state_scale;
  for (auto& v : x) {
    const double in = v;
    const double y = st.b[0] * in + z[0];
    for (std::size_t i = 0; i + 2 < n; ++i) z[i] = st.b[i + 1] * in - st.a[i + 1] * y + z[i + 1];
    z[n - 2] = st.b[n - 1] * in - st.a[n - 1] * y;
    v = y;
  }
}

// One causal pass with initial state scaled to the first input sample,
// so a constant lead-in starts in steady state.
void forward_pass(const std::vector<Stage>& stages, std::vector<double>& x, bool steady_start) {
  double level = (steady_start && !x.empty()) ? x.front() : 0.0;
  for (const auto& st : stages) {
    run_stage(st, x, level);
    level *= st.dc_gain;
  }
}

std::vector<double> forward_backward(const std::vector<Stage>& stages, std::vector<double> x) {
  forward_pass(stages, x, true);
  std::reverse(x.begin(), x.end());
  forward_pass(stages, x, true);
  std::reverse(x.begin(), x.end());
  return x;
}

/// Samples for the slowest pole to decay by 60 dB.
std::size_t settling_samples(const IirFilter& f) {
  double rmax = 0.0;
  for (const auto& p : f.poles()) rmax = std::max(rmax, std::abs(p));
  if (rmax <= 0.0) return 0;
  if (rmax >= 1.0) return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(std::ceil(std::log(1e-3) / std::log(rmax)));
}

}  // namespace

std::vector<double> lfilter(const IirFilter& f, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  forward_pass(make_stages(f), y, false);
  return y;
}

std::vector<double> filtfilt(const IirFilter& f, std::span<const double> x) {
  const std::size_t ntaps = f.order() + 1;
  if (x.size() <= 3 * ntaps) {
    raise(ErrorKind::SignalTooShort, "filtfilt needs more than " + std::to_string(3 * ntaps) + " samples, got " +
                                         std::to_string(x.size()));
  }
  const std::size_t n = x.size();
  const std::size_t pad = std::max(3 * (ntaps - 1), std::min(n - 1, settling_samples(f)));
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t k = pad; k >= 1; --k) ext.push_back(x[k]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t k = 1; k <= pad; ++k) ext.push_back(x[n - 1 - k]);

  const auto stages = make_stages(f);
  const auto fb = forward_backward(stages, ext);
  std::vector<double> reversed(ext.rbegin(), ext.rend());
  auto bf = forward_backward(stages, std::move(reversed));
  std::reverse(bf.begin(), bf.end());

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 0.5 * (fb[pad + i] + bf[pad + i]);
  return y;
}

Recording filtfilt(const IirFilter& f, const Recording& r) {
  Recording out = r;
  parallel_for(r.n_channels(), [&](std::size_t c) {
    const auto row = r.data.row(static_cast<Eigen::Index>(c));
    std::vector<double> x(row.data(), row.data() + row.size());
    const auto y = filtfilt(f, x);
    for (std::size_t t = 0; t < y.size(); ++t) out.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = y[t];
  });
  return out;
}

Recording car(const Recording& r) {
  if (r.n_channels() < 2) raise(ErrorKind::SingleChannel, "common average reference needs >= 2 channels");
  Recording out = r;
  const Eigen::RowVectorXd mean = r.data.colwise().mean();
  out.data.rowwise() -= mean;
  return out;
}

}  // namespace mrcp::dsp
