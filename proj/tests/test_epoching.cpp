#include "mrcp/epoching.hpp"
#include "mrcp/error.hpp"
#include "mrcp/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace mrcp;
using namespace mrcp::epoching;

namespace {

Recording ramp_recording(std::size_t ch, std::size_t n, double fs) {
  Recording r;
  r.fs = fs;
  r.data.resize(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < r.data.rows(); ++c) {
    for (Eigen::Index t = 0; t < r.data.cols(); ++t) r.data(c, t) = static_cast<double>(t) + 1000.0 * c;
  }
  for (std::size_t c = 0; c < ch; ++c) r.channel_labels.push_back("E" + std::to_string(c));
  return r;
}

EpochSet gaussian_trials(std::size_t n, std::size_t ch, std::size_t len, Rng& rng, double sd = 10.0) {
  EpochSet e;
  e.fs = 16.0;
  e.class_names = {"rest"};
  for (std::size_t i = 0; i < n; ++i) {
    SignalMatrix m(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(len));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = sd * rng.normal();
    e.trials.push_back(m);
    e.labels.push_back(0);
  }
  return e;
}

double direct_kurtosis(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : x) {
    m2 += std::pow(v - m, 2);
    m4 += std::pow(v - m, 4);
  }
  m2 /= n;
  m4 /= n;
  return m2 == 0.0 ? 0.0 : m4 / (m2 * m2) - 3.0;
}

}  // namespace

TEST_CASE("epoch window index arithmetic at 16 Hz") {
  const auto r = ramp_recording(2, 400, 16.0);
  EventList ev;
  ev.onsets = {{100, Movement::touch}};
  const auto e = extract_epochs(r, ev, -2.0, 3.0);
  REQUIRE(e.size() == 1);
  CHECK(e.n_samples() == 80);
  CHECK(e.t0_offset == 32);
  CHECK(e.trials[0](0, 0) == 68.0);
  CHECK(e.trials[0](0, 79) == 147.0);
  CHECK(e.trials[0](1, 0) == 1068.0);
  CHECK(e.class_names == std::vector<std::string>{"touch"});
}

TEST_CASE("onset too close to the start is out of bounds") {
  const auto r = ramp_recording(2, 400, 16.0);
  EventList ev;
  ev.onsets = {{10, Movement::touch}};
  try {
    extract_epochs(r, ev, -2.0, 3.0);
    FAIL("expected OnsetOutOfBounds");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OnsetOutOfBounds);
    CHECK(std::string(e.what()).find("10") != std::string::npos);
  }
  ev.onsets = {{390, Movement::touch}};
  CHECK_THROWS_AS(extract_epochs(r, ev, -2.0, 3.0), Error);
}

TEST_CASE("one epoch per onset, labels mapped to class indices") {
  const auto r = ramp_recording(3, 16 * 1000, 16.0);
  EventList ev;
  for (int i = 0; i < 160; ++i) {
    ev.onsets.push_back({40 + 96 * i, i % 2 ? Movement::grasp : Movement::touch});
  }
  const auto e = extract_epochs(r, ev, -2.0, 3.0);
  CHECK(e.size() == 160);
  CHECK(e.class_names == std::vector<std::string>{"touch", "grasp"});
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(e.labels[i] == static_cast<int>(i % 2));
}

TEST_CASE("rest epochs tile rest intervals left to right") {
  const auto r = ramp_recording(2, 16 * 600, 16.0);
  EventList ev;
  ev.rest_intervals = {{0, 16 * 180}, {16 * 200, 16 * 380}, {16 * 400, 16 * 580}};
  const auto e = extract_rest_epochs(r, ev, 5.0, 80);
  CHECK(e.size() == 80);
  CHECK(e.n_samples() == 80);
  CHECK(e.t0_offset == 32);
  CHECK(e.class_names == std::vector<std::string>{"rest"});
  CHECK(e.trials[0](0, 0) == 0.0);
  CHECK(e.trials[1](0, 0) == 80.0);
  // 36 windows fit in each 180 s block.
  CHECK(e.trials[36](0, 0) == 16.0 * 200);
  for (std::size_t i = 1; i < e.size(); ++i) CHECK(e.trials[i](0, 0) >= e.trials[i - 1](0, 0) + 80.0);
}

TEST_CASE("rest extraction edge cases") {
  const auto r = ramp_recording(2, 16 * 60, 16.0);
  EventList ev;
  ev.rest_intervals = {{0, 16 * 12}};
  try {
    extract_rest_epochs(r, ev, 5.0, 3);
    FAIL("expected InsufficientRestData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientRestData);
  }
  CHECK(extract_rest_epochs(r, ev, 5.0, 2).size() == 2);
  CHECK(extract_rest_epochs(r, ev, 5.0, 0).size() == 0);
}

TEST_CASE("rescaled events stay within the original span") {
  EventList ev;
  ev.onsets = {{2560, Movement::touch}, {2567, Movement::grasp}};
  ev.rest_intervals = {{10, 2000}};
  const auto out = rescale_events(ev, 256.0, 16.0);
  CHECK(out.onsets[0].sample == 160);
  CHECK(out.onsets[1].sample == 160);
  CHECK(out.onsets[1].label == Movement::grasp);
  CHECK(out.rest_intervals[0].start * 16 >= 10);
  CHECK(out.rest_intervals[0].end * 16 <= 2000);
}

TEST_CASE("excess kurtosis matches the moment formula") {
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x(50 + rng.below(50));
    for (auto& v : x) v = rng.normal() * (1.0 + rng.uniform());
    CHECK(excess_kurtosis(x) == doctest::Approx(direct_kurtosis(x)).epsilon(1e-10));
  }
  const std::vector<double> flat(30, 2.5);
  CHECK(excess_kurtosis(flat) == 0.0);
}

TEST_CASE("amplitude rule") {
  Rng rng(4);
  auto e = gaussian_trials(30, 4, 80, rng);
  e.trials[7](2, 40) = 200.0;
  const auto [kept, rep] = reject_outliers(e, 125.0, 4.0);
  REQUIRE(std::find(rep.rejected_indices.begin(), rep.rejected_indices.end(), 7u) != rep.rejected_indices.end());
  const auto pos = std::find(rep.rejected_indices.begin(), rep.rejected_indices.end(), 7u) - rep.rejected_indices.begin();
  const auto& why = rep.reasons[static_cast<std::size_t>(pos)];
  CHECK(std::find(why.begin(), why.end(), RejectReason::amplitude) != why.end());
  CHECK(kept.size() == rep.kept_indices.size());
  CHECK(rep.kept_indices.size() + rep.rejected_indices.size() == e.size());
  for (const auto& r : rep.reasons) CHECK_FALSE(r.empty());
}

TEST_CASE("gaussian trials are almost all kept") {
  Rng rng(99);
  std::size_t kept = 0;
  std::size_t total = 0;
  for (int seed = 0; seed < 200; ++seed) {
    const auto e = gaussian_trials(40, 2, 80, rng);
    const auto [k, rep] = reject_outliers(e, 125.0, 4.0);
    kept += rep.kept_indices.size();
    total += e.size();
  }
  CHECK(static_cast<double>(kept) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("an all-zero trial among gaussian trials is kept") {
  Rng rng(12);
  auto e = gaussian_trials(30, 3, 80, rng);
  e.trials[5].setZero();
  const auto [kept, rep] = reject_outliers(e, 125.0, 4.0);
  CHECK(std::find(rep.kept_indices.begin(), rep.kept_indices.end(), 5u) != rep.kept_indices.end());
}

TEST_CASE("rejection is deterministic and monotone in the amplitude limit") {
  Rng rng(21);
  auto e = gaussian_trials(40, 3, 80, rng, 40.0);
  const auto [k1, r1] = reject_outliers(e, 125.0, 4.0);
  const auto [k2, r2] = reject_outliers(e, 125.0, 4.0);
  CHECK(r1.kept_indices == r2.kept_indices);
  auto amp_rejected = [](const RejectionReport& r) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < r.rejected_indices.size(); ++i) {
      const auto& why = r.reasons[i];
      if (std::find(why.begin(), why.end(), RejectReason::amplitude) != why.end()) out.push_back(r.rejected_indices[i]);
    }
    return out;
  };
  auto prev = amp_rejected(r1);
  for (double limit : {150.0, 175.0, 200.0, 1000.0}) {
    const auto [k, r] = reject_outliers(e, limit, 4.0);
    const auto now = amp_rejected(r);
    for (auto i : now) CHECK(std::find(prev.begin(), prev.end(), i) != prev.end());
    prev = now;
  }
  CHECK_THROWS_AS(reject_outliers(gaussian_trials(1, 2, 80, rng), 125.0, 4.0), Error);
}

TEST_CASE("build_dataset appends a balanced rest class") {
  const auto r = ramp_recording(2, 16 * 900, 16.0);
  EventList ev;
  ev.rest_intervals = {{0, 16 * 180}};
  for (int i = 0; i < 20; ++i) {
    ev.onsets.push_back({16 * (200 + 8 * i), i < 10 ? Movement::touch : Movement::grasp});
  }
  const auto e = build_dataset(r, ev);
  CHECK(e.size() == 30);
  CHECK(e.class_names == std::vector<std::string>{"touch", "grasp", "rest"});
  CHECK(std::count(e.labels.begin(), e.labels.end(), 2) == 10);
  CHECK(e.t0_offset == 32);
}
