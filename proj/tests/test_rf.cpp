#include "oracles.hpp"

#include "mrcp/error.hpp"
#include "mrcp/rf.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace mrcp;
using namespace mrcp::rf;

namespace {

std::pair<Eigen::MatrixXd, std::vector<int>> two_gaussians(Rng& rng, std::size_t per_class, std::size_t d) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(2 * per_class), static_cast<Eigen::Index>(d));
  std::vector<int> y;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = static_cast<int>(i % 2);
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal() + (j == 0 ? (c == 0 ? -5.0 : 5.0) : 0.0);
    y.push_back(c);
  }
  return {x, y};
}

void check_tree_invariants(const RfModel& m) {
  for (const auto& t : m.trees) {
    std::size_t leaves = 0;
    for (const auto& n : t.nodes) {
      if (n.feature >= 0) {
        CHECK(static_cast<std::size_t>(n.feature) < m.n_features);
        CHECK(n.left > 0);
        CHECK(n.right > 0);
      } else {
        ++leaves;
        CHECK(n.leaf >= 0);
      }
    }
    CHECK(t.leaf_counts.size() == leaves * m.n_classes);
  }
}

}  // namespace

TEST_CASE("two distinct trials are memorised") {
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 1.0;
  const std::vector<int> y{0, 1};
  RfOptions opt;
  opt.bootstrap = false;
  const auto m = fit_rf(x, y, opt);
  CHECK(predict_rf(m, x) == y);
  CHECK(m.trees.size() == 50);
  CHECK(m.mtry == 1);
}

TEST_CASE("mtry outside 1..d is rejected") {
  Eigen::MatrixXd x(4, 3);
  x.setRandom();
  const std::vector<int> y{0, 1, 0, 1};
  RfOptions opt;
  opt.mtry = 4;
  try {
    fit_rf(x, y, opt);
    FAIL("expected InvalidMtry");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidMtry);
  }
  Eigen::MatrixXd one(1, 3);
  one.setRandom();
  const std::vector<int> single{0};
  CHECK_THROWS_AS(fit_rf(one, single), Error);
}

TEST_CASE("default mtry is the rounded square root of the dimension") {
  Rng rng(1);
  const auto [x, y] = testing::random_problem(rng, 20, 30, 2);
  RfOptions opt;
  opt.n_trees = 3;
  CHECK(fit_rf(x, y, opt).mtry == 5);
}

TEST_CASE("gaussian classes give high out-of-bag accuracy") {
  Rng rng(2);
  const auto [x, y] = two_gaussians(rng, 100, 4);
  const auto m = fit_rf(x, y);
  REQUIRE(m.oob_accuracy.has_value());
  CHECK(*m.oob_accuracy >= 0.95);
  check_tree_invariants(m);
}

TEST_CASE("leaf class counts add up to the bootstrap size") {
  Rng rng(3);
  const auto [x, y] = testing::random_problem(rng, 40, 3, 3);
  RfOptions opt;
  opt.n_trees = 10;
  const auto m = fit_rf(x, y, opt);
  for (const auto& t : m.trees) {
    CHECK(std::accumulate(t.leaf_counts.begin(), t.leaf_counts.end(), std::size_t{0}) == 40);
  }
}

TEST_CASE("bootstrap draws n indices from n trials") {
  for (std::size_t tree = 0; tree < 20; ++tree) {
    const auto s = bootstrap_sample(37, 99, tree);
    CHECK(s.size() == 37);
    CHECK(std::all_of(s.begin(), s.end(), [](std::size_t i) { return i < 37; }));
    CHECK(s == bootstrap_sample(37, 99, tree));
  }
  CHECK(bootstrap_sample(37, 99, 0) != bootstrap_sample(37, 99, 1));
}

TEST_CASE("majority vote with ties to the lowest class") {
  const std::vector<std::size_t> votes{30, 15, 5};
  CHECK(majority(votes) == 0);
  const std::vector<std::size_t> tie{10, 20, 20};
  CHECK(majority(tie) == 1);
}

TEST_CASE("single-tree forest predicts its leaf class") {
  Rng rng(4);
  const auto [x, y] = testing::random_problem(rng, 30, 3, 3);
  RfOptions opt;
  opt.n_trees = 1;
  const auto m = fit_rf(x, y, opt);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> q{rng.normal(), rng.normal(), rng.normal()};
    const auto& t = m.trees[0];
    CHECK(predict_rf(m, q).label == t.leaf_class(t.leaf_of(q), m.n_classes));
  }
}

TEST_CASE("prediction agrees with an exhaustive path search") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(3);
    const auto [x, y] = testing::random_problem(rng, 2 * k + rng.below(20), 1 + rng.below(4), k);
    RfOptions opt;
    opt.n_trees = 1 + rng.below(7);
    opt.seed = rng.next_u64();
    const auto m = fit_rf(x, y, opt);
    std::vector<double> q(m.n_features);
    for (auto& v : q) v = 2.0 * rng.normal();
    const auto p = predict_rf(m, q);
    const auto votes = testing::exhaustive_votes(m, q);
    REQUIRE(!votes.empty());
    CHECK(p.votes == votes);
    CHECK(p.label == majority(votes));
  }
}

TEST_CASE("vote totals and tree-order independence") {
  Rng rng(6);
  const auto [x, y] = testing::random_problem(rng, 40, 4, 3);
  RfOptions opt;
  opt.n_trees = 25;
  auto m = fit_rf(x, y, opt);
  std::vector<double> q{0.5, -0.2, 1.0, 2.0};
  const auto before = predict_rf(m, q);
  CHECK(std::accumulate(before.votes.begin(), before.votes.end(), std::size_t{0}) == 25);
  std::reverse(m.trees.begin(), m.trees.end());
  CHECK(predict_rf(m, q).votes == before.votes);
}

TEST_CASE("unrestricted trees fit noise-free distinct data perfectly") {
  Rng rng(7);
  const auto [x, y] = testing::random_problem(rng, 60, 3, 3);
  RfOptions opt;
  opt.bootstrap = false;
  opt.n_trees = 5;
  opt.mtry = 3;
  CHECK(predict_rf(fit_rf(x, y, opt), x) == y);
}

TEST_CASE("depth and leaf limits are honoured") {
  Rng rng(8);
  const auto [x, y] = testing::random_problem(rng, 60, 3, 3);
  RfOptions opt;
  opt.n_trees = 5;
  opt.max_depth = 1;
  for (const auto& t : fit_rf(x, y, opt).trees) CHECK(t.nodes.size() <= 3);
  opt.max_depth = 0;
  opt.min_leaf = 8;
  for (const auto& t : fit_rf(x, y, opt).trees) {
    for (std::size_t l = 0; l < t.leaf_counts.size() / 3; ++l) {
      CHECK(t.leaf_counts[3 * l] + t.leaf_counts[3 * l + 1] + t.leaf_counts[3 * l + 2] >= 8);
    }
  }
}

TEST_CASE("forest is deterministic, independent of threads, and round-trips") {
  Rng rng(9);
  const auto [x, y] = testing::random_problem(rng, 50, 6, 3);
  RfOptions opt;
  opt.n_trees = 12;
  opt.seed = 4;
  const auto a = fit_rf(x, y, opt);
  const auto b = fit_rf(x, y, opt);
  const auto bytes = serialize(a);
  CHECK(serialize(b) == bytes);
  const auto back = deserialize(bytes);
  CHECK(serialize(back) == bytes);
  CHECK(predict_rf(back, x) == predict_rf(a, x));
  opt.seed = 5;
  CHECK(serialize(fit_rf(x, y, opt)) != bytes);
  const std::vector<double> wrong(5, 0.0);
  try {
    predict_rf(a, wrong);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("forest window scan uses the shared selection rule") {
  const auto e = testing::confined_signal_epochs(5, 20, 4, 1.5);
  const auto plan = make_split_plan(e.labels, 5);
  RfOptions opt;
  opt.n_trees = 10;
  TrainingLog log;
  const auto fit = sliding_window_select(e, 16, 8, plan, opt, &log);
  CHECK(fit.selection.starts.size() == 9);
  CHECK(fit.model.window_start == fit.selection.best_start);
  CHECK(fit.model.trees.size() == 10);
  CHECK(log.appearances(plan.validation_indices) == 0);
  CHECK(fit.selection.best_start >= 16);
  CHECK(fit.selection.best_start <= 40);
}
