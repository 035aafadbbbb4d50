#include "gradcheck.hpp"

#include "mrcp/error.hpp"
#include "mrcp/nn/checkpoint.hpp"
#include "mrcp/nn/cnn.hpp"
#include "mrcp/nn/layers.hpp"
#include "mrcp/nn/train.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace mrcp;
using namespace mrcp::nn;

namespace {

Tensor random_tensor(Tensor::Shape s, Rng& rng) {
  Tensor t(s);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

/// Compares an analytic gradient with central differences of f over `values`.
void check_against_fd(std::span<double> values, std::span<const double> analytic, const std::function<double()>& f,
                      const std::string& what) {
  const double h = 1e-4;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = f();
    values[i] = saved - h;
    const double down = f();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    INFO(what << "[" << i << "] analytic " << analytic[i] << " numeric " << numeric);
    CHECK(testing::grad_close(analytic[i], numeric));
  }
}

EpochSet template_dataset(std::size_t per_class, std::size_t ch, std::size_t len, Rng& rng, double noise) {
  EpochSet e;
  e.fs = 16.0;
  e.class_names = {"a", "b", "c"};
  std::vector<SignalMatrix> templates;
  for (int c = 0; c < 3; ++c) {
    SignalMatrix m(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(len));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = 3.0 * rng.normal();
    templates.push_back(m);
  }
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int c = 0; c < 3; ++c) {
      SignalMatrix m = templates[static_cast<std::size_t>(c)];
      for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] += noise * rng.normal();
      e.trials.push_back(m);
      e.labels.push_back(c);
    }
  }
  return e;
}

CnnSpec small_spec(std::size_t ch, std::size_t len) {
  CnnSpec s;
  s.spatial_kernel = ch;
  s.n_samples = len;
  s.temporal_kernel = 5;
  s.depth = 4;
  s.pool_kernel = 4;
  s.fc1_units = 8;
  s.n_classes = 3;
  return s;
}

}  // namespace

TEST_CASE("default spec gives the reference layer sizes") {
  const CnnSpec s;
  CHECK(s.temporal_kernel == 30);
  CHECK(s.spatial_kernel == 58);
  CHECK(s.depth == 40);
  CHECK(s.pool_kernel == 15);
  CHECK(s.fc1_units == 80);
  CHECK(s.n_classes == 3);
  CHECK(s.conv_length() == 51);
  CHECK(s.pooled_length() == 3);
  CHECK(s.flat_features() == 120);
}

TEST_CASE("58 x 80 input traces the documented shapes through real layers") {
  const CnnModel m(CnnSpec{}, 1);
  Rng rng(2);
  const Tensor x = random_tensor({2, 1, 58, 80}, rng);
  const Tensor a1 = m.conv1.forward(x);
  CHECK(a1.shape() == Tensor::Shape{2, 40, 58, 51});
  const Tensor a2 = m.conv2.forward(a1);
  CHECK(a2.shape() == Tensor::Shape{2, 40, 1, 51});
  const Tensor p = m.pool.forward(a2);
  CHECK(p.shape() == Tensor::Shape{2, 40, 1, 3});
  CHECK(p.item_size() == 120);
  const Tensor f1 = m.fc1.forward(p.reshaped({2, 120, 1, 1}));
  CHECK(f1.item_size() == 80);
  const Tensor probs = m.forward(x);
  CHECK(probs.shape() == Tensor::Shape{2, 3, 1, 1});
  for (std::size_t i = 0; i < 2; ++i) {
    double s = 0.0;
    for (double v : probs.item(i)) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-6);
  }
  const auto trace = m.trace_shapes({1, 1, 58, 80});
  CHECK(trace[1].second == Tensor::Shape{1, 40, 58, 51});
  CHECK(trace[2].second == Tensor::Shape{1, 40, 1, 51});
  CHECK(trace[3].second == Tensor::Shape{1, 40, 1, 3});
  CHECK(trace[4].second == Tensor::Shape{1, 120, 1, 1});
  CHECK(trace[5].second == Tensor::Shape{1, 80, 1, 1});
  CHECK(trace[6].second == Tensor::Shape{1, 3, 1, 1});
}

TEST_CASE("spatial conv always collapses the channel axis") {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const std::size_t ch = 1 + rng.below(10);
    const std::size_t t = 1 + rng.below(10);
    SpatialConv sc(3, 2, ch);
    sc.init(rng);
    CHECK(sc.forward(random_tensor({2, 3, ch, t}, rng)).h() == 1);
  }
}

TEST_CASE("shape mismatch is reported") {
  const CnnModel m(CnnSpec{}, 1);
  Rng rng(1);
  CHECK_THROWS_AS(m.forward(random_tensor({1, 1, 57, 80}, rng)), Error);
  CHECK_THROWS_AS(m.trace_shapes({1, 1, 58, 79}), Error);
}

TEST_CASE("zero output layer gives uniform probabilities") {
  CnnModel m(CnnSpec{}, 4);
  std::fill(m.fc2.weight.begin(), m.fc2.weight.end(), 0.0);
  std::fill(m.fc2.bias.begin(), m.fc2.bias.end(), 0.0);
  Rng rng(4);
  const Tensor p = m.forward(random_tensor({3, 1, 58, 80}, rng));
  for (double v : p.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax is invariant to a constant shift of the logits") {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Tensor z = random_tensor({4, 3, 1, 1}, rng);
    const Tensor p = softmax(z);
    const double c = rng.uniform(-50.0, 50.0);
    for (double& v : z.values()) v += c;
    const Tensor q = softmax(z);
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(p.data()[k] - q.data()[k]) <= 1e-8);
  }
  CnnModel m(small_spec(3, 12), 6);
  const Tensor x = random_tensor({2, 1, 3, 12}, rng);
  const Tensor p = m.forward(x);
  for (double& b : m.fc2.bias) b += 7.5;
  const Tensor q = m.forward(x);
  for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(p.data()[k] - q.data()[k]) <= 1e-8);
}

TEST_CASE("cross-entropy limits") {
  const Tensor uniform(2, 3, 1, 1, 0.0);
  const std::vector<int> labels{0, 2};
  CHECK(softmax_cross_entropy(uniform, labels).loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  Tensor sure(2, 3, 1, 1, 0.0);
  sure.at(0, 0, 0, 0) = 60.0;
  sure.at(1, 2, 0, 0) = 60.0;
  CHECK(softmax_cross_entropy(sure, labels).loss < 1e-20);
  const std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(softmax_cross_entropy(uniform, bad), Error);
}

TEST_CASE("layer gradients match finite differences") {
  Rng rng(11);

  SUBCASE("temporal conv") {
    TemporalConv layer(3, 4);
    layer.init(rng);
    Tensor x = random_tensor({2, 1, 3, 9}, rng);
    const Tensor g = random_tensor({2, 3, 3, 6}, rng);
    std::vector<double> dw(layer.weight.size(), 0.0);
    std::vector<double> db(layer.bias.size(), 0.0);
    const Tensor dx = layer.backward(x, g, dw, db, true);
    auto f = [&] { return dot(layer.forward(x), g); };
    check_against_fd(layer.weight, dw, f, "weight");
    check_against_fd(layer.bias, db, f, "bias");
    check_against_fd(x.values(), dx.values(), f, "input");
  }
  SUBCASE("spatial conv") {
    SpatialConv layer(3, 2, 4);
    layer.init(rng);
    Tensor x = random_tensor({2, 3, 4, 5}, rng);
    const Tensor g = random_tensor({2, 2, 1, 5}, rng);
    std::vector<double> dw(layer.weight.size(), 0.0);
    std::vector<double> db(layer.bias.size(), 0.0);
    const Tensor dx = layer.backward(x, g, dw, db);
    auto f = [&] { return dot(layer.forward(x), g); };
    check_against_fd(layer.weight, dw, f, "weight");
    check_against_fd(layer.bias, db, f, "bias");
    check_against_fd(x.values(), dx.values(), f, "input");
  }
  SUBCASE("batch norm") {
    BatchNorm layer(3);
    for (auto& v : layer.gamma) v = rng.uniform(0.5, 1.5);
    for (auto& v : layer.beta) v = rng.normal();
    Tensor x = random_tensor({4, 3, 2, 3}, rng);
    const Tensor g = random_tensor({4, 3, 2, 3}, rng);
    BatchNorm::Cache cache;
    layer.forward(x, Mode::train, &cache);
    std::vector<double> dg(3, 0.0);
    std::vector<double> dbeta(3, 0.0);
    const Tensor dx = layer.backward(cache, g, dg, dbeta);
    auto f = [&] {
      BatchNorm::Cache c;
      return dot(layer.forward(x, Mode::train, &c), g);
    };
    check_against_fd(layer.gamma, dg, f, "gamma");
    check_against_fd(layer.beta, dbeta, f, "beta");
    check_against_fd(x.values(), dx.values(), f, "input");
  }
  SUBCASE("elu") {
    const Elu layer;
    Tensor x = random_tensor({2, 2, 3, 4}, rng);
    for (double& v : x.values()) {
      if (std::abs(v) < 1e-2) v = 0.5;
    }
    const Tensor g = random_tensor(x.shape(), rng);
    const Tensor dx = layer.backward(x, g);
    check_against_fd(x.values(), dx.values(), [&] { return dot(layer.forward(x), g); }, "input");
  }
  SUBCASE("average pool") {
    const AvgPool layer{3};
    Tensor x = random_tensor({2, 2, 1, 10}, rng);
    const Tensor g = random_tensor({2, 2, 1, 3}, rng);
    const Tensor dx = layer.backward(x, g);
    check_against_fd(x.values(), dx.values(), [&] { return dot(layer.forward(x), g); }, "input");
    CHECK(dx.at(0, 0, 0, 9) == 0.0);
  }
  SUBCASE("dense") {
    Dense layer(5, 3);
    layer.init(rng);
    Tensor x = random_tensor({4, 5, 1, 1}, rng);
    const Tensor g = random_tensor({4, 3, 1, 1}, rng);
    std::vector<double> dw(layer.weight.size(), 0.0);
    std::vector<double> db(layer.bias.size(), 0.0);
    const Tensor dx = layer.backward(x, g, dw, db);
    auto f = [&] { return dot(layer.forward(x), g); };
    check_against_fd(layer.weight, dw, f, "weight");
    check_against_fd(layer.bias, db, f, "bias");
    check_against_fd(x.values(), dx.values(), f, "input");
  }
  SUBCASE("softmax cross-entropy") {
    Tensor z = random_tensor({5, 4, 1, 1}, rng);
    const std::vector<int> labels{0, 3, 1, 1, 2};
    const auto r = softmax_cross_entropy(z, labels);
    check_against_fd(z.values(), r.grad_logits.values(), [&] { return softmax_cross_entropy(z, labels).loss; },
                     "logits");
  }
}

TEST_CASE("whole-network gradients on random small configurations") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto r = testing::check_random_network(seed);
    INFO("seed " << seed << " worst " << r.worst_param << " by " << r.worst_excess);
    CHECK(r.checked > 0);
    CHECK(r.failed == 0);
  }
}

TEST_CASE("batch norm normalises per feature in train mode") {
  Rng rng(13);
  BatchNorm bn(4);
  Tensor x = random_tensor({8, 4, 3, 5}, rng);
  for (std::size_t i = 0; i < x.n(); ++i) {
    for (std::size_t f = 0; f < 4; ++f) {
      for (std::size_t h = 0; h < 3; ++h) {
        for (std::size_t w = 0; w < 5; ++w) x.at(i, f, h, w) = 5.0 * f + (1.0 + f) * x.at(i, f, h, w);
      }
    }
  }
  BatchNorm::Cache cache;
  bn.forward(x, Mode::train, &cache);
  for (std::size_t f = 0; f < 4; ++f) {
    double s = 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t k = 0; k < 15; ++k) {
        const double v = cache.xhat.data()[(i * 4 + f) * 15 + k];
        s += v;
        ss += v * v;
      }
    }
    CHECK(std::abs(s / 120.0) <= 1e-5);
    CHECK(std::abs(ss / 120.0 - 1.0) <= 1e-4);
  }
  bn.update_running(cache);
  for (double v : bn.running_var) CHECK(v >= bn.eps);
}

TEST_CASE("separable data is learned within 50 epochs") {
  Rng rng(21);
  const auto data = template_dataset(16, 4, 20, rng, 0.0);
  TrainConfig cfg;
  cfg.max_epochs = 50;
  cfg.seed = 3;
  cfg.learning_rate = 3e-3;
  const auto result = train_cnn(small_spec(4, 20), data, cfg);
  const auto [loss, acc] = evaluate_cnn(result.model, data);
  CHECK(acc >= 0.95);
  CHECK(result.history.epochs.size() <= 50);
  CHECK(result.model.mode() == Mode::inference);
  CHECK(result.model.all_finite());
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  Rng rng(22);
  const auto data = template_dataset(8, 3, 16, rng, 0.5);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.learning_rate = 0.0;
  cfg.seed = 9;
  const auto spec = small_spec(3, 16);
  const auto result = train_cnn(spec, data, cfg);
  const CnnModel fresh(spec, cfg.seed);
  const auto a = result.model.parameters();
  const auto b = fresh.parameters();
  for (std::size_t p = 0; p < a.size(); ++p) {
    for (std::size_t i = 0; i < a[p].values.size(); ++i) CHECK(a[p].values[i] == b[p].values[i]);
  }
}

TEST_CASE("training is deterministic for a seed") {
  Rng rng(23);
  const auto data = template_dataset(10, 3, 16, rng, 1.0);
  TrainConfig cfg;
  cfg.max_epochs = 6;
  cfg.seed = 17;
  const auto spec = small_spec(3, 16);
  const auto a = train_cnn(spec, data, cfg);
  const auto b = train_cnn(spec, data, cfg);
  REQUIRE(a.history.epochs.size() == b.history.epochs.size());
  for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
    CHECK(a.history.epochs[i].train_loss == b.history.epochs[i].train_loss);
    CHECK(a.history.epochs[i].holdout_loss == b.history.epochs[i].holdout_loss);
  }
  CHECK(serialize_cnn(a.model) == serialize_cnn(b.model));
}

TEST_CASE("training preconditions") {
  Rng rng(24);
  const auto data = template_dataset(3, 3, 16, rng, 1.0);
  TrainConfig cfg;
  try {
    train_cnn(small_spec(3, 16), data, cfg);
    FAIL("expected TooFewTrials");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewTrials);
  }
  const auto big = template_dataset(8, 3, 16, rng, 1.0);
  CHECK_THROWS_AS(train_cnn(small_spec(4, 16), big, cfg), Error);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("first Adam step moves each parameter by the learning rate") {
  CnnModel m(small_spec(2, 10), 5);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  Adam adam(m, cfg);
  const auto before = serialize_cnn(m);
  Gradients g;
  for (const auto& p : m.parameters()) g.emplace_back(p.values.size(), 0.5);
  std::vector<std::vector<double>> old;
  for (const auto& p : m.parameters()) old.emplace_back(p.values.begin(), p.values.end());
  adam.step(m, g);
  const auto now = m.parameters();
  for (std::size_t p = 0; p < now.size(); ++p) {
    for (std::size_t i = 0; i < now[p].values.size(); ++i) {
      CHECK(now[p].values[i] - old[p][i] == doctest::Approx(-0.01).epsilon(1e-5));
    }
  }
  CHECK(serialize_cnn(m) != before);
}

TEST_CASE("majority vote") {
  CHECK(majority_vote({30, 30, 20}) == 30);
  CHECK(majority_vote({40, 20}) == 20);
  CHECK(majority_vote({15}) == 15);
  CHECK(majority_vote({10, 15, 15, 10}) == 10);
}

TEST_CASE("grid search returns the per-parameter majority") {
  Rng rng(31);
  std::vector<EpochSet> sets{template_dataset(10, 3, 20, rng, 0.5)};
  GridRanges ranges;
  ranges.temporal_kernel = {5, 3};
  ranges.depth = {2};
  ranges.pool_kernel = {4};
  ranges.fc1_units = {4};
  TrainConfig cfg;
  cfg.max_epochs = 3;
  const auto r = grid_search(ranges, sets, cfg, 3);
  CHECK(r.cells.size() == 2);
  REQUIRE(r.winners.size() == 1);
  CHECK(r.spec.temporal_kernel == r.winners[0].temporal_kernel);
  CHECK(r.spec.depth == 2);
  const auto again = grid_search(ranges, sets, cfg, 3);
  for (std::size_t i = 0; i < r.cells.size(); ++i) CHECK(r.cells[i].accuracy == again.cells[i].accuracy);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  CnnModel m(small_spec(3, 14), 77);
  Rng rng(77);
  for (auto& b : m.buffers()) {
    for (double& v : b.values) v = rng.uniform(0.1, 2.0);
  }
  const auto bytes = serialize_cnn(m);
  const auto back = deserialize_cnn(bytes);
  CHECK(serialize_cnn(back) == bytes);
  CHECK(back.spec() == m.spec());
  CHECK(back.seed() == 77);
  const auto a = m.parameters();
  const auto b = back.parameters();
  for (std::size_t p = 0; p < a.size(); ++p) {
    CHECK(a[p].name == b[p].name);
    for (std::size_t i = 0; i < a[p].values.size(); ++i) CHECK(a[p].values[i] == b[p].values[i]);
  }
  CHECK_THROWS_AS(deserialize_cnn(bytes.substr(0, bytes.size() - 3)), Error);
  CHECK_THROWS_AS(deserialize_cnn("XXXX" + bytes.substr(4)), Error);
}
