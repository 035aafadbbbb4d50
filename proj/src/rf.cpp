#include "mrcp/rf.hpp"

#include "mrcp/binary.hpp"
#include "mrcp/error.hpp"
#include "mrcp/parallel.hpp"
#include "mrcp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>

namespace mrcp::rf {

std::size_t Tree::leaf_of(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& nd = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right);
  }
  return i;
}

int Tree::leaf_class(std::size_t node, std::size_t n_classes) const {
  const auto* c = leaf_counts.data() + static_cast<std::size_t>(nodes[node].leaf) * n_classes;
  std::size_t best = 0;
  for (std::size_t k = 1; k < n_classes; ++k) {
    if (c[k] > c[best]) best = k;
  }
  return static_cast<int>(best);
}

int majority(std::span<const std::size_t> votes) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < votes.size(); ++k) {
    if (votes[k] > votes[best]) best = k;
  }
  return static_cast<int>(best);
}

namespace {

Rng tree_rng(std::uint64_t seed, std::size_t tree) { return Rng(seed, 0x7266).split(tree); }

/// Dense per-column ranks of the training matrix and the distinct values
/// behind them, shared by all trees of a forest.
struct RankedFeatures {
  std::size_t n = 0;
  std::vector<std::uint32_t> rank;  // column-major n x d
  std::vector<double> values;       // distinct sorted values, column after column
  std::vector<std::size_t> offset;  // start of each column in `values`

  explicit RankedFeatures(const Eigen::MatrixXd& x) : n(static_cast<std::size_t>(x.rows())) {
    const auto d = static_cast<std::size_t>(x.cols());
    rank.resize(n * d);
    offset.resize(d);
    std::vector<std::size_t> order(n);
    for (std::size_t f = 0; f < d; ++f) {
      const double* col = x.col(static_cast<Eigen::Index>(f)).data();
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
      offset[f] = values.size();
      for (std::size_t j = 0; j < n; ++j) {
        const double v = col[order[j]];
        if (j == 0 || v != values.back()) values.push_back(v);
        rank[f * n + order[j]] = static_cast<std::uint32_t>(values.size() - offset[f] - 1);
      }
    }
  }
};

class Grower {
 public:
  Grower(const Eigen::MatrixXd& x, const RankedFeatures& ranked, std::span<const int> labels, std::size_t k,
         const RfOptions& opt, std::size_t mtry, Rng rng)
      : x_(x), ranked_(ranked), y_(labels), k_(k), opt_(opt), mtry_(mtry), rng_(std::move(rng)) {
    features_.resize(static_cast<std::size_t>(x.cols()));
    for (std::size_t f = 0; f < features_.size(); ++f) features_[f] = f;
  }

  Tree grow(std::vector<std::size_t> samples) {
    build(samples, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = -1.0;
  };

  std::int32_t make_leaf(const std::vector<std::uint32_t>& counts) {
    Node nd;
    nd.leaf = static_cast<std::int32_t>(tree_.leaf_counts.size() / k_);
    tree_.leaf_counts.insert(tree_.leaf_counts.end(), counts.begin(), counts.end());
    tree_.nodes.push_back(nd);
    return static_cast<std::int32_t>(tree_.nodes.size() - 1);
  }

  /// Best split on one feature; score is sum_k c_k^2 / n over both sides
  /// (higher means lower weighted Gini impurity).
  Split best_on(std::size_t f, const std::vector<std::size_t>& samples) {
    const std::uint32_t* rank = ranked_.rank.data() + f * ranked_.n;
    const double* value = ranked_.values.data() + ranked_.offset[f];
    keys_.clear();
    for (auto i : samples) keys_.push_back(std::uint64_t{rank[i]} << 32 | static_cast<std::uint32_t>(y_[i]));
    std::sort(keys_.begin(), keys_.end());
    Split best;
    best.feature = f;
    if ((keys_.front() >> 32) == (keys_.back() >> 32)) return best;
    left_.assign(k_, 0.0);
    right_.assign(k_, 0.0);
    for (auto key : keys_) right_[key & 0xffffffffu] += 1.0;
    double sq_left = 0.0;
    double sq_right = 0.0;
    for (double c : right_) sq_right += c * c;
    const std::size_t m = keys_.size();
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const std::size_t c = keys_[i] & 0xffffffffu;
      sq_left += 2.0 * left_[c] + 1.0;
      sq_right -= 2.0 * right_[c] - 1.0;
      left_[c] += 1.0;
      right_[c] -= 1.0;
      const auto r0 = keys_[i] >> 32;
      const auto r1 = keys_[i + 1] >> 32;
      if (r0 == r1) continue;
      if (i + 1 < opt_.min_leaf || m - i - 1 < opt_.min_leaf) continue;
      const double n_left = static_cast<double>(i + 1);
      const double n_right = static_cast<double>(m - i - 1);
      const double score = sq_left / n_left + sq_right / n_right;
      if (score > best.score) {
        best.score = score;
        const double lo = value[r0];
        const double hi = value[r1];
        double t = 0.5 * (lo + hi);
        if (!(t < hi)) t = lo;
        best.threshold = t;
      }
    }
    return best;
  }

  std::int32_t build(const std::vector<std::size_t>& samples, std::size_t depth) {
    std::vector<std::uint32_t> counts(k_, 0);
    for (auto i : samples) ++counts[static_cast<std::size_t>(y_[i])];
    const auto nonzero = std::count_if(counts.begin(), counts.end(), [](std::uint32_t c) { return c > 0; });
    if (nonzero <= 1 || samples.size() < 2 * opt_.min_leaf || (opt_.max_depth > 0 && depth >= opt_.max_depth)) {
      return make_leaf(counts);
    }

    // Visit features in a fresh random order; keep looking past mtry until
    // some feature admits a split.
    Split best;
    const std::size_t d = features_.size();
    for (std::size_t j = 0; j < d; ++j) {
      std::swap(features_[j], features_[j + rng_.below(d - j)]);
      const Split s = best_on(features_[j], samples);
      if (s.score > best.score) best = s;
      if (j + 1 >= mtry_ && best.score >= 0.0) break;
    }
    if (best.score < 0.0) return make_leaf(counts);

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto i : samples) {
      (x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best.feature)) <= best.threshold ? left : right)
          .push_back(i);
    }
    tree_.nodes.emplace_back();
    const auto id = static_cast<std::int32_t>(tree_.nodes.size() - 1);
    const std::int32_t l = build(left, depth + 1);
    const std::int32_t r = build(right, depth + 1);
    auto& nd = tree_.nodes[static_cast<std::size_t>(id)];
    nd.feature = static_cast<std::int32_t>(best.feature);
    nd.threshold = best.threshold;
    nd.left = l;
    nd.right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  const RankedFeatures& ranked_;
  std::span<const int> y_;
  std::size_t k_;
  const RfOptions& opt_;
  std::size_t mtry_;
  Rng rng_;
  std::vector<std::size_t> features_;
  std::vector<std::uint64_t> keys_;
  std::vector<double> left_;
  std::vector<double> right_;
  Tree tree_;
};

}  // namespace

std::vector<std::size_t> bootstrap_sample(std::size_t n, std::uint64_t seed, std::size_t tree) {
  Rng rng = tree_rng(seed, tree).split(1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = rng.below(n);
  return out;
}

RfModel fit_rf(const Eigen::MatrixXd& x, std::span<const int> labels, const RfOptions& opt, std::size_t n_classes) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  if (labels.size() != n) {
    raise(ErrorKind::LengthMismatch, std::to_string(n) + " feature rows for " + std::to_string(labels.size()) + " labels");
  }
  if (n < 2) raise(ErrorKind::TooFewTrials, "a forest needs at least 2 trials");
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    raise(ErrorKind::TooFewTrials, "a forest needs at least 2 classes present");
  }
  int max_label = 0;
  for (int l : labels) {
    if (l < 0) raise(ErrorKind::DimensionMismatch, "negative class label");
    max_label = std::max(max_label, l);
  }
  const std::size_t k = n_classes > 0 ? n_classes : static_cast<std::size_t>(max_label + 1);
  if (static_cast<std::size_t>(max_label) >= k) raise(ErrorKind::DimensionMismatch, "label outside class range");
  const std::size_t mtry = opt.mtry > 0 ? opt.mtry : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d)))));
  if (mtry < 1 || mtry > d) {
    raise(ErrorKind::InvalidMtry, "mtry " + std::to_string(mtry) + " outside [1, " + std::to_string(d) + "]");
  }
  if (opt.n_trees < 1) raise(ErrorKind::InvalidConfig, "a forest needs at least one tree");
  if (opt.min_leaf < 1) raise(ErrorKind::InvalidConfig, "min_leaf must be at least 1");
  if (!x.allFinite()) raise(ErrorKind::DegenerateData, "features contain non-finite values");

  RfModel m;
  m.n_features = d;
  m.n_classes = k;
  m.mtry = mtry;
  m.min_leaf = opt.min_leaf;
  m.max_depth = opt.max_depth;
  m.bootstrap = opt.bootstrap;
  m.seed = opt.seed;
  m.trees.resize(opt.n_trees);
  std::vector<std::vector<std::size_t>> bags(opt.n_trees);
  const RankedFeatures ranked(x);
  parallel_for(opt.n_trees, [&](std::size_t t) {
    if (opt.bootstrap) {
      bags[t] = bootstrap_sample(n, opt.seed, t);
    } else {
      bags[t].resize(n);
      for (std::size_t i = 0; i < n; ++i) bags[t][i] = i;
    }
    Grower g(x, ranked, labels, k, opt, mtry, tree_rng(opt.seed, t).split(2));
    m.trees[t] = g.grow(bags[t]);
  });

  if (opt.bootstrap) {
    std::vector<std::vector<std::size_t>> votes(n, std::vector<std::size_t>(k, 0));
    std::vector<char> in_bag(n);
    const Eigen::MatrixXd xt = x.transpose();
    for (std::size_t t = 0; t < opt.n_trees; ++t) {
      std::fill(in_bag.begin(), in_bag.end(), 0);
      for (auto i : bags[t]) in_bag[i] = 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (in_bag[i]) continue;
        const auto leaf = m.trees[t].leaf_of({xt.col(static_cast<Eigen::Index>(i)).data(), d});
        ++votes[i][static_cast<std::size_t>(m.trees[t].leaf_class(leaf, k))];
      }
    }
    std::size_t scored = 0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t total = 0;
      for (auto v : votes[i]) total += v;
      if (total == 0) continue;
      ++scored;
      hit += majority(votes[i]) == labels[i] ? 1 : 0;
    }
    if (scored > 0) m.oob_accuracy = static_cast<double>(hit) / static_cast<double>(scored);
  }
  return m;
}

Prediction predict_rf(const RfModel& m, std::span<const double> x) {
  if (x.size() != m.n_features) {
    raise(ErrorKind::DimensionMismatch, "feature vector has " + std::to_string(x.size()) + " entries, forest expects " +
                                            std::to_string(m.n_features));
  }
  Prediction p;
  p.votes.assign(m.n_classes, 0);
  for (const auto& t : m.trees) ++p.votes[static_cast<std::size_t>(t.leaf_class(t.leaf_of(x), m.n_classes))];
  p.label = majority(p.votes);
  return p;
}

std::vector<int> predict_rf(const RfModel& m, const Eigen::MatrixXd& x) {
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  Eigen::VectorXd row;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    row = x.row(i);
    out[static_cast<std::size_t>(i)] = predict_rf(m, std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))).label;
  }
  return out;
}

WindowFit sliding_window_select(const EpochSet& e, std::size_t win_len, std::size_t step, const SplitPlan& split,
                                const RfOptions& opt, TrainingLog* log) {
  const std::size_t k = e.n_classes();
  auto classify = [k, &opt](const Eigen::MatrixXd& xtr, std::span<const int> ytr, const Eigen::MatrixXd& xte,
                            std::size_t fold) {
    RfOptions o = opt;
    o.seed = splitmix64(opt.seed + 0x9e3779b97f4a7c15ULL * (fold + 1));
    return predict_rf(fit_rf(xtr, ytr, o, k), xte);
  };
  WindowFit out;
  out.selection = scan_windows(e, win_len, step, split, classify, log);
  if (log != nullptr) log->record(split.train_indices);
  const Eigen::MatrixXd x = flatten_window(e, out.selection.best_start, win_len);
  out.model = fit_rf(rows_at(x, split.train_indices), labels_at(e.labels, split.train_indices), opt, k);
  out.model.window_length = win_len;
  out.model.window_start = out.selection.best_start;
  return out;
}

std::string serialize(const RfModel& m) {
  bin::Writer w;
  w.raw("MRRF");
  w.put<std::uint16_t>(1);
  for (auto v : {m.n_features, m.n_classes, m.mtry, m.min_leaf, m.max_depth, m.window_length, m.window_start}) {
    w.put<std::uint64_t>(v);
  }
  w.put<std::uint8_t>(m.bootstrap ? 1 : 0);
  w.put<std::uint64_t>(m.seed);
  w.put<std::uint8_t>(m.oob_accuracy ? 1 : 0);
  w.put(m.oob_accuracy.value_or(0.0));
  w.put<std::uint64_t>(m.trees.size());
  for (const auto& t : m.trees) {
    w.put<std::uint64_t>(t.nodes.size());
    for (const auto& nd : t.nodes) {
      w.put(nd.feature);
      w.put(nd.threshold);
      w.put(nd.left);
      w.put(nd.right);
      w.put(nd.leaf);
    }
    w.put<std::uint64_t>(t.leaf_counts.size());
    for (auto c : t.leaf_counts) w.put(c);
  }
  return w.bytes();
}

RfModel deserialize(std::string_view bytes) {
  bin::Reader r(bytes, "forest model");
  r.expect("MRRF");
  if (r.get<std::uint16_t>() != 1) raise(ErrorKind::FormatError, "unsupported forest model version");
  RfModel m;
  for (auto* v : {&m.n_features, &m.n_classes, &m.mtry, &m.min_leaf, &m.max_depth, &m.window_length, &m.window_start}) {
    *v = r.get<std::uint64_t>();
  }
  m.bootstrap = r.get<std::uint8_t>() != 0;
  m.seed = r.get<std::uint64_t>();
  const bool has_oob = r.get<std::uint8_t>() != 0;
  const double oob = r.get<double>();
  if (has_oob) m.oob_accuracy = oob;
  if (m.n_classes == 0) raise(ErrorKind::FormatError, "forest model has no classes");
  m.trees.resize(r.count(8));
  for (auto& t : m.trees) {
    t.nodes.resize(r.count(24));
    for (auto& nd : t.nodes) {
      nd.feature = r.get<std::int32_t>();
      nd.threshold = r.get<double>();
      nd.left = r.get<std::int32_t>();
      nd.right = r.get<std::int32_t>();
      nd.leaf = r.get<std::int32_t>();
    }
    t.leaf_counts.resize(r.count(4));
    for (auto& c : t.leaf_counts) c = r.get<std::uint32_t>();
    const auto n_nodes = static_cast<std::int32_t>(t.nodes.size());
    const auto n_leaves = static_cast<std::int32_t>(t.leaf_counts.size() / m.n_classes);
    if (t.nodes.empty() || t.leaf_counts.size() % m.n_classes != 0) raise(ErrorKind::FormatError, "malformed tree");
    for (std::int32_t i = 0; i < n_nodes; ++i) {
      const auto& nd = t.nodes[static_cast<std::size_t>(i)];
      const bool ok = nd.feature < 0
                          ? (nd.leaf >= 0 && nd.leaf < n_leaves)
                          : (static_cast<std::size_t>(nd.feature) < m.n_features && nd.left > i && nd.left < n_nodes &&
                             nd.right > i && nd.right < n_nodes);
      if (!ok) raise(ErrorKind::FormatError, "tree node " + std::to_string(i) + " is malformed");
    }
  }
  r.finish();
  return m;
}

void save(const RfModel& m, const std::filesystem::path& path) { bin::write_file_atomic(path, serialize(m)); }

RfModel load(const std::filesystem::path& path) { return deserialize(bin::read_file(path)); }

}  // namespace mrcp::rf
