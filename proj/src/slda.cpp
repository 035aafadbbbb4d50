#include "mrcp/slda.hpp"

#include "mrcp/binary.hpp"
#include "mrcp/error.hpp"

#include <algorithm>
#include <cmath>

namespace mrcp::slda {

namespace {

struct Centred {
  Eigen::MatrixXd means;  // K x d
  Eigen::MatrixXd xc;     // n x d
  std::vector<std::size_t> counts;
};

std::size_t class_count(std::span<const int> labels, std::size_t n_classes) {
  if (n_classes > 0) return n_classes;
  int mx = -1;
  for (int l : labels) mx = std::max(mx, l);
  return static_cast<std::size_t>(mx + 1);
}

Centred centre(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t k) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    raise(ErrorKind::LengthMismatch, std::to_string(x.rows()) + " feature rows for " + std::to_string(labels.size()) +
                                         " labels");
  }
  if (!x.allFinite()) raise(ErrorKind::DegenerateData, "features contain non-finite values");
  Centred c;
  c.means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), x.cols());
  c.counts.assign(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= k) {
      raise(ErrorKind::DimensionMismatch, "label " + std::to_string(l) + " outside " + std::to_string(k) + " classes");
    }
    c.means.row(l) += x.row(static_cast<Eigen::Index>(i));
    ++c.counts[static_cast<std::size_t>(l)];
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (c.counts[j] > 0) c.means.row(static_cast<Eigen::Index>(j)) /= static_cast<double>(c.counts[j]);
  }
  c.xc = x;
  for (std::size_t i = 0; i < labels.size(); ++i) c.xc.row(static_cast<Eigen::Index>(i)) -= c.means.row(labels[i]);
  return c;
}

/// Shrinkage from the Gram matrix G = Xc Xc' of n centred rows in d dimensions.
ShrinkageEstimate shrinkage_from_gram(const Eigen::MatrixXd& gram, std::size_t d) {
  const double n = static_cast<double>(gram.rows());
  if (n < 2.0) raise(ErrorKind::TooFewTrials, "shrinkage needs at least 2 trials");
  const double trace = gram.trace();
  if (!(trace > 0.0)) return {1.0, true};
  const double w = gram.squaredNorm() / (n * n);
  const double a = gram.diagonal().array().square().sum();
  const double num = n / ((n - 1.0) * (n - 1.0) * (n - 1.0)) * (a - n * w);
  const double nu = trace / (n - 1.0) / static_cast<double>(d);
  const double den = (n / (n - 1.0)) * (n / (n - 1.0)) * w - static_cast<double>(d) * nu * nu;
  if (!(den > 0.0)) return {1.0, false};
  return {std::clamp(num / den, 0.0, 1.0), false};
}

void require_classes(const std::vector<std::size_t>& counts) {
  if (counts.size() < 2) raise(ErrorKind::TooFewTrials, "sLDA needs at least 2 classes");
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] < 2) {
      raise(ErrorKind::TooFewTrials, "class " + std::to_string(j) + " has " + std::to_string(counts[j]) +
                                         " trials, sLDA needs 2");
    }
  }
}

Eigen::VectorXd discriminant_bias(const Eigen::MatrixXd& means, const Eigen::MatrixXd& weights,
                                  const std::vector<std::size_t>& counts, double n) {
  Eigen::VectorXd b(means.rows());
  for (Eigen::Index k = 0; k < means.rows(); ++k) {
    b(k) = -0.5 * means.row(k).dot(weights.col(k)) + std::log(static_cast<double>(counts[static_cast<std::size_t>(k)]) / n);
  }
  return b;
}

int argmax_first(const Eigen::VectorXd& s) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < s.size(); ++k) {
    if (s(k) > s(best)) best = k;
  }
  return static_cast<int>(best);
}

}  // namespace

ShrinkageEstimate estimate_shrinkage(const Eigen::MatrixXd& x, std::span<const int> labels) {
  const auto c = centre(x, labels, class_count(labels, 0));
  return shrinkage_from_gram(c.xc * c.xc.transpose(), static_cast<std::size_t>(x.cols()));
}

ShrinkageEstimate estimate_shrinkage(const std::vector<Eigen::MatrixXd>& per_class) {
  Eigen::Index rows = 0;
  Eigen::Index cols = per_class.empty() ? 0 : per_class.front().cols();
  for (const auto& m : per_class) {
    if (m.cols() != cols) raise(ErrorKind::DimensionMismatch, "class feature matrices differ in width");
    rows += m.rows();
  }
  Eigen::MatrixXd x(rows, cols);
  std::vector<int> labels;
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < per_class.size(); ++k) {
    x.middleRows(r, per_class[k].rows()) = per_class[k];
    r += per_class[k].rows();
    labels.insert(labels.end(), static_cast<std::size_t>(per_class[k].rows()), static_cast<int>(k));
  }
  return estimate_shrinkage(x, labels);
}

SldaModel fit_slda(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t n_classes,
                   std::optional<double> forced_gamma) {
  const std::size_t k = class_count(labels, n_classes);
  auto c = centre(x, labels, k);
  require_classes(c.counts);
  if (forced_gamma && !(*forced_gamma >= 0.0 && *forced_gamma <= 1.0)) {
    raise(ErrorKind::InvalidConfig, "forced shrinkage must lie in [0, 1]");
  }
  const auto n = static_cast<double>(x.rows());
  const auto d = static_cast<double>(x.cols());

  SldaModel m;
  m.class_means = c.means;
  Eigen::MatrixXd s = (c.xc.transpose() * c.xc) / (n - static_cast<double>(k));
  m.nu = s.trace() / d;
  if (forced_gamma) {
    m.gamma = *forced_gamma;
  } else {
    const auto est = shrinkage_from_gram(c.xc * c.xc.transpose(), static_cast<std::size_t>(x.cols()));
    m.gamma = est.gamma;
    m.degenerate = est.degenerate;
  }
  s *= 1.0 - m.gamma;
  s.diagonal().array() += m.gamma * m.nu;
  m.shrunk_covariance = 0.5 * (s + s.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(m.shrunk_covariance);
  if (llt.info() != Eigen::Success) {
    raise(ErrorKind::SingularAfterShrinkage,
          "shrunk covariance is not positive definite (gamma " + std::to_string(m.gamma) + ")");
  }
  m.weights = llt.solve(m.class_means.transpose());
  if (!m.weights.allFinite()) raise(ErrorKind::SingularAfterShrinkage, "discriminant weights are not finite");
  m.bias = discriminant_bias(m.class_means, m.weights, c.counts, n);
  for (auto cnt : c.counts) m.priors.push_back(static_cast<double>(cnt) / n);
  return m;
}

Prediction predict_slda(const SldaModel& m, std::span<const double> x) {
  if (x.size() != m.dim()) {
    raise(ErrorKind::DimensionMismatch, "feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                                            std::to_string(m.dim()));
  }
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd s = m.weights.transpose() * v + m.bias;
  return {argmax_first(s), {s.data(), s.data() + s.size()}};
}

std::vector<int> predict_slda(const SldaModel& m, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != m.dim()) {
    raise(ErrorKind::DimensionMismatch, "features have " + std::to_string(x.cols()) + " columns, model expects " +
                                            std::to_string(m.dim()));
  }
  const Eigen::MatrixXd s = (x * m.weights).rowwise() + m.bias.transpose();
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax_first(s.row(i).transpose());
  return out;
}

std::vector<int> Discriminant::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != weights.rows()) raise(ErrorKind::DimensionMismatch, "feature width differs from the discriminant");
  const Eigen::MatrixXd s = (x * weights).rowwise() + bias.transpose();
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax_first(s.row(i).transpose());
  return out;
}

Discriminant fit_discriminant(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t n_classes) {
  const std::size_t k = class_count(labels, n_classes);
  const auto c = centre(x, labels, k);
  require_classes(c.counts);
  const auto n = static_cast<double>(x.rows());
  const auto d = static_cast<double>(x.cols());
  const Eigen::MatrixXd gram = c.xc * c.xc.transpose();
  const auto est = shrinkage_from_gram(gram, static_cast<std::size_t>(x.cols()));
  const double nu = gram.trace() / (n - static_cast<double>(k)) / d;
  const double alpha = est.gamma * nu;
  const double beta = (1.0 - est.gamma) / (n - static_cast<double>(k));

  Discriminant out;
  out.gamma = est.gamma;
  if (!(alpha > 0.0)) {
    const auto full = fit_slda(x, labels, k, est.gamma);
    out.weights = full.weights;
    out.bias = full.bias;
    return out;
  }
  const Eigen::MatrixXd mt = c.means.transpose();
  if (beta == 0.0) {
    out.weights = mt / alpha;
  } else {
    Eigen::MatrixXd g = gram;
    g.diagonal().array() += alpha / beta;
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) raise(ErrorKind::SingularAfterShrinkage, "Woodbury system is not positive definite");
    out.weights = (mt - c.xc.transpose() * llt.solve(c.xc * mt)) / alpha;
  }
  if (!out.weights.allFinite()) raise(ErrorKind::SingularAfterShrinkage, "discriminant weights are not finite");
  out.bias = discriminant_bias(c.means, out.weights, c.counts, n);
  return out;
}

WindowFit sliding_window_select(const EpochSet& e, std::size_t win_len, std::size_t step, const SplitPlan& split,
                                TrainingLog* log) {
  const std::size_t k = e.n_classes();
  auto classify = [k](const Eigen::MatrixXd& xtr, std::span<const int> ytr, const Eigen::MatrixXd& xte, std::size_t) {
    return fit_discriminant(xtr, ytr, k).predict(xte);
  };
  WindowFit out;
  out.selection = scan_windows(e, win_len, step, split, classify, log);
  if (log != nullptr) log->record(split.train_indices);
  const Eigen::MatrixXd x = flatten_window(e, out.selection.best_start, win_len);
  out.model = fit_slda(rows_at(x, split.train_indices), labels_at(e.labels, split.train_indices), k);
  out.model.window_length = win_len;
  out.model.window_start = out.selection.best_start;
  return out;
}

namespace {

void put_matrix(bin::Writer& w, const Eigen::MatrixXd& m) {
  w.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.put(m(i, j));
  }
}

Eigen::MatrixXd get_matrix(bin::Reader& r) {
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  if (cols != 0 && rows > r.remaining() / sizeof(double) / cols) raise(ErrorKind::FormatError, "sLDA matrix exceeds file");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.get<double>();
  }
  return m;
}

}  // namespace

std::string serialize(const SldaModel& m) {
  bin::Writer w;
  w.raw("MRSL");
  w.put<std::uint16_t>(1);
  w.put<std::uint64_t>(m.window_length);
  w.put<std::uint64_t>(m.window_start);
  w.put(m.gamma);
  w.put(m.nu);
  w.put<std::uint8_t>(m.degenerate ? 1 : 0);
  w.f64s(m.priors);
  put_matrix(w, m.class_means);
  put_matrix(w, m.shrunk_covariance);
  put_matrix(w, m.weights);
  put_matrix(w, m.bias);
  return w.bytes();
}

SldaModel deserialize(std::string_view bytes) {
  bin::Reader r(bytes, "sLDA model");
  r.expect("MRSL");
  if (r.get<std::uint16_t>() != 1) raise(ErrorKind::FormatError, "unsupported sLDA model version");
  SldaModel m;
  m.window_length = r.get<std::uint64_t>();
  m.window_start = r.get<std::uint64_t>();
  m.gamma = r.get<double>();
  m.nu = r.get<double>();
  m.degenerate = r.get<std::uint8_t>() != 0;
  m.priors = r.f64s();
  m.class_means = get_matrix(r);
  m.shrunk_covariance = get_matrix(r);
  m.weights = get_matrix(r);
  const Eigen::MatrixXd bias = get_matrix(r);
  r.finish();
  if (bias.cols() != 1) raise(ErrorKind::FormatError, "sLDA bias is not a vector");
  m.bias = bias.col(0);
  const auto k = m.class_means.rows();
  const auto d = m.class_means.cols();
  if (m.priors.size() != static_cast<std::size_t>(k) || m.shrunk_covariance.rows() != d ||
      m.shrunk_covariance.cols() != d || m.weights.rows() != d || m.weights.cols() != k || m.bias.size() != k) {
    raise(ErrorKind::FormatError, "sLDA model arrays have inconsistent shapes");
  }
  return m;
}

void save(const SldaModel& m, const std::filesystem::path& path) { bin::write_file_atomic(path, serialize(m)); }

SldaModel load(const std::filesystem::path& path) { return deserialize(bin::read_file(path)); }

}  // namespace mrcp::slda
