#include "mrcp/eval.hpp"

#include "mrcp/error.hpp"
#include "mrcp/parallel.hpp"
#include "mrcp/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <sstream>

namespace mrcp::eval {

double accuracy(std::span<const int> preds, std::span<const int> truth) {
  if (preds.size() != truth.size()) {
    raise(ErrorKind::LengthMismatch, std::to_string(preds.size()) + " predictions for " + std::to_string(truth.size()) +
                                         " labels");
  }
  if (preds.empty()) raise(ErrorKind::EmptyInput, "accuracy of no predictions");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double chance_level(std::size_t n_classes, std::size_t n_trials, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) raise(ErrorKind::InvalidAlpha, "alpha must lie in (0, 1)");
  if (n_classes < 2 || n_trials < 1) raise(ErrorKind::InvalidConfig, "chance level needs >= 2 classes and >= 1 trial");
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha / 2.0);
  const double n = static_cast<double>(n_trials);
  const double p0 = 1.0 / static_cast<double>(n_classes);
  const double z2 = z * z;
  const double p = (n * p0 + z2 / 2.0) / (n + z2);
  return p + z * std::sqrt(p * (1.0 - p) / (n + z2));
}

Confusion confusion_matrix(std::span<const int> preds, std::span<const int> truth, std::size_t n_classes) {
  if (preds.size() != truth.size()) raise(ErrorKind::LengthMismatch, "confusion needs one prediction per label");
  Confusion c(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || truth[i] < 0 || static_cast<std::size_t>(preds[i]) >= n_classes ||
        static_cast<std::size_t>(truth[i]) >= n_classes) {
      raise(ErrorKind::DimensionMismatch, "class index outside the confusion matrix");
    }
    ++c[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(preds[i])];
  }
  return c;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::cnn: return "cnn";
    case ModelKind::slda: return "slda";
    case ModelKind::rf: return "rf";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "cnn") return ModelKind::cnn;
  if (name == "slda") return ModelKind::slda;
  if (name == "rf") return ModelKind::rf;
  raise(ErrorKind::UsageError, "unknown model \"" + name + "\" (expected cnn, slda or rf)");
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string CvConfig::canonical() const {
  std::ostringstream s;
  s << "model=" << to_string(kind) << ";window_s=" << num(window_s) << ";window_step=" << window_step
    << ";rf.n_trees=" << forest.n_trees << ";rf.mtry=" << forest.mtry << ";rf.min_leaf=" << forest.min_leaf
    << ";rf.max_depth=" << forest.max_depth << ";rf.bootstrap=" << forest.bootstrap << ";rf.seed=" << forest.seed
    << ";cnn.temporal_kernel=" << cnn.temporal_kernel << ";cnn.depth=" << cnn.depth
    << ";cnn.pool_kernel=" << cnn.pool_kernel << ";cnn.fc1_units=" << cnn.fc1_units
    << ";train.learning_rate=" << num(train.learning_rate) << ";train.batch_size=" << train.batch_size
    << ";train.max_epochs=" << train.max_epochs << ";train.patience=" << train.early_stop_patience
    << ";train.holdout=" << num(train.holdout_fraction) << ";train.seed=" << train.seed
    << ";train.beta1=" << num(train.beta1) << ";train.beta2=" << num(train.beta2)
    << ";train.eps=" << num(train.adam_eps) << ";cv_max_epochs=" << cv_max_epochs << ";alpha=" << num(alpha)
    << ";upstream=" << upstream_fingerprint;
  return s.str();
}

std::string fingerprint(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

double EvalReport::fold_mean() const {
  if (per_fold.empty()) return 0.0;
  double s = 0.0;
  for (double a : per_fold) s += a;
  return s / static_cast<double>(per_fold.size());
}

namespace {

void verify_plan(const SplitPlan& split, const EpochSet& data) {
  const auto problems = check_split_plan(split, data.labels);
  if (!problems.empty()) raise(ErrorKind::InvalidConfig, "split plan failed verification: " + problems.front());
}

std::vector<double> cnn_folds(const EpochSet& data, const CvConfig& cfg, const nn::CnnSpec& spec,
                              const SplitPlan& split, std::vector<bool>& failed, TrainingLog* log) {
  const std::size_t n_folds = split.n_repeats() * split.n_folds();
  std::vector<double> acc(n_folds, 0.0);
  std::vector<char> bad(n_folds, 0);
  parallel_for(n_folds, [&](std::size_t k) {
    const std::size_t r = k / split.n_folds();
    const std::size_t f = k % split.n_folds();
    const auto train = split.fold_training(r, f);
    const auto& test = split.fold_assignments[r][f];
    if (log != nullptr) log->record(train);
    nn::TrainConfig tc = cfg.train;
    tc.max_epochs = std::min(cfg.cv_max_epochs, cfg.train.max_epochs);
    tc.seed = splitmix64(cfg.train.seed + 0x9e3779b97f4a7c15ULL * (k + 1));
    try {
      const auto model = nn::train_cnn(spec, data.subset(train), tc).model;
      const auto pred = model.predict(data.subset(test));
      acc[k] = accuracy(pred, labels_at(data.labels, test));
    } catch (const Error&) {
      bad[k] = 1;
    }
  });
  failed.assign(bad.begin(), bad.end());
  return acc;
}

}  // namespace

CvOutcome run_cv(const EpochSet& data, const CvConfig& cfg, const SplitPlan& split, TrainingLog* log) {
  data.check_consistent();
  verify_plan(split, data);
  if (split.validation_indices.empty()) raise(ErrorKind::TooFewTrials, "split plan has no validation trials");

  CvOutcome out;
  EvalReport& rep = out.report;
  rep.model = to_string(cfg.kind);
  rep.seed = split.seed;
  rep.upstream_fingerprint = cfg.upstream_fingerprint;
  rep.config_fingerprint = fingerprint(cfg.canonical() + ";split_seed=" + std::to_string(split.seed));

  const auto& valid = split.validation_indices;
  const auto truth = labels_at(data.labels, valid);
  std::vector<int> pred;

  switch (cfg.kind) {
    case ModelKind::slda:
    case ModelKind::rf: {
      const std::size_t len = window_samples(cfg.window_s, data.fs);
      WindowSelection sel;
      if (cfg.kind == ModelKind::slda) {
        auto fit = slda::sliding_window_select(data, len, cfg.window_step, split, log);
        sel = std::move(fit.selection);
        out.slda = std::move(fit.model);
        pred = slda::predict_slda(out.slda, rows_at(flatten_window(data, sel.best_start, len), valid));
      } else {
        auto fit = rf::sliding_window_select(data, len, cfg.window_step, split, cfg.forest, log);
        sel = std::move(fit.selection);
        out.forest = std::move(fit.model);
        pred = rf::predict_rf(out.forest, rows_at(flatten_window(data, sel.best_start, len), valid));
      }
      rep.per_fold = sel.best_fold_accuracies;
      rep.fold_failed = sel.best_fold_failed;
      rep.window_length = len;
      rep.window_start = sel.best_start;
      rep.window_curve = sel.curve;
      break;
    }
    case ModelKind::cnn: {
      nn::CnnSpec spec = cfg.cnn;
      spec.spatial_kernel = data.n_channels();
      spec.n_samples = data.n_samples();
      spec.n_classes = data.n_classes();
      rep.per_fold = cnn_folds(data, cfg, spec, split, rep.fold_failed, log);
      if (log != nullptr) log->record(split.train_indices);
      out.cnn = nn::train_cnn(spec, data.subset(split.train_indices), cfg.train).model;
      pred = out.cnn.predict(data.subset(valid));
      break;
    }
  }

  rep.complete = std::none_of(rep.fold_failed.begin(), rep.fold_failed.end(), [](bool b) { return b; });
  rep.n_validation = valid.size();
  rep.confusion = confusion_matrix(pred, truth, data.n_classes());
  rep.accuracy = accuracy(pred, truth);
  rep.chance_level = chance_level(data.n_classes(), valid.size(), cfg.alpha);
  return out;
}

ComparisonTable compare_models(const std::vector<ReportRow>& rows) {
  if (rows.empty()) raise(ErrorKind::EmptyInput, "comparison needs at least one report");
  for (const auto& r : rows) {
    if (r.upstream_fingerprint != rows.front().upstream_fingerprint) {
      raise(ErrorKind::FingerprintMismatch, "reports for " + r.participant + "/" + r.model +
                                                " were produced with preprocessing " + r.upstream_fingerprint +
                                                ", others with " + rows.front().upstream_fingerprint);
    }
  }
  ComparisonTable t;
  auto index_of = [](std::vector<std::string>& v, const std::string& s) {
    const auto it = std::find(v.begin(), v.end(), s);
    if (it != v.end()) return static_cast<std::size_t>(it - v.begin());
    v.push_back(s);
    return v.size() - 1;
  };
  for (const auto& r : rows) {
    index_of(t.participants, r.participant);
    index_of(t.models, r.model);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  t.accuracy.assign(t.participants.size(), std::vector<double>(t.models.size(), nan));
  for (const auto& r : rows) t.accuracy[index_of(t.participants, r.participant)][index_of(t.models, r.model)] = r.accuracy;

  for (std::size_t m = 0; m < t.models.size(); ++m) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& row : t.accuracy) {
      if (!std::isnan(row[m])) {
        s += row[m];
        ++n;
      }
    }
    const double mean = n > 0 ? s / static_cast<double>(n) : nan;
    double ss = 0.0;
    for (const auto& row : t.accuracy) {
      if (!std::isnan(row[m])) ss += (row[m] - mean) * (row[m] - mean);
    }
    t.mean.push_back(mean);
    t.std_dev.push_back(n > 0 ? std::sqrt(ss / static_cast<double>(n)) : nan);
  }
  for (const auto& row : t.accuracy) {
    std::size_t best = 0;
    for (std::size_t m = 0; m < row.size(); ++m) {
      if (std::isnan(row[best]) || (!std::isnan(row[m]) && row[m] > row[best])) best = m;
    }
    t.best.push_back(best);
  }
  return t;
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream s;
  s << "participant";
  for (const auto& m : models) s << ',' << m;
  s << ",best\n";
  for (std::size_t p = 0; p < participants.size(); ++p) {
    s << participants[p];
    for (double a : accuracy[p]) s << ',' << (std::isnan(a) ? std::string() : num(a));
    s << ',' << models[best[p]] << '\n';
  }
  s << "MEAN";
  for (double v : mean) s << ',' << num(v);
  s << ",\nSTD";
  for (double v : std_dev) s << ',' << num(v);
  s << ",\n";
  return s.str();
}

std::string ComparisonTable::to_text() const {
  std::size_t first = 11;
  for (const auto& p : participants) first = std::max(first, p.size());
  std::vector<std::size_t> width;
  for (const auto& m : models) width.push_back(std::max<std::size_t>(m.size(), 6) + 1);
  std::ostringstream s;
  s << std::left << std::setw(static_cast<int>(first)) << "Participant";
  for (std::size_t m = 0; m < models.size(); ++m) s << "  " << std::right << std::setw(static_cast<int>(width[m])) << models[m];
  s << '\n';
  auto cell = [](double v, bool star) {
    if (std::isnan(v)) return std::string("-");
    std::ostringstream c;
    c << std::fixed << std::setprecision(2) << v << (star ? "*" : " ");
    return c.str();
  };
  for (std::size_t p = 0; p < participants.size(); ++p) {
    s << std::left << std::setw(static_cast<int>(first)) << participants[p];
    for (std::size_t m = 0; m < models.size(); ++m) {
      s << "  " << std::right << std::setw(static_cast<int>(width[m])) << cell(accuracy[p][m], best[p] == m);
    }
    s << '\n';
  }
  s << std::left << std::setw(static_cast<int>(first)) << "MEAN";
  for (std::size_t m = 0; m < models.size(); ++m) s << "  " << std::right << std::setw(static_cast<int>(width[m])) << cell(mean[m], false);
  s << '\n' << std::left << std::setw(static_cast<int>(first)) << "STD";
  for (std::size_t m = 0; m < models.size(); ++m) s << "  " << std::right << std::setw(static_cast<int>(width[m])) << cell(std_dev[m], false);
  s << "\n(* best per participant)\n";
  return s.str();
}

namespace {

constexpr const char* kRowHeader =
    "participant,model,accuracy,chance_level,n_validation,window_length,window_start,seed,config_fingerprint,"
    "upstream_fingerprint";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string rows_to_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream s;
  s << kRowHeader << '\n';
  for (const auto& r : rows) {
    s << r.participant << ',' << r.model << ',' << num(r.accuracy) << ',' << num(r.chance_level) << ','
      << r.n_validation << ',' << r.window_length << ',' << r.window_start << ',' << r.seed << ','
      << r.config_fingerprint << ',' << r.upstream_fingerprint << '\n';
  }
  return s.str();
}

std::vector<ReportRow> rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRowHeader) raise(ErrorKind::FormatError, "report records lack the expected header");
  std::vector<ReportRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 10) raise(ErrorKind::FormatError, "report line " + std::to_string(line_no) + " has " + std::to_string(f.size()) + " fields");
    try {
      ReportRow r;
      r.participant = f[0];
      r.model = f[1];
      r.accuracy = std::stod(f[2]);
      r.chance_level = std::stod(f[3]);
      r.n_validation = std::stoull(f[4]);
      r.window_length = std::stoull(f[5]);
      r.window_start = std::stoull(f[6]);
      r.seed = std::stoull(f[7]);
      r.config_fingerprint = f[8];
      r.upstream_fingerprint = f[9];
      rows.push_back(r);
    } catch (const std::logic_error&) {
      raise(ErrorKind::FormatError, "report line " + std::to_string(line_no) + " has a malformed number");
    }
  }
  return rows;
}

std::string confusion_to_text(const Confusion& c, const std::vector<std::string>& class_names) {
  std::size_t w = 6;
  for (const auto& n : class_names) w = std::max(w, n.size());
  std::ostringstream s;
  s << std::left << std::setw(static_cast<int>(w)) << "truth";
  for (const auto& n : class_names) s << "  " << std::right << std::setw(static_cast<int>(w)) << n;
  s << '\n';
  for (std::size_t i = 0; i < c.size(); ++i) {
    s << std::left << std::setw(static_cast<int>(w)) << (i < class_names.size() ? class_names[i] : std::to_string(i));
    for (auto v : c[i]) s << "  " << std::right << std::setw(static_cast<int>(w)) << v;
    s << '\n';
  }
  return s.str();
}

std::string report_to_text(const EvalReport& r, const std::vector<std::string>& class_names) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  s << "model               " << r.model << '\n';
  s << "validation accuracy " << r.accuracy << " (" << r.n_validation << " trials)\n";
  s << "chance level        " << r.chance_level << '\n';
  s << "cv folds            " << r.per_fold.size() << ", mean " << r.fold_mean() << (r.complete ? "" : ", incomplete")
    << '\n';
  if (r.window_length > 0) {
    s << "window              " << r.window_length << " samples from sample " << r.window_start << '\n';
  }
  s << "seed                " << r.seed << '\n';
  s << "config fingerprint  " << r.config_fingerprint << '\n';
  s << "upstream            " << r.upstream_fingerprint << '\n';
  s << "confusion (rows = truth)\n" << confusion_to_text(r.confusion, class_names);
  return s.str();
}

}  // namespace mrcp::eval
