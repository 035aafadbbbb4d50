#include "mrcp/cli.hpp"

#include "mrcp/config.hpp"
#include "mrcp/dsp.hpp"
#include "mrcp/epoching.hpp"
#include "mrcp/eval.hpp"
#include "mrcp/io.hpp"
#include "mrcp/nn/checkpoint.hpp"
#include "mrcp/synth.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace mrcp::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kRecordingFile = "recording.eegr";
constexpr const char* kEventsFile = "events.csv";
constexpr const char* kEpochsFile = "epochs.eege";
constexpr const char* kConfigFile = "config.ini";

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::data: return "data";
    case ErrorCategory::numerical: return "numerical";
  }
  return "usage";
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "configuration document");
  sub->add_option("--set", c.overrides, "override as section.key=value")->allow_extra_args(false);
}

/// --config, else the upstream directory's config.ini, else defaults; then overrides.
PipelineConfig resolve_config(const Common& c, const std::optional<fs::path>& upstream) {
  PipelineConfig cfg;
  if (!c.config_path.empty()) {
    cfg = PipelineConfig::from_ini(io::read_text(c.config_path));
  } else if (upstream && fs::exists(*upstream / kConfigFile)) {
    cfg = PipelineConfig::from_ini(io::read_text(*upstream / kConfigFile));
  }
  for (const auto& o : c.overrides) cfg.apply_override(o);
  return cfg;
}

void write_config(const fs::path& dir, const PipelineConfig& cfg) {
  io::write_text(dir / kConfigFile, "# fingerprint " + cfg.fingerprint() + "\n# preprocessing " +
                                         cfg.preprocessing_fingerprint() + "\n" + cfg.to_ini());
}

std::string participant_name(const std::string& given, const fs::path& in) {
  if (!given.empty()) return given;
  const auto name = fs::absolute(in).lexically_normal().filename().string();
  return name.empty() ? fs::absolute(in).lexically_normal().parent_path().filename().string() : name;
}

eval::CvConfig cv_config(const PipelineConfig& c, eval::ModelKind kind, double window_s, const std::string& upstream) {
  eval::CvConfig cv;
  cv.kind = kind;
  cv.window_s = window_s;
  cv.window_step = c.window_step;
  cv.forest = c.forest;
  cv.cnn = c.cnn;
  cv.train = c.train;
  cv.cv_max_epochs = c.cv_max_epochs;
  cv.alpha = c.alpha;
  cv.upstream_fingerprint = upstream;
  return cv;
}

eval::ReportRow row_of(const std::string& participant, const eval::EvalReport& r) {
  return {participant, r.model,  r.accuracy, r.chance_level,       r.n_validation,
          r.window_length, r.window_start, r.seed, r.config_fingerprint, r.upstream_fingerprint};
}

std::string fixed4(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

// --- subcommands -----------------------------------------------------------

int cmd_synth(const Common& common, const std::optional<std::uint64_t>& seed, const fs::path& out_dir,
              std::ostream& out) {
  auto cfg = resolve_config(common, std::nullopt);
  if (seed) cfg.synth.seed = *seed;
  const auto data = synth::generate(cfg.synth);
  io::write_recording(out_dir / kRecordingFile, data.recording);
  io::write_events(out_dir / kEventsFile, data.events);
  write_config(out_dir, cfg);
  out << "synth: " << data.recording.n_channels() << " channels, " << data.recording.n_samples() << " samples at "
      << data.recording.fs << " Hz, " << data.events.onsets.size() << " onsets\n";
  return 0;
}

int cmd_preprocess(const Common& common, const fs::path& in_dir, const fs::path& out_dir, std::ostream& out) {
  const auto cfg = resolve_config(common, in_dir);
  const auto rec = io::read_recording(in_dir / kRecordingFile);
  const auto ev = io::read_events(in_dir / kEventsFile);
  require_valid(rec);
  const auto problems = validate_events(ev, rec.n_samples(), rec.fs);
  if (!problems.empty()) raise(ErrorKind::InvalidEvents, problems.front().field + ": " + problems.front().detail);
  const auto filtered = dsp::preprocess_chain(rec, cfg.preprocess);
  const auto events = epoching::rescale_events(ev, rec.fs, filtered.fs);
  io::write_recording(out_dir / kRecordingFile, filtered);
  io::write_events(out_dir / kEventsFile, events);
  write_config(out_dir, cfg);
  out << "preprocess: " << filtered.n_samples() << " samples at " << filtered.fs << " Hz\n";
  return 0;
}

int cmd_epoch(const Common& common, const fs::path& in_dir, const fs::path& out_dir, std::ostream& out) {
  const auto cfg = resolve_config(common, in_dir);
  const auto rec = io::read_recording(in_dir / kRecordingFile);
  const auto ev = io::read_events(in_dir / kEventsFile);
  const auto e = epoching::build_dataset(rec, ev, cfg.epoch);
  io::write_epochs(out_dir / kEpochsFile, e, cfg.preprocessing_fingerprint());
  write_config(out_dir, cfg);
  out << "epoch: " << e.size() << " trials of " << e.n_channels() << " x " << e.n_samples() << '\n';
  return 0;
}

int cmd_reject(const Common& common, const fs::path& in_dir, const fs::path& out_dir, std::ostream& out) {
  const auto cfg = resolve_config(common, in_dir);
  const auto [e, fp] = io::read_epochs(in_dir / kEpochsFile);
  const auto [kept, report] = epoching::reject_outliers(e, cfg.reject_amp_uv, cfg.reject_kurt_factor);
  io::write_epochs(out_dir / kEpochsFile, kept, cfg.preprocessing_fingerprint());
  io::write_text(out_dir / "rejection.csv", io::encode_rejection(report));
  write_config(out_dir, cfg);
  out << "reject: kept " << report.kept_indices.size() << ", rejected " << report.rejected_indices.size() << '\n';
  return 0;
}

int cmd_train(const Common& common, const fs::path& in_dir, const fs::path& out_dir, const std::string& model_name,
              const std::optional<double>& window, const std::string& participant, std::ostream& out) {
  const auto cfg = resolve_config(common, in_dir);
  const auto kind = eval::parse_model_kind(model_name);
  const auto [e, fp] = io::read_epochs(in_dir / kEpochsFile);
  const auto plan = make_split_plan(e.labels, cfg.split_seed, cfg.split);
  const double window_s = window.value_or(cfg.window_lengths_s.back());
  const auto cv = cv_config(cfg, kind, window_s, fp);

  eval::EvalReport rep;
  std::string model_bytes;
  if (kind == eval::ModelKind::cnn) {
    nn::CnnSpec spec = cfg.cnn;
    spec.spatial_kernel = e.n_channels();
    spec.n_samples = e.n_samples();
    spec.n_classes = e.n_classes();
    const auto result = nn::train_cnn(spec, e.subset(plan.train_indices), cfg.train);
    const auto& valid = plan.validation_indices;
    const auto pred = result.model.predict(e.subset(valid));
    const auto truth = labels_at(e.labels, valid);
    rep.model = eval::to_string(kind);
    rep.accuracy = eval::accuracy(pred, truth);
    rep.confusion = eval::confusion_matrix(pred, truth, e.n_classes());
    rep.chance_level = eval::chance_level(e.n_classes(), valid.size(), cfg.alpha);
    rep.n_validation = valid.size();
    rep.seed = plan.seed;
    rep.config_fingerprint = eval::fingerprint(cv.canonical() + ";split_seed=" + std::to_string(plan.seed));
    rep.upstream_fingerprint = fp;
    model_bytes = nn::serialize_cnn(result.model);
    out << "train: " << result.history.epochs.size() << " epochs, best " << result.history.best_epoch
        << (result.history.diverged ? ", diverged" : "") << '\n';
  } else {
    auto outcome = eval::run_cv(e, cv, plan);
    rep = std::move(outcome.report);
    model_bytes = kind == eval::ModelKind::slda ? slda::serialize(outcome.slda) : rf::serialize(outcome.forest);
  }

  const auto who = participant_name(participant, in_dir);
  io::write_text(out_dir / ("model." + rep.model), model_bytes);
  io::write_text(out_dir / "report.csv", eval::rows_to_csv({row_of(who, rep)}));
  io::write_text(out_dir / "report.txt", "participant         " + who + "\n" + eval::report_to_text(rep, e.class_names));
  write_config(out_dir, cfg);
  out << "train: " << rep.model << " validation accuracy " << fixed4(rep.accuracy);
  if (rep.window_length > 0) out << ", window start " << rep.window_start;
  out << '\n';
  return 0;
}

int cmd_evaluate(const Common& common, const fs::path& in_dir, const fs::path& out_dir,
                 const std::vector<std::string>& model_names, const std::optional<double>& window,
                 const std::string& participant, std::ostream& out) {
  const auto cfg = resolve_config(common, in_dir);
  std::vector<eval::ModelKind> kinds;
  for (const auto& m : model_names) kinds.push_back(eval::parse_model_kind(m));
  if (kinds.empty()) kinds = {eval::ModelKind::slda, eval::ModelKind::rf, eval::ModelKind::cnn};
  const auto [e, fp] = io::read_epochs(in_dir / kEpochsFile);
  const auto plan = make_split_plan(e.labels, cfg.split_seed, cfg.split);
  const auto who = participant_name(participant, in_dir);
  const std::vector<double> lengths = window ? std::vector<double>{*window} : cfg.window_lengths_s;

  std::vector<eval::ReportRow> rows;
  std::string text = "participant " + who + "\n";
  std::vector<std::pair<std::string, std::string>> confusions;
  for (auto kind : kinds) {
    std::optional<eval::EvalReport> best;
    if (kind == eval::ModelKind::cnn) {
      best = eval::run_cv(e, cv_config(cfg, kind, 0.0, fp), plan).report;
    } else {
      // Window length is chosen by mean CV accuracy on the training part.
      for (double len : lengths) {
        auto rep = eval::run_cv(e, cv_config(cfg, kind, len, fp), plan).report;
        text += "\n" + rep.model + " window " + fixed4(len) + " s: cv mean " + fixed4(rep.fold_mean()) +
                ", validation " + fixed4(rep.accuracy) + '\n';
        if (!best || rep.fold_mean() > best->fold_mean()) best = std::move(rep);
      }
    }
    rows.push_back(row_of(who, *best));
    text += "\n" + eval::report_to_text(*best, e.class_names);
    confusions.emplace_back(best->model, eval::confusion_to_text(best->confusion, e.class_names));
    out << "evaluate: " << best->model << " validation accuracy " << fixed4(best->accuracy) << " (chance "
        << fixed4(best->chance_level) << ", cv mean " << fixed4(best->fold_mean()) << ")\n";
  }

  io::write_text(out_dir / "report.csv", eval::rows_to_csv(rows));
  io::write_text(out_dir / "report.txt", text);
  for (const auto& [model, grid] : confusions) io::write_text(out_dir / ("confusion_" + model + ".txt"), grid);
  write_config(out_dir, cfg);
  return 0;
}

int cmd_gridsearch(const Common& common, const std::vector<fs::path>& in_dirs, const fs::path& out_dir,
                   std::ostream& out) {
  auto cfg = resolve_config(common, in_dirs.front());
  std::vector<EpochSet> datasets;
  for (const auto& d : in_dirs) {
    const auto [e, fp] = io::read_epochs(d / kEpochsFile);
    const auto plan = make_split_plan(e.labels, cfg.split_seed, cfg.split);
    datasets.push_back(e.subset(plan.train_indices));
  }
  nn::TrainConfig tc = cfg.train;
  tc.max_epochs = std::min(cfg.cv_max_epochs, cfg.train.max_epochs);
  const auto result = nn::grid_search(cfg.grid, datasets, tc, cfg.grid_folds);

  std::ostringstream csv;
  csv << "participant,temporal_kernel,depth,pool_kernel,fc1_units,accuracy,failed\n";
  for (const auto& c : result.cells) {
    csv << participant_name("", in_dirs[c.participant]) << ',' << c.spec.temporal_kernel << ',' << c.spec.depth << ','
        << c.spec.pool_kernel << ',' << c.spec.fc1_units << ',' << fixed4(c.accuracy) << ',' << (c.failed ? 1 : 0)
        << '\n';
  }
  cfg.cnn.temporal_kernel = result.spec.temporal_kernel;
  cfg.cnn.depth = result.spec.depth;
  cfg.cnn.pool_kernel = result.spec.pool_kernel;
  cfg.cnn.fc1_units = result.spec.fc1_units;
  io::write_text(out_dir / "grid.csv", csv.str());
  write_config(out_dir, cfg);
  out << "gridsearch: temporal_kernel " << result.spec.temporal_kernel << ", depth " << result.spec.depth
      << ", pool_kernel " << result.spec.pool_kernel << ", fc1_units " << result.spec.fc1_units << '\n';
  return 0;
}

int cmd_compare(const std::vector<fs::path>& reports, const fs::path& out_dir, std::ostream& out) {
  std::vector<eval::ReportRow> rows;
  for (const auto& p : reports) {
    for (auto& r : eval::rows_from_csv(io::read_text(p))) rows.push_back(std::move(r));
  }
  const auto table = eval::compare_models(rows);
  const auto text = table.to_text();
  io::write_text(out_dir / "comparison.csv", table.to_csv());
  io::write_text(out_dir / "comparison.txt", text);
  out << text;
  return 0;
}

int cmd_validate(const Common& common, const fs::path& in_dir, std::ostream& out) {
  std::vector<std::string> problems;
  const auto cfg = resolve_config(common, in_dir);
  bool checked = false;
  if (fs::exists(in_dir / kRecordingFile)) {
    checked = true;
    const auto rec = io::read_recording(in_dir / kRecordingFile);
    for (const auto& v : validate_recording(rec)) problems.push_back("recording " + v.field + ": " + v.detail);
    if (fs::exists(in_dir / kEventsFile)) {
      const auto ev = io::read_events(in_dir / kEventsFile);
      for (const auto& v : validate_events(ev, rec.n_samples(), rec.fs)) {
        problems.push_back("events " + v.field + ": " + v.detail);
      }
    }
  }
  if (fs::exists(in_dir / kEpochsFile)) {
    checked = true;
    const auto [e, fp] = io::read_epochs(in_dir / kEpochsFile);
    e.check_consistent();
    if (fp != cfg.preprocessing_fingerprint()) {
      problems.push_back("epochs fingerprint " + fp + " differs from config " + cfg.preprocessing_fingerprint());
    }
  }
  if (!checked) raise(ErrorKind::IoError, "no recording or epoch file in " + in_dir.string());
  for (const auto& p : problems) out << "violation: " << p << '\n';
  if (!problems.empty()) raise(ErrorKind::InvalidRecording, std::to_string(problems.size()) + " violation(s), first: " + problems.front());
  out << "validate: ok\n";
  return 0;
}

}  // namespace

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::usage: return 2;
    case ErrorCategory::data: return 3;
    case ErrorCategory::numerical: return 4;
  }
  return 2;
}

std::string error_line(const std::string& kind, ErrorCategory category, const std::string& message) {
  std::string msg;
  for (char c : message) {
    if (c == '\n' || c == '\r') {
      msg += ' ';
    } else if (c == '"' || c == '\\') {
      msg += '\\';
      msg += c;
    } else {
      msg += c;
    }
  }
  return "error kind=" + kind + " category=" + std::string(category_name(category)) + " message=\"" + msg + "\"";
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"MRCP decoding pipeline", "mrcp"};
  app.require_subcommand(1, 1);

  Common common;
  std::string in_dir;
  std::vector<std::string> in_dirs;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string model;
  std::vector<std::string> models;
  double window = 0.0;
  std::string participant;
  std::vector<std::string> reports;

  auto* synth = app.add_subcommand("synth", "generate a synthetic recording and events");
  add_common(synth, common);
  auto* seed_opt = synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--out", out_dir)->required();

  auto* pre = app.add_subcommand("preprocess", "filter, re-reference and resample a recording");
  add_common(pre, common);
  pre->add_option("--in", in_dir)->required();
  pre->add_option("--out", out_dir)->required();

  auto* epoch = app.add_subcommand("epoch", "cut movement and rest epochs");
  add_common(epoch, common);
  epoch->add_option("--in", in_dir)->required();
  epoch->add_option("--out", out_dir)->required();

  auto* reject = app.add_subcommand("reject", "drop amplitude and kurtosis outliers");
  add_common(reject, common);
  reject->add_option("--in", in_dir)->required();
  reject->add_option("--out", out_dir)->required();

  auto* train = app.add_subcommand("train", "fit one classifier on the training part");
  add_common(train, common);
  train->add_option("--in", in_dir)->required();
  train->add_option("--out", out_dir)->required();
  train->add_option("--model", model)->required()->check(CLI::IsMember({"cnn", "slda", "rf"}));
  auto* train_window = train->add_option("--window", window, "window length in seconds");
  train->add_option("--participant", participant);

  auto* evaluate = app.add_subcommand("evaluate", "repeated cross-validation and validation scoring");
  add_common(evaluate, common);
  evaluate->add_option("--in", in_dir)->required();
  evaluate->add_option("--out", out_dir)->required();
  evaluate->add_option("--model", models)->check(CLI::IsMember({"cnn", "slda", "rf"}));
  auto* eval_window = evaluate->add_option("--window", window, "window length in seconds");
  evaluate->add_option("--participant", participant);

  auto* grid = app.add_subcommand("gridsearch", "CNN hyperparameter grid search");
  add_common(grid, common);
  grid->add_option("--in", in_dirs)->required();
  grid->add_option("--out", out_dir)->required();

  auto* compare = app.add_subcommand("compare", "merge reports into a comparison table");
  compare->add_option("--reports", reports)->required();
  compare->add_option("--out", out_dir)->required();

  auto* validate = app.add_subcommand("validate", "check recording, events and epochs");
  add_common(validate, common);
  validate->add_option("--in", in_dir)->required();

  std::vector<std::string> argv_store{"mrcp"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_line("UsageError", ErrorCategory::usage, e.what()) << '\n';
    return exit_code(ErrorCategory::usage);
  }

  try {
    const fs::path out_path(out_dir);
    const fs::path in_path(in_dir);
    if (synth->parsed()) {
      return cmd_synth(common, seed_opt->count() ? std::optional(seed) : std::nullopt, out_path, out);
    }
    if (pre->parsed()) return cmd_preprocess(common, in_path, out_path, out);
    if (epoch->parsed()) return cmd_epoch(common, in_path, out_path, out);
    if (reject->parsed()) return cmd_reject(common, in_path, out_path, out);
    if (train->parsed()) {
      return cmd_train(common, in_path, out_path, model, train_window->count() ? std::optional(window) : std::nullopt,
                       participant, out);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(common, in_path, out_path, models,
                          eval_window->count() ? std::optional(window) : std::nullopt, participant, out);
    }
    if (grid->parsed()) {
      std::vector<fs::path> dirs(in_dirs.begin(), in_dirs.end());
      return cmd_gridsearch(common, dirs, out_path, out);
    }
    if (compare->parsed()) {
      std::vector<fs::path> files(reports.begin(), reports.end());
      return cmd_compare(files, out_path, out);
    }
    if (validate->parsed()) return cmd_validate(common, in_path, out);
  } catch (const Error& e) {
    const std::string kind(to_string(e.kind()));
    std::string msg = e.what();
    if (msg.rfind(kind + ": ", 0) == 0) msg.erase(0, kind.size() + 2);
    err << error_line(kind, e.category(), msg) << '\n';
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    err << error_line("IoError", ErrorCategory::data, e.what()) << '\n';
    return exit_code(ErrorCategory::data);
  } catch (const std::bad_alloc&) {
    err << error_line("OutOfMemory", ErrorCategory::numerical, "allocation failed") << '\n';
    return exit_code(ErrorCategory::numerical);
  }
  return exit_code(ErrorCategory::usage);
}

}  // namespace mrcp::cli
