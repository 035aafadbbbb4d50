// Acceptance suite: one PASS/FAIL line per criterion.

#include "../gradcheck.hpp"
#include "../oracles.hpp"

#include "mrcp/config.hpp"
#include "mrcp/dsp.hpp"
#include "mrcp/epoching.hpp"
#include "mrcp/eval.hpp"
#include "mrcp/io.hpp"
#include "mrcp/nn/cnn.hpp"
#include "mrcp/synth.hpp"
#include "mrcp/windows.hpp"

#include <CLI11.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace mrcp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

/// Runs the CLI with the given arguments; output goes to `log`.
int run_cli(const std::string& cli, const std::string& args, const fs::path& log, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + quote(cli) + " " + args + " >> " + quote(log.string()) + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome chance_criterion() {
  const auto t0 = Clock::now();
  const double c = eval::chance_level(3, 240, 0.05);
  const double first = seconds_since(t0);
  const bool pass = std::abs(c - 0.40) <= 0.01 && first < 1e-3;
  return {pass, "chance_level(3, 240, 0.05) = " + fmt(c) + " in " + fmt(first * 1e6, 1) + " us"};
}

Outcome synthetic_criterion(const std::string& cli, const fs::path& work) {
  const fs::path dir = work / "c2";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto log = dir / "log.txt";
  const auto t0 = Clock::now();
  const std::string d = quote(dir.string());
  const std::vector<std::string> steps{
      "synth --seed 1 --out " + d + "/raw",
      "preprocess --in " + d + "/raw --out " + d + "/pre",
      "epoch --in " + d + "/pre --out " + d + "/S1",
      "evaluate --in " + d + "/S1 --out " + d + "/eval",
  };
  for (const auto& s : steps) {
    if (const int code = run_cli(cli, s, log); code != 0) return {false, "step \"" + s + "\" exited " + std::to_string(code)};
  }
  const double elapsed = seconds_since(t0);
  const auto rows = eval::rows_from_csv(io::read_text(dir / "eval" / "report.csv"));
  bool pass = elapsed <= 600.0;
  std::string detail;
  std::set<std::string> seen;
  for (const auto& r : rows) {
    seen.insert(r.model);
    const bool ok = r.accuracy >= r.chance_level + 0.10 && (r.model != "cnn" || r.accuracy >= 0.85);
    pass = pass && ok;
    detail += r.model + " " + fmt(r.accuracy) + " (chance " + fmt(r.chance_level) + ", n " +
              std::to_string(r.n_validation) + ")" + (ok ? "" : " below target") + "; ";
  }
  pass = pass && seen == std::set<std::string>{"cnn", "slda", "rf"};
  return {pass, detail + "pipeline " + fmt(elapsed, 1) + " s"};
}

/// Template-free participant through the default preprocessing.
EpochSet null_dataset(const PipelineConfig& cfg, std::uint64_t seed) {
  auto spec = cfg.synth;
  spec.seed = seed;
  spec.template_gain = 0.0;
  const auto data = synth::generate(spec);
  const auto pre = dsp::preprocess_chain(data.recording, cfg.preprocess);
  const auto ev = epoching::rescale_events(data.events, data.recording.fs, pre.fs);
  return epoching::build_dataset(pre, ev, cfg.epoch);
}

Outcome null_criterion(const fs::path& work) {
  const PipelineConfig cfg;
  std::map<std::string, int> below;
  std::ofstream log(work / "c3_log.txt");
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto e = null_dataset(cfg, 1000 + seed);
    const auto plan = make_split_plan(e.labels, cfg.split_seed + seed, cfg.split);
    for (auto kind : {eval::ModelKind::slda, eval::ModelKind::rf, eval::ModelKind::cnn}) {
      eval::CvConfig cv;
      cv.kind = kind;
      cv.window_s = 1.0;
      cv.window_step = kind == eval::ModelKind::rf ? 8 : cfg.window_step;
      cv.forest = cfg.forest;
      cv.cnn = cfg.cnn;
      cv.train = cfg.train;
      cv.cv_max_epochs = cfg.cv_max_epochs;
      eval::EvalReport rep;
      if (kind == eval::ModelKind::cnn) {
        // Validation accuracy only: the fold scores play no part in the criterion.
        nn::CnnSpec spec = cfg.cnn;
        spec.spatial_kernel = e.n_channels();
        spec.n_samples = e.n_samples();
        spec.n_classes = e.n_classes();
        nn::TrainConfig tc = cfg.train;
        tc.seed = seed;
        const auto model = nn::train_cnn(spec, e.subset(plan.train_indices), tc).model;
        const auto truth = labels_at(e.labels, plan.validation_indices);
        rep.model = "cnn";
        rep.accuracy = eval::accuracy(model.predict(e.subset(plan.validation_indices)), truth);
        rep.chance_level = eval::chance_level(e.n_classes(), truth.size(), cfg.alpha);
      } else {
        rep = eval::run_cv(e, cv, plan).report;
      }
      const bool ok = rep.accuracy < rep.chance_level;
      below[rep.model] += ok ? 1 : 0;
      log << "seed " << seed << ' ' << rep.model << ' ' << fmt(rep.accuracy) << " chance " << fmt(rep.chance_level)
          << std::endl;
    }
  }
  bool pass = true;
  std::string detail;
  for (const auto& [model, n] : below) {
    pass = pass && n >= 18;
    detail += model + " " + std::to_string(n) + "/20 below chance; ";
  }
  return {pass, detail};
}

Outcome gradient_criterion() {
  const auto t0 = Clock::now();
  std::size_t configs = 0;
  std::size_t entries = 0;
  std::size_t failed = 0;
  std::string worst;
  for (std::uint64_t seed = 1; seed <= 120; ++seed) {
    const auto r = testing::check_random_network(seed);
    ++configs;
    entries += r.checked;
    failed += r.failed;
    if (r.failed > 0 && worst.empty()) worst = " first failure seed " + std::to_string(seed) + " " + r.worst_param;
  }
  const double elapsed = seconds_since(t0);
  return {failed == 0 && configs >= 100 && elapsed < 60.0,
          std::to_string(configs) + " configurations, " + std::to_string(entries) + " entries, " +
              std::to_string(failed) + " mismatches in " + fmt(elapsed, 1) + " s" + worst};
}

Outcome dsp_criterion() {
  const auto bp = dsp::design_bandpass(dsp::FilterFamily::butterworth, 4, 0.3, 3.0, 256.0);
  double peak = 0.0;
  for (int i = 1; i <= 2000; ++i) peak = std::max(peak, bp.magnitude_at(0.01 * i * 0.5));
  const double at1 = bp.magnitude_at(1.0);
  const double at001 = bp.magnitude_at(0.01);
  const auto notch = dsp::design_notch(50.0, 256.0, 35.0);
  const double notch_db = -20.0 * std::log10(notch.magnitude_at(50.0));

  Rng rng(5);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(200 + rng.below(800));
    for (auto& v : x) v = rng.normal();
    auto rev = x;
    std::reverse(rev.begin(), rev.end());
    auto a = dsp::filtfilt(bp, x);
    std::reverse(a.begin(), a.end());
    const auto b = dsp::filtfilt(bp, rev);
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  }
  const bool pass = at1 >= 0.99 * peak && at001 <= 0.01 && notch_db >= 40.0 && worst <= 1e-8;
  return {pass, "|H(1)| " + fmt(at1) + " of peak " + fmt(peak) + ", |H(0.01)| " + fmt(at001, 6) + ", notch " +
                    fmt(notch_db, 1) + " dB, reversal error " + std::to_string(worst)};
}

Outcome shape_criterion() {
  const nn::CnnModel m(nn::CnnSpec{}, 1);
  Rng rng(6);
  nn::Tensor x(4, 1, 58, 80);
  for (double& v : x.values()) v = rng.normal();
  const auto a1 = m.conv1.forward(x);
  const auto a2 = m.conv2.forward(a1);
  const auto p = m.pool.forward(a2);
  const auto f1 = m.fc1.forward(p.reshaped({4, p.item_size(), 1, 1}));
  const auto probs = m.forward(x);
  bool pass = a1.shape() == nn::Tensor::Shape{4, 40, 58, 51} && a2.shape() == nn::Tensor::Shape{4, 40, 1, 51} &&
              p.shape() == nn::Tensor::Shape{4, 40, 1, 3} && p.item_size() == 120 && f1.item_size() == 80 &&
              probs.item_size() == 3;
  double worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (double v : probs.item(i)) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  pass = pass && worst <= 1e-6;
  return {pass, nn::shape_string(a1.shape()) + " -> " + nn::shape_string(a2.shape()) + " -> " +
                    nn::shape_string(p.shape()) + " -> " + std::to_string(p.item_size()) + " -> " +
                    std::to_string(f1.item_size()) + " -> " + std::to_string(probs.item_size()) +
                    ", softmax sum error " + std::to_string(worst)};
}

Outcome window_criterion() {
  const auto n = window_starts(80, 16, 2).size();
  int inside = 0;
  std::string starts;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto e = testing::confined_signal_epochs(seed, 40, 8, 0.3);
    const auto plan = make_split_plan(e.labels, seed);
    const auto fit = slda::sliding_window_select(e, 16, 2, plan);
    const auto s = fit.selection.best_start;
    inside += s >= 26 && s <= 38;
    starts += std::to_string(s) + (seed < 20 ? "," : "");
  }
  return {n == 33 && inside >= 18,
          std::to_string(n) + " candidates; start in [26, 38] for " + std::to_string(inside) + "/20 (" + starts + ")"};
}

Outcome oracle_criterion() {
  Rng rng(8);
  int slda_match = 0;
  int rf_match = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + rng.below(3);
    const auto [x, y] = testing::random_problem(rng, 2 * k + rng.below(20), 1 + rng.below(8), k);
    const auto m = slda::fit_slda(x, y);
    std::vector<double> q(m.dim());
    for (auto& v : q) v = 2.0 * rng.normal();
    slda_match += slda::predict_slda(m, q).label == testing::first_argmax(testing::direct_discriminants(m, q));
  }
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + rng.below(3);
    const auto [x, y] = testing::random_problem(rng, 2 * k + rng.below(20), 1 + rng.below(4), k);
    rf::RfOptions opt;
    opt.n_trees = 1 + rng.below(9);
    opt.seed = rng.next_u64();
    const auto m = rf::fit_rf(x, y, opt);
    std::vector<double> q(m.n_features);
    for (auto& v : q) v = 2.0 * rng.normal();
    const auto p = rf::predict_rf(m, q);
    const auto votes = testing::exhaustive_votes(m, q);
    rf_match += !votes.empty() && p.votes == votes && p.label == rf::majority(votes);
  }
  return {slda_match == 1000 && rf_match == 1000,
          "sLDA " + std::to_string(slda_match) + "/1000, forest " + std::to_string(rf_match) + "/1000"};
}

/// All regular files below `root`, relative path to contents.
std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() != "log.txt") {
      out[fs::relative(entry.path(), root).string()] = io::read_text(entry.path());
    }
  }
  return out;
}

Outcome determinism_criterion(const std::string& cli, const fs::path& work) {
  const std::string small =
      " --set synth.n_channels=12 --set synth.grid_width=4 --set synth.center_channel=5"
      " --set synth.trials_per_class=30 --set synth.reps_per_session=15 --set synth.rest_block_s=90"
      " --set split.repeats=3 --set rf.n_trees=20 --set train.max_epochs=8 --set train.cv_max_epochs=2";
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* threads : {"1", "3"}) {
    const fs::path dir = work / (std::string("c9_threads") + threads);
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto log = dir / "log.txt";
    const std::string d = quote(dir.string());
    const std::string env = std::string("MRCP_THREADS=") + threads;
    const std::vector<std::string> steps{
        "synth --seed 11 --out " + d + "/raw" + small,
        "preprocess --in " + d + "/raw --out " + d + "/pre",
        "epoch --in " + d + "/pre --out " + d + "/ep",
        "reject --in " + d + "/ep --out " + d + "/rj",
        "train --model slda --in " + d + "/ep --out " + d + "/slda",
        "train --model rf --in " + d + "/ep --out " + d + "/rf",
        "train --model cnn --in " + d + "/ep --out " + d + "/cnn",
        "evaluate --model slda --model cnn --window 1.0 --in " + d + "/ep --out " + d + "/eval",
        "compare --reports " + d + "/slda/report.csv " + d + "/rf/report.csv " + d + "/cnn/report.csv --out " + d +
            "/cmp",
    };
    for (const auto& s : steps) {
      if (const int code = run_cli(cli, s, log, env); code != 0) {
        return {false, "MRCP_THREADS=" + std::string(threads) + " step \"" + s + "\" exited " + std::to_string(code)};
      }
    }
    runs.push_back(tree_contents(dir));
  }
  std::size_t differing = 0;
  std::string first;
  for (const auto& [name, bytes] : runs[0]) {
    const auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != bytes) {
      ++differing;
      if (first.empty()) first = " first: " + name;
    }
  }
  const bool pass = differing == 0 && runs[0].size() == runs[1].size() && runs[0].count("cnn/model.cnn") == 1;
  return {pass, std::to_string(runs[0].size()) + " files compared across MRCP_THREADS=1 and 3, " +
                    std::to_string(differing) + " differ" + first};
}

Outcome cv_criterion() {
  const auto e = testing::confined_signal_epochs(10, 40, 6);
  const auto plan = make_split_plan(e.labels, 10);
  TrainingLog log;
  eval::CvConfig cfg;
  cfg.kind = eval::ModelKind::slda;
  const auto out = eval::run_cv(e, cfg, plan, &log);

  bool disjoint = true;
  bool stratified = true;
  std::map<int, std::size_t> totals;
  for (auto i : plan.train_indices) ++totals[e.labels[i]];
  for (const auto& repeat : plan.fold_assignments) {
    std::vector<int> hits(e.size(), 0);
    for (const auto& fold : repeat) {
      std::map<int, std::size_t> counts;
      for (auto i : fold) {
        ++hits[i];
        ++counts[e.labels[i]];
      }
      for (const auto& [c, t] : totals) {
        const double expected = static_cast<double>(t) / static_cast<double>(repeat.size());
        stratified = stratified && std::abs(static_cast<double>(counts[c]) - expected) <= 1.0;
      }
    }
    for (auto i : plan.train_indices) disjoint = disjoint && hits[i] == 1;
    for (auto i : plan.validation_indices) disjoint = disjoint && hits[i] == 0;
  }
  const auto leaks = log.appearances(plan.validation_indices);
  const bool pass = out.report.per_fold.size() == 50 && disjoint && stratified && leaks == 0 && log.calls() > 0;
  return {pass, std::to_string(out.report.per_fold.size()) + " fold accuracies, folds " +
                    (disjoint ? "disjoint" : "overlapping") + ", " + (stratified ? "stratified" : "unstratified") +
                    ", " + std::to_string(leaks) + " validation appearances in " + std::to_string(log.calls()) +
                    " training calls"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string cli;
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--cli", cli, "path to the mrcp executable")->required();
  app.add_option("--work", work, "scratch directory");
  app.add_option("--only", only, "criteria to run");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, [] { return chance_criterion(); }},
      {2, [&] { return synthetic_criterion(cli, work); }},
      {3, [&] { return null_criterion(work); }},
      {4, [] { return gradient_criterion(); }},
      {5, [] { return dsp_criterion(); }},
      {6, [] { return shape_criterion(); }},
      {7, [] { return window_criterion(); }},
      {8, [] { return oracle_criterion(); }},
      {9, [&] { return determinism_criterion(cli, work); }},
      {10, [] { return cv_criterion(); }},
  };
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    const std::string line = "criterion " + std::to_string(id) + ": " + (o.pass ? "PASS" : "FAIL") + " - " + o.detail +
                             " [" + fmt(seconds_since(t0), 1) + " s]";
    std::cout << line << std::endl;
    std::ofstream(fs::path(work) / ("criterion_" + std::to_string(id) + ".txt")) << line << '\n';
  }
  return failures == 0 ? 0 : 1;
}
