#include "mrcp/config.hpp"

#include "mrcp/error.hpp"
#include "mrcp/eval.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

namespace mrcp {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& what) {
  raise(ErrorKind::InvalidConfig, key + ": \"" + value + "\" is not " + what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) bad_value(key, s, "a number");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  bad_value(key, s, "true or false");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

struct Binding {
  std::function<void(PipelineConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T, typename F>
Binding number(F field) {
  return {[field](PipelineConfig& c, const std::string& k, const std::string& v) { field(c) = parse_number<T>(k, v); },
          [field](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(field(const_cast<PipelineConfig&>(c)));
            } else {
              return std::to_string(field(const_cast<PipelineConfig&>(c)));
            }
          }};
}

template <typename F>
Binding boolean(F field) {
  return {[field](PipelineConfig& c, const std::string& k, const std::string& v) { field(c) = parse_bool(k, v); },
          [field](const PipelineConfig& c) {
            return std::string(field(const_cast<PipelineConfig&>(c)) ? "true" : "false");
          }};
}

template <typename T, typename F>
Binding list(F field) {
  return {[field](PipelineConfig& c, const std::string& k, const std::string& v) {
            std::vector<T> out;
            for (const auto& item : split_list(v)) out.push_back(parse_number<T>(k, item));
            if (out.empty()) bad_value(k, v, "a nonempty list");
            field(c) = out;
          },
          [field](const PipelineConfig& c) {
            std::string s;
            for (const auto& x : field(const_cast<PipelineConfig&>(c))) {
              if (!s.empty()) s += ',';
              if constexpr (std::is_floating_point_v<T>) {
                s += fmt(x);
              } else {
                s += std::to_string(x);
              }
            }
            return s;
          }};
}

#define FIELD(expr) [](PipelineConfig& c) -> auto& { return expr; }

/// Ordered "section.key" table.
const std::vector<std::pair<std::string, Binding>>& bindings() {
  static const std::vector<std::pair<std::string, Binding>> table = {
      {"synth.n_channels", number<std::size_t>(FIELD(c.synth.n_channels))},
      {"synth.fs", number<double>(FIELD(c.synth.fs))},
      {"synth.trials_per_class", number<std::size_t>(FIELD(c.synth.n_trials_per_class))},
      {"synth.class_a_peak_uv", number<double>(FIELD(c.synth.classes.at(0).peak_uv))},
      {"synth.class_a_latency_s", number<double>(FIELD(c.synth.classes.at(0).latency_s))},
      {"synth.class_b_peak_uv", number<double>(FIELD(c.synth.classes.at(1).peak_uv))},
      {"synth.class_b_latency_s", number<double>(FIELD(c.synth.classes.at(1).latency_s))},
      {"synth.rise_s", {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                          for (auto& t : c.synth.classes) t.rise_s = parse_number<double>(k, v);
                        },
                        [](const PipelineConfig& c) { return fmt(c.synth.classes.at(0).rise_s); }}},
      {"synth.fall_s", {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                          for (auto& t : c.synth.classes) t.fall_s = parse_number<double>(k, v);
                        },
                        [](const PipelineConfig& c) { return fmt(c.synth.classes.at(0).fall_s); }}},
      {"synth.center_channel", number<std::size_t>(FIELD(c.synth.center_channel))},
      {"synth.grid_width", number<std::size_t>(FIELD(c.synth.grid_width))},
      {"synth.weight_radius", number<double>(FIELD(c.synth.weight_radius))},
      {"synth.template_gain", number<double>(FIELD(c.synth.template_gain))},
      {"synth.noise_exponent", number<double>(FIELD(c.synth.noise_exponent))},
      {"synth.noise_rms_uv", number<double>(FIELD(c.synth.noise_rms_uv))},
      {"synth.line_noise_uv", number<double>(FIELD(c.synth.line_noise_uv))},
      {"synth.line_hz", number<double>(FIELD(c.synth.line_hz))},
      {"synth.reps_per_session", number<std::size_t>(FIELD(c.synth.reps_per_session))},
      {"synth.rest_block_s", number<double>(FIELD(c.synth.rest_block_s))},
      {"synth.onset_spacing_s", number<double>(FIELD(c.synth.onset_spacing_s))},
      {"synth.onset_jitter_s", number<double>(FIELD(c.synth.onset_jitter_s))},
      {"synth.margin_s", number<double>(FIELD(c.synth.margin_s))},
      {"synth.seed", number<std::uint64_t>(FIELD(c.synth.seed))},
      {"preprocess.broad_low_hz", number<double>(FIELD(c.preprocess.broad_low_hz))},
      {"preprocess.broad_high_hz", number<double>(FIELD(c.preprocess.broad_high_hz))},
      {"preprocess.broad_order", number<int>(FIELD(c.preprocess.broad_order))},
      {"preprocess.cheby_ripple_db", number<double>(FIELD(c.preprocess.cheby_ripple_db))},
      {"preprocess.notch", boolean(FIELD(c.preprocess.notch))},
      {"preprocess.notch_hz", number<double>(FIELD(c.preprocess.notch_hz))},
      {"preprocess.notch_q", number<double>(FIELD(c.preprocess.notch_q))},
      {"preprocess.mrcp_low_hz", number<double>(FIELD(c.preprocess.mrcp_low_hz))},
      {"preprocess.mrcp_high_hz", number<double>(FIELD(c.preprocess.mrcp_high_hz))},
      {"preprocess.mrcp_order", number<int>(FIELD(c.preprocess.mrcp_order))},
      {"preprocess.car", boolean(FIELD(c.preprocess.car))},
      {"preprocess.target_fs", number<double>(FIELD(c.preprocess.target_fs))},
      {"epoch.t_pre", number<double>(FIELD(c.epoch.t_pre))},
      {"epoch.t_post", number<double>(FIELD(c.epoch.t_post))},
      {"epoch.rest_epoch_s", number<double>(FIELD(c.epoch.rest_epoch_s))},
      {"epoch.rest_count", number<std::size_t>(FIELD(c.epoch.rest_count))},
      {"reject.amp_limit_uv", number<double>(FIELD(c.reject_amp_uv))},
      {"reject.kurt_factor", number<double>(FIELD(c.reject_kurt_factor))},
      {"split.validation_fraction", number<double>(FIELD(c.split.validation_fraction))},
      {"split.repeats", number<int>(FIELD(c.split.repeats))},
      {"split.folds", number<int>(FIELD(c.split.folds))},
      {"split.seed", number<std::uint64_t>(FIELD(c.split_seed))},
      {"windows.lengths_s", list<double>(FIELD(c.window_lengths_s))},
      {"windows.step", number<std::size_t>(FIELD(c.window_step))},
      {"rf.n_trees", number<std::size_t>(FIELD(c.forest.n_trees))},
      {"rf.mtry", number<std::size_t>(FIELD(c.forest.mtry))},
      {"rf.min_leaf", number<std::size_t>(FIELD(c.forest.min_leaf))},
      {"rf.max_depth", number<std::size_t>(FIELD(c.forest.max_depth))},
      {"rf.bootstrap", boolean(FIELD(c.forest.bootstrap))},
      {"rf.seed", number<std::uint64_t>(FIELD(c.forest.seed))},
      {"cnn.temporal_kernel", number<std::size_t>(FIELD(c.cnn.temporal_kernel))},
      {"cnn.depth", number<std::size_t>(FIELD(c.cnn.depth))},
      {"cnn.pool_kernel", number<std::size_t>(FIELD(c.cnn.pool_kernel))},
      {"cnn.fc1_units", number<std::size_t>(FIELD(c.cnn.fc1_units))},
      {"train.learning_rate", number<double>(FIELD(c.train.learning_rate))},
      {"train.batch_size", number<std::size_t>(FIELD(c.train.batch_size))},
      {"train.max_epochs", number<std::size_t>(FIELD(c.train.max_epochs))},
      {"train.patience", number<std::size_t>(FIELD(c.train.early_stop_patience))},
      {"train.holdout_fraction", number<double>(FIELD(c.train.holdout_fraction))},
      {"train.seed", number<std::uint64_t>(FIELD(c.train.seed))},
      {"train.beta1", number<double>(FIELD(c.train.beta1))},
      {"train.beta2", number<double>(FIELD(c.train.beta2))},
      {"train.eps", number<double>(FIELD(c.train.adam_eps))},
      {"train.cv_max_epochs", number<std::size_t>(FIELD(c.cv_max_epochs))},
      {"eval.alpha", number<double>(FIELD(c.alpha))},
      {"grid.temporal_kernel", list<std::size_t>(FIELD(c.grid.temporal_kernel))},
      {"grid.depth", list<std::size_t>(FIELD(c.grid.depth))},
      {"grid.pool_kernel", list<std::size_t>(FIELD(c.grid.pool_kernel))},
      {"grid.fc1_units", list<std::size_t>(FIELD(c.grid.fc1_units))},
      {"grid.folds", number<int>(FIELD(c.grid_folds))},
  };
  return table;
}

#undef FIELD

const Binding& find(const std::string& key) {
  for (const auto& [k, b] : bindings()) {
    if (k == key) return b;
  }
  raise(ErrorKind::InvalidConfig, "unknown configuration key \"" + key + "\"");
}

std::string section_of(const std::string& key) { return key.substr(0, key.find('.')); }

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) { find(key).set(*this, key, trim(value)); }

std::string PipelineConfig::get(const std::string& key) const { return find(key).get(*this); }

std::vector<std::string> PipelineConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, b] : bindings()) out.push_back(k);
  return out;
}

void PipelineConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) raise(ErrorKind::InvalidConfig, "override \"" + assignment + "\" lacks '='");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string PipelineConfig::to_ini() const {
  std::ostringstream s;
  std::string section;
  for (const auto& [k, b] : bindings()) {
    const auto sec = section_of(k);
    if (sec != section) {
      if (!section.empty()) s << '\n';
      s << '[' << sec << "]\n";
      section = sec;
    }
    s << k.substr(sec.size() + 1) << " = " << b.get(*this) << '\n';
  }
  return s.str();
}

PipelineConfig PipelineConfig::from_ini(const std::string& text) {
  PipelineConfig c;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') raise(ErrorKind::InvalidConfig, "config line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) raise(ErrorKind::InvalidConfig, "config line " + std::to_string(line_no) + " lacks '='");
    if (section.empty()) raise(ErrorKind::InvalidConfig, "config line " + std::to_string(line_no) + " precedes any section");
    c.set(section + "." + trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

std::string PipelineConfig::fingerprint() const { return eval::fingerprint(to_ini()); }

std::string PipelineConfig::preprocessing_fingerprint() const {
  std::string text;
  for (const auto& [k, b] : bindings()) {
    const auto sec = section_of(k);
    if (sec == "preprocess" || sec == "epoch" || sec == "reject") text += k + "=" + b.get(*this) + "\n";
  }
  return eval::fingerprint(text);
}

}  // namespace mrcp
