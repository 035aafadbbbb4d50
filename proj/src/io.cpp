#include "mrcp/io.hpp"

#include "mrcp/binary.hpp"
#include "mrcp/error.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace mrcp::io {

namespace {

constexpr std::uint16_t kRecordingVersion = 1;
constexpr std::uint16_t kEpochVersion = 1;

void put_samples(bin::Writer& w, const SignalMatrix& m) {
  for (Eigen::Index c = 0; c < m.rows(); ++c) {
    for (Eigen::Index t = 0; t < m.cols(); ++t) w.put(static_cast<float>(m(c, t)));
  }
}

void get_samples(bin::Reader& r, SignalMatrix& m) {
  for (Eigen::Index c = 0; c < m.rows(); ++c) {
    for (Eigen::Index t = 0; t < m.cols(); ++t) m(c, t) = static_cast<double>(r.get<float>());
  }
}

std::int64_t parse_int(std::string_view s, std::size_t line) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) {
    raise(ErrorKind::InvalidEvents, "line " + std::to_string(line) + ": \"" + std::string(s) + "\" is not an integer");
  }
  return v;
}

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

std::string encode_recording(const Recording& r) {
  if (r.channel_labels.size() != r.n_channels()) {
    raise(ErrorKind::InvalidRecording, std::to_string(r.channel_labels.size()) + " labels for " +
                                           std::to_string(r.n_channels()) + " channels");
  }
  bin::Writer w;
  w.raw("EEGR");
  w.put(kRecordingVersion);
  w.put(r.fs);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(r.n_channels()));
  w.put<std::uint64_t>(r.n_samples());
  for (const auto& l : r.channel_labels) w.str(l);
  put_samples(w, r.data);
  return w.bytes();
}

Recording decode_recording(std::string_view bytes) {
  bin::Reader rd(bytes, "recording");
  rd.expect("EEGR");
  if (rd.get<std::uint16_t>() != kRecordingVersion) raise(ErrorKind::FormatError, "unsupported recording version");
  Recording r;
  r.fs = rd.get<double>();
  const auto n_ch = rd.get<std::uint32_t>();
  const auto n_s = rd.get<std::uint64_t>();
  for (std::uint32_t c = 0; c < n_ch; ++c) r.channel_labels.push_back(rd.str());
  if (n_ch > 0 && n_s > rd.remaining() / sizeof(float) / n_ch) raise(ErrorKind::FormatError, "recording is truncated");
  r.data.resize(static_cast<Eigen::Index>(n_ch), static_cast<Eigen::Index>(n_s));
  get_samples(rd, r.data);
  rd.finish();
  return r;
}

void write_recording(const std::filesystem::path& path, const Recording& r) {
  bin::write_file_atomic(path, encode_recording(r));
}

Recording read_recording(const std::filesystem::path& path) { return decode_recording(bin::read_file(path)); }

std::string encode_events(const EventList& ev) {
  std::ostringstream s;
  s << "#rest,start,end\n";
  for (const auto& iv : ev.rest_intervals) s << "#rest," << iv.start << ',' << iv.end << '\n';
  s << "sample_index,label\n";
  for (const auto& o : ev.onsets) s << o.sample << ',' << to_string(o.label) << '\n';
  return s.str();
}

EventList decode_events(std::string_view text) {
  EventList ev;
  bool in_onsets = false;
  bool saw_rest_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line == "#rest,start,end") {
      saw_rest_header = true;
      continue;
    }
    if (line == "sample_index,label") {
      in_onsets = true;
      continue;
    }
    const auto f = fields(line);
    if (!in_onsets && f.size() == 3 && f[0] == "#rest" && saw_rest_header) {
      ev.rest_intervals.push_back({parse_int(f[1], line_no), parse_int(f[2], line_no)});
    } else if (in_onsets && f.size() == 2) {
      const auto m = parse_movement(f[1]);
      if (!m) raise(ErrorKind::InvalidEvents, "line " + std::to_string(line_no) + ": unknown label \"" + std::string(f[1]) + "\"");
      ev.onsets.push_back({parse_int(f[0], line_no), *m});
    } else {
      raise(ErrorKind::InvalidEvents, "line " + std::to_string(line_no) + " is not a rest or onset record");
    }
  }
  if (!in_onsets) raise(ErrorKind::InvalidEvents, "event file lacks the sample_index,label header");
  return ev;
}

void write_events(const std::filesystem::path& path, const EventList& ev) {
  bin::write_file_atomic(path, encode_events(ev));
}

EventList read_events(const std::filesystem::path& path) { return decode_events(bin::read_file(path)); }

std::string encode_epochs(const EpochSet& e, const std::string& fingerprint) {
  e.check_consistent();
  bin::Writer w;
  w.raw("EEGE");
  w.put(kEpochVersion);
  w.str(fingerprint);
  w.put(e.fs);
  w.put<std::int64_t>(e.t0_offset);
  w.put<std::uint64_t>(e.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(e.n_channels()));
  w.put<std::uint64_t>(e.n_samples());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(e.channel_labels.size()));
  for (const auto& l : e.channel_labels) w.str(l);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(e.class_names.size()));
  for (const auto& n : e.class_names) w.str(n);
  for (int l : e.labels) w.put<std::int64_t>(l);
  for (const auto& t : e.trials) put_samples(w, t);
  return w.bytes();
}

std::pair<EpochSet, std::string> decode_epochs(std::string_view bytes) {
  bin::Reader r(bytes, "epoch file");
  r.expect("EEGE");
  if (r.get<std::uint16_t>() != kEpochVersion) raise(ErrorKind::FormatError, "unsupported epoch file version");
  std::string fp = r.str();
  EpochSet e;
  e.fs = r.get<double>();
  e.t0_offset = r.get<std::int64_t>();
  const auto n = r.get<std::uint64_t>();
  const auto ch = r.get<std::uint32_t>();
  const auto ns = r.get<std::uint64_t>();
  const auto n_labels = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_labels; ++i) e.channel_labels.push_back(r.str());
  const auto n_classes = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_classes; ++i) e.class_names.push_back(r.str());
  if (n > r.remaining() / sizeof(std::int64_t)) raise(ErrorKind::FormatError, "epoch file is truncated");
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto l = r.get<std::int64_t>();
    if (l < 0 || l >= static_cast<std::int64_t>(n_classes)) raise(ErrorKind::FormatError, "epoch label out of range");
    e.labels.push_back(static_cast<int>(l));
  }
  if (ch > 0 && ns > 0 && n > r.remaining() / sizeof(float) / ch / ns) raise(ErrorKind::FormatError, "epoch file is truncated");
  e.trials.resize(n);
  for (auto& t : e.trials) {
    t.resize(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(ns));
    get_samples(r, t);
  }
  r.finish();
  return {std::move(e), std::move(fp)};
}

void write_epochs(const std::filesystem::path& path, const EpochSet& e, const std::string& fingerprint) {
  bin::write_file_atomic(path, encode_epochs(e, fingerprint));
}

std::pair<EpochSet, std::string> read_epochs(const std::filesystem::path& path) {
  return decode_epochs(bin::read_file(path));
}

std::string encode_rejection(const epoching::RejectionReport& r) {
  std::ostringstream s;
  s << "# amp_limit=" << r.amp_limit << " kurt_factor=" << r.kurt_factor << " kept=" << r.kept_indices.size()
    << " rejected=" << r.rejected_indices.size() << '\n';
  s << "trial_index,reasons\n";
  for (std::size_t i = 0; i < r.rejected_indices.size(); ++i) {
    s << r.rejected_indices[i] << ',';
    for (std::size_t j = 0; j < r.reasons[i].size(); ++j) s << (j ? "+" : "") << epoching::to_string(r.reasons[i][j]);
    s << '\n';
  }
  return s.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) { bin::write_file_atomic(path, text); }

std::string read_text(const std::filesystem::path& path) { return bin::read_file(path); }

}  // namespace mrcp::io
