#include "mrcp/binary.hpp"

#include "mrcp/error.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

namespace mrcp::bin {

void Writer::str(std::string_view s) {
  put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void Writer::f64s(std::span<const double> v) {
  put<std::uint64_t>(v.size());
  for (double x : v) put(x);
}

void Writer::u64s(std::span<const std::uint64_t> v) {
  put<std::uint64_t>(v.size());
  for (auto x : v) put(x);
}

const char* Reader::take(std::size_t n) {
  if (n > buf_.size() - pos_) {
    raise(ErrorKind::FormatError, ctx_ + " is truncated at byte " + std::to_string(pos_));
  }
  const char* p = buf_.data() + pos_;
  pos_ += n;
  return p;
}

std::string Reader::str() {
  const auto n = get<std::uint32_t>();
  return std::string(raw(n));
}

std::uint64_t Reader::count(std::size_t element_size) {
  const auto n = get<std::uint64_t>();
  if (element_size > 0 && n > remaining() / element_size) {
    raise(ErrorKind::FormatError, ctx_ + " declares " + std::to_string(n) + " elements beyond its size");
  }
  return n;
}

std::vector<double> Reader::f64s() {
  const auto n = count(sizeof(double));
  std::vector<double> v(n);
  for (auto& x : v) x = get<double>();
  return v;
}

std::vector<std::uint64_t> Reader::u64s() {
  const auto n = count(sizeof(std::uint64_t));
  std::vector<std::uint64_t> v(n);
  for (auto& x : v) x = get<std::uint64_t>();
  return v;
}

void Reader::expect(std::string_view magic) {
  if (remaining() < magic.size() || raw(magic.size()) != magic) {
    raise(ErrorKind::FormatError, ctx_ + " does not start with \"" + std::string(magic) + "\"");
  }
}

void Reader::finish() const {
  if (pos_ != buf_.size()) {
    raise(ErrorKind::FormatError, ctx_ + " has " + std::to_string(buf_.size() - pos_) + " trailing bytes");
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorKind::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp, ec);
      raise(ErrorKind::IoError, "short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    raise(ErrorKind::IoError, "cannot rename into " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mrcp::bin
