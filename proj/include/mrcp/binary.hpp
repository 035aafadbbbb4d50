#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

namespace mrcp::bin {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Appends little-endian scalars and length-prefixed blobs to a byte string.
class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_arithmetic_v<T>);
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf_.append(raw, sizeof(T));
  }
  void raw(std::string_view bytes) { buf_.append(bytes); }
  void str(std::string_view s);
  void f64s(std::span<const double> v);
  void u64s(std::span<const std::uint64_t> v);

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

/// Bounds-checked reader over a byte string; throws FormatError on overrun.
class Reader {
 public:
  explicit Reader(std::string_view bytes, std::string context = "file") : buf_(bytes), ctx_(std::move(context)) {}

  template <typename T>
  T get() {
    static_assert(std::is_arithmetic_v<T>);
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  std::string_view raw(std::size_t n) { return {take(n), n}; }
  std::string str();
  std::vector<double> f64s();
  std::vector<std::uint64_t> u64s();
  /// Throws FormatError unless the next bytes equal `magic`.
  void expect(std::string_view magic);
  /// Throws FormatError if bytes remain.
  void finish() const;
  std::size_t remaining() const { return buf_.size() - pos_; }
  /// A count about to be used for allocation, checked against what remains.
  std::uint64_t count(std::size_t element_size);

 private:
  const char* take(std::size_t n);

  std::string_view buf_;
  std::size_t pos_ = 0;
  std::string ctx_;
};

/// Writes `bytes` to a temporary file beside `path`, then renames it into
/// place. Parent directories are created.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace mrcp::bin
