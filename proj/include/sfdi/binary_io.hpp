#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sfdi/error.hpp"

namespace sfdi::io {

/// Little-endian byte sink.
class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    buf_.insert(buf_.end(), raw, raw + sizeof(T));
  }

  const std::vector<char>& buffer() const noexcept { return buf_; }
  std::vector<char>&& take() noexcept { return std::move(buf_); }

 private:
  std::vector<char> buf_;
};

/// Little-endian byte source; every failure names the byte offset it happened at.
class ByteReader {
 public:
  ByteReader(std::span<const char> data, std::string what)
      : data_(data), what_(std::move(what)) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  void expect_magic(std::string_view magic) {
    need(magic.size(), "magic");
    if (std::string_view(data_.data() + pos_, magic.size()) != magic)
      error("bad magic, expected \"" + std::string(magic) + "\"");
    pos_ += magic.size();
  }

  template <typename T>
  T get(const char* field) {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T), field);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    T value;
    std::memcpy(&value, raw, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string rest() {
    std::string out(data_.data() + pos_, data_.size() - pos_);
    pos_ = data_.size();
    return out;
  }

  void need(std::size_t n, const char* field) const {
    if (remaining() < n)
      error(std::string("truncated while reading ") + field + " (need " + std::to_string(n) +
            " bytes, have " + std::to_string(remaining()) + ")");
  }

  [[noreturn]] void error(const std::string& msg) const {
    fail(ErrorKind::parse, what_ + ": " + msg + " at byte offset " + std::to_string(pos_));
  }

 private:
  std::span<const char> data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);

/// Writes via a sibling temporary file and rename so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> data);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace sfdi::io
