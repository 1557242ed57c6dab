#pragma once

// Little-endian byte encoding shared by the CMXE / CMXI / CMXM formats.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace xmodal::detail {

class ByteWriter {
 public:
  void magic(std::string_view four_cc) { buf_.append(four_cc); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view s) { buf_.append(s); }

  const std::string& buffer() const noexcept { return buf_; }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  std::string buf_;
};

/// Bounds-checked reader; every underflow throws FormatError naming `what_`.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

  void expect_magic(std::string_view four_cc);
  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  float f32();
  double f64();
  std::string bytes(std::size_t n);

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  void expect_end() const;
  [[noreturn]] void fail(const std::string& msg) const;

 private:
  std::uint64_t get_le(int width);
  void need(std::size_t n) const;

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace xmodal::detail
