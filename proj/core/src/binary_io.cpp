#include "binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "xmodal/error.hpp"

namespace xmodal::detail {

void ByteWriter::f32(float v) { put_le(std::bit_cast<std::uint32_t>(v), 4); }
void ByteWriter::f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    fail("truncated payload (needed " + std::to_string(n) + " bytes at offset " +
         std::to_string(pos_) + ", " + std::to_string(remaining()) + " left)");
  }
}

void ByteReader::fail(const std::string& msg) const {
  throw FormatError(what_ + ": " + msg);
}

std::uint64_t ByteReader::get_le(int width) {
  need(static_cast<std::size_t>(width));
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
  }
  pos_ += static_cast<std::size_t>(width);
  return v;
}

void ByteReader::expect_magic(std::string_view four_cc) {
  need(four_cc.size());
  if (data_.substr(pos_, four_cc.size()) != four_cc) {
    fail("bad magic (expected \"" + std::string(four_cc) + "\")");
  }
  pos_ += four_cc.size();
}

float ByteReader::f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get_le(4))); }
double ByteReader::f64() { return std::bit_cast<double>(get_le(8)); }

std::string ByteReader::bytes(std::size_t n) {
  need(n);
  std::string out(data_.substr(pos_, n));
  pos_ += n;
  return out;
}

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    fail(std::to_string(remaining()) + " trailing bytes after declared payload");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace xmodal::detail
