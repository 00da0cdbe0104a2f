#include "fontparts/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fontparts/common.hpp"

namespace fontparts {

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& buf, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void BinaryWriter::magic(std::string_view four_cc) { buf_.insert(buf_.end(), four_cc.begin(), four_cc.end()); }
void BinaryWriter::u16(std::uint16_t v) { put_le(buf_, v); }
void BinaryWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void BinaryWriter::f32(float v) { put_le(buf_, std::bit_cast<std::uint32_t>(v)); }
void BinaryWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }
void BinaryWriter::bytes(std::span<const std::uint8_t> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
void BinaryWriter::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

const std::uint8_t* BinaryReader::take(std::size_t n) {
  if (remaining() < n) {
    throw DataError(source_ + ": truncated at byte " + std::to_string(pos_));
  }
  const std::uint8_t* p = data_.data() + pos_;
  pos_ += n;
  return p;
}

void BinaryReader::expect_magic(std::string_view four_cc) {
  const auto* p = take(four_cc.size());
  if (std::memcmp(p, four_cc.data(), four_cc.size()) != 0) {
    throw DataError(source_ + ": bad magic, expected \"" + std::string(four_cc) + "\"");
  }
}

std::uint16_t BinaryReader::u16() { return get_le<std::uint16_t>(take(2)); }
std::uint32_t BinaryReader::u32() { return get_le<std::uint32_t>(take(4)); }
std::uint64_t BinaryReader::u64() { return get_le<std::uint64_t>(take(8)); }
float BinaryReader::f32() { return std::bit_cast<float>(get_le<std::uint32_t>(take(4))); }
double BinaryReader::f64() { return std::bit_cast<double>(get_le<std::uint64_t>(take(8))); }
std::string BinaryReader::string() {
  const std::uint32_t n = u32();
  const auto* p = take(n);
  return std::string(reinterpret_cast<const char*>(p), n);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace fontparts
