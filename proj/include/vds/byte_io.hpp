#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>

#include "vds/error.hpp"

// Little-endian encoding helpers shared by the VDSR and VDSM formats.
namespace vds::byte_io {

inline void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xffu));
}

inline void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xffu));
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

/// Bounds-checked cursor over an in-memory file image.
class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n)
      throw Error(ErrorCode::Truncated, std::string("file ends inside ") + what);
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i)
      x |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return x;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i)
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return x;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace vds::byte_io
