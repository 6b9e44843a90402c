#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "meflab/error.hpp"

namespace meflab::io {

// All on-disk integers and floats are little-endian regardless of host.

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32le(std::string& out, float v) {
  put_u32le(out, std::bit_cast<std::uint32_t>(v));
}

// Cursor over an in-memory byte string; every read checks bounds so a
// truncated file fails loudly instead of reading garbage.
class Reader {
 public:
  Reader(const std::string& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::uint32_t u32le() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64le() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  float f32le() { return std::bit_cast<float>(u32le()); }

  // IDX headers are the one big-endian corner of the on-disk story.
  std::uint32_t u32be() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v = (v << 8) | static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i]));
    pos_ += 4;
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void expect_magic(const char (&magic)[5]) {
    std::string got = take(4);
    require(got == std::string(magic, 4),
            what_ + ": bad magic '" + got + "', expected '" + std::string(magic, 4) + "'");
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end() { require(remaining() == 0, what_ + ": trailing bytes after payload"); }

 private:
  void need(std::size_t n) {
    require(pos_ + n <= bytes_.size(), what_ + ": truncated file");
  }
  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open '" + path + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), "read error on '" + path + "'");
  return bytes;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(out.good(), "write error on '" + path + "'");
}

}  // namespace meflab::io
