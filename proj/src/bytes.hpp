#pragma once

// Internal little-endian byte IO with CRC32 trailers, shared by the weight
// and frame file formats. Not part of the public headers.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ulcnn/error.hpp"

namespace ulcnn::bytes {

inline uint32_t crc32_of(const void* data, size_t len, uint32_t seed = 0) {
  return static_cast<uint32_t>(
      ::crc32(seed, static_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

/// Buffered writer; finish() appends the CRC32 of everything written and
/// moves the temp file into place so partial files never appear at `path`.
class FileWriter {
 public:
  explicit FileWriter(const std::filesystem::path& path)
      : path_(path), tmp_(path.string() + ".tmp") {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) fail_io("cannot open for writing: " + tmp_.string());
  }

  ~FileWriter() {
    if (!finished_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  void put_bytes(const void* data, size_t len) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    crc_ = crc32_of(data, len, crc_);
  }

  void put_u8(uint8_t v) { put_bytes(&v, 1); }
  void put_u16(uint16_t v) {
    uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
    put_bytes(b, 2);
  }
  void put_u32(uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                    static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    put_bytes(b, 4);
  }
  void put_i16(int16_t v) { put_u16(static_cast<uint16_t>(v)); }
  void put_f32(float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(u);
  }
  void put_string(const std::string& s) {
    if (s.size() > 0xffff) fail_config("string too long for format: " + s.substr(0, 32));
    put_u16(static_cast<uint16_t>(s.size()));
    put_bytes(s.data(), s.size());
  }

  void finish() {
    const uint32_t crc = crc_;
    uint8_t b[4] = {static_cast<uint8_t>(crc), static_cast<uint8_t>(crc >> 8),
                    static_cast<uint8_t>(crc >> 16), static_cast<uint8_t>(crc >> 24)};
    out_.write(reinterpret_cast<const char*>(b), 4);
    out_.close();
    if (!out_) fail_io("write failed: " + tmp_.string());
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec) fail_io("cannot move " + tmp_.string() + " to " + path_.string());
    finished_ = true;
  }

 private:
  std::filesystem::path path_, tmp_;
  std::ofstream out_;
  uint32_t crc_ = 0;
  bool finished_ = false;
};

/// Streaming reader that tracks a running CRC32; expect_trailer() consumes
/// the final 4 bytes and verifies them against everything read before.
class FileReader {
 public:
  explicit FileReader(const std::filesystem::path& path) : path_(path) {
    std::error_code ec;
    const auto sz = std::filesystem::file_size(path, ec);
    if (ec) fail_io("cannot open: " + path.string());
    size_ = static_cast<uint64_t>(sz);
    in_.open(path, std::ios::binary);
    if (!in_) fail_io("cannot open: " + path.string());
    if (size_ < 4) fail_data(path.string() + ": truncated (no checksum trailer)");
  }

  uint64_t remaining_payload() const { return size_ - 4 - consumed_; }

  void get_bytes(void* data, size_t len) {
    if (len > remaining_payload()) fail_data(path_.string() + ": truncated");
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
    if (in_.gcount() != static_cast<std::streamsize>(len)) {
      fail_data(path_.string() + ": truncated");
    }
    crc_ = crc32_of(data, len, crc_);
    consumed_ += len;
  }

  uint8_t get_u8() {
    uint8_t v;
    get_bytes(&v, 1);
    return v;
  }
  uint16_t get_u16() {
    uint8_t b[2];
    get_bytes(b, 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
  }
  uint32_t get_u32() {
    uint8_t b[4];
    get_bytes(b, 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  }
  int16_t get_i16() { return static_cast<int16_t>(get_u16()); }
  float get_f32() {
    const uint32_t u = get_u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  std::string get_string() {
    const uint16_t n = get_u16();
    std::string s(n, '\0');
    if (n) get_bytes(s.data(), n);
    return s;
  }

  void expect_magic(const char (&magic)[5]) {
    char m[4];
    get_bytes(m, 4);
    if (std::memcmp(m, magic, 4) != 0) {
      fail_data(path_.string() + ": bad magic, not a " + std::string(magic, 4) + " file");
    }
  }

  void expect_trailer() {
    if (remaining_payload() != 0) {
      fail_data(path_.string() + ": " + std::to_string(remaining_payload()) +
                " unexpected trailing bytes before checksum");
    }
    uint8_t b[4];
    in_.read(reinterpret_cast<char*>(b), 4);
    if (in_.gcount() != 4) fail_data(path_.string() + ": truncated checksum");
    const uint32_t stored = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                            (static_cast<uint32_t>(b[2]) << 16) |
                            (static_cast<uint32_t>(b[3]) << 24);
    if (stored != crc_) fail_data(path_.string() + ": checksum mismatch (corrupt file)");
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  uint64_t size_ = 0, consumed_ = 0;
  uint32_t crc_ = 0;
};

}  // namespace ulcnn::bytes
