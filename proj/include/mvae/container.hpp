#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvae/matrix.hpp"

namespace mvae {

/// Versioned binary container shared by model checkpoints and the dataset
/// cache. All integers and doubles are little-endian.
///
///   "MVAE" | u32 version | u32 kind | kind header | u32 count |
///   count x (u64 rows | u64 cols | rows*cols f64)
inline constexpr std::uint32_t kContainerVersion = 1;

enum class ContainerKind : std::uint32_t { model = 1, dataset = 2 };

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(const void* data, std::size_t n);
  void matrix(const Matrix& m);
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked reader; every failure is a FormatError carrying the byte
/// offset at which the read was attempted.
class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string raw(std::size_t n);
  Matrix matrix();
  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what);
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Writes magic, version and kind.
void write_container_preamble(ByteWriter& w, ContainerKind kind);
/// Checks magic, version and kind.
void read_container_preamble(ByteReader& r, ContainerKind expected);

}  // namespace mvae
