#include "mvae/container.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mvae/error.hpp"

namespace mvae {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::raw(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  bytes_.insert(bytes_.end(), p, p + n);
}

void ByteWriter::matrix(const Matrix& m) {
  u64(m.rows());
  u64(m.cols());
  for (double v : m.values()) f64(v);
}

void ByteReader::need(std::size_t n, const char* what) {
  if (remaining() < n) {
    throw FormatError(std::string("truncated container: expected ") + what + " at byte offset " +
                          std::to_string(pos_),
                      pos_);
  }
}

std::uint8_t ByteReader::u8() {
  need(1, "u8");
  return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4, "u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8, "u64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::raw(std::size_t n) {
  need(n, "bytes");
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

Matrix ByteReader::matrix() {
  const std::size_t at = pos_;
  const std::uint64_t rows = u64();
  const std::uint64_t cols = u64();
  if (cols != 0 && rows > remaining() / 8 / cols) {
    throw FormatError("matrix at byte offset " + std::to_string(at) + " declares " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          " values but only " + std::to_string(remaining()) + " bytes remain",
                      at);
  }
  std::vector<double> data(rows * cols);
  for (double& v : data) {
    const std::size_t vat = pos_;
    v = f64();
    if (!std::isfinite(v)) {
      throw FormatError("non-finite value at byte offset " + std::to_string(vat), vat);
    }
  }
  return Matrix(rows, cols, std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

void write_container_preamble(ByteWriter& w, ContainerKind kind) {
  w.raw("MVAE", 4);
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(kind));
}

void read_container_preamble(ByteReader& r, ContainerKind expected) {
  if (r.remaining() < 4) throw FormatError("truncated container: missing magic at byte offset 0", 0);
  if (r.raw(4) != "MVAE") throw FormatError("bad magic at byte offset 0", 0);
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32();
  if (version != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(version), version_at);
  }
  const std::size_t kind_at = r.offset();
  const std::uint32_t kind = r.u32();
  if (kind != static_cast<std::uint32_t>(expected)) {
    throw FormatError("container holds kind " + std::to_string(kind) + ", expected " +
                          std::to_string(static_cast<std::uint32_t>(expected)),
                      kind_at);
  }
}

}  // namespace mvae
