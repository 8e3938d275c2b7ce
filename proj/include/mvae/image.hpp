#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mvae/matrix.hpp"

namespace mvae {

struct TileShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
};

/// 784 -> 28x28 gray, 3072 -> 32x32 RGB (channel-major), other perfect
/// squares -> square gray, anything else a 1-pixel-high strip.
TileShape infer_tile_shape(std::size_t dim);

/// A grid of equally sized tiles with values in [0, 1]. payload holds the
/// assembled image row-major with interleaved channels.
class ImageGrid {
 public:
  ImageGrid(std::size_t tile_rows, std::size_t tile_cols, TileShape tile);

  std::size_t tile_rows() const noexcept { return tile_rows_; }
  std::size_t tile_cols() const noexcept { return tile_cols_; }
  const TileShape& tile() const noexcept { return tile_; }
  std::size_t pixel_width() const noexcept { return tile_cols_ * tile_.width; }
  std::size_t pixel_height() const noexcept { return tile_rows_ * tile_.height; }
  const std::vector<double>& payload() const noexcept { return payload_; }

  /// Places one flattened sample (channel-major for RGB) at tile (r, c).
  void set_tile(std::size_t r, std::size_t c, std::span<const double> sample);
  /// The flattened sample at tile (r, c), inverse of set_tile.
  std::vector<double> tile_values(std::size_t r, std::size_t c) const;

 private:
  std::size_t tile_rows_, tile_cols_;
  TileShape tile_;
  std::vector<double> payload_;
};

/// round(v * 255) clamped to [0, 255].
std::uint8_t quantize(double v);

/// Binary netpbm image: P5 for one channel, P6 for three.
struct PnmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

PnmImage to_pnm(const ImageGrid& grid);
std::vector<std::uint8_t> encode_pnm(const PnmImage& img);
PnmImage decode_pnm(const std::vector<std::uint8_t>& bytes);
void write_pnm(const std::filesystem::path& path, const ImageGrid& grid);
PnmImage read_pnm(const std::filesystem::path& path);

}  // namespace mvae
