#include "mvae/image.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "mvae/container.hpp"
#include "mvae/error.hpp"

namespace mvae {

TileShape infer_tile_shape(std::size_t dim) {
  if (dim == 3072) return {32, 32, 3};
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dim))));
  if (side * side == dim) return {side, side, 1};
  return {1, dim, 1};
}

ImageGrid::ImageGrid(std::size_t tile_rows, std::size_t tile_cols, TileShape tile)
    : tile_rows_(tile_rows), tile_cols_(tile_cols), tile_(tile) {
  if (tile.channels != 1 && tile.channels != 3) throw ContractError("ImageGrid: 1 or 3 channels");
  payload_.assign(tile_rows * tile_cols * tile.height * tile.width * tile.channels, 0.0);
}

void ImageGrid::set_tile(std::size_t r, std::size_t c, std::span<const double> sample) {
  const std::size_t h = tile_.height, w = tile_.width, ch = tile_.channels;
  if (r >= tile_rows_ || c >= tile_cols_) throw ContractError("ImageGrid: tile out of range");
  if (sample.size() != h * w * ch) {
    throw ContractError("ImageGrid: sample has " + std::to_string(sample.size()) +
                        " values, tile needs " + std::to_string(h * w * ch));
  }
  const std::size_t stride = pixel_width() * ch;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < ch; ++k) {
        const std::size_t dst = (r * h + y) * stride + (c * w + x) * ch + k;
        payload_[dst] = sample[k * h * w + y * w + x];
      }
    }
  }
}

std::vector<double> ImageGrid::tile_values(std::size_t r, std::size_t c) const {
  const std::size_t h = tile_.height, w = tile_.width, ch = tile_.channels;
  std::vector<double> out(h * w * ch);
  const std::size_t stride = pixel_width() * ch;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < ch; ++k)
        out[k * h * w + y * w + x] = payload_[(r * h + y) * stride + (c * w + x) * ch + k];
  return out;
}

std::uint8_t quantize(double v) {
  const double q = std::round(v * 255.0);
  if (!(q > 0.0)) return 0;
  if (q >= 255.0) return 255;
  return static_cast<std::uint8_t>(q);
}

PnmImage to_pnm(const ImageGrid& grid) {
  PnmImage img{grid.pixel_width(), grid.pixel_height(), grid.tile().channels, {}};
  img.pixels.reserve(grid.payload().size());
  for (double v : grid.payload()) img.pixels.push_back(quantize(v));
  return img;
}

std::vector<std::uint8_t> encode_pnm(const PnmImage& img) {
  if (img.channels != 1 && img.channels != 3) throw ContractError("encode_pnm: 1 or 3 channels");
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(img.width) + " " + std::to_string(img.height) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

PnmImage decode_pnm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  const auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto number = [&]() -> std::size_t {
    skip_space();
    const std::size_t at = pos;
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    if (pos == at) throw FormatError("netpbm: expected a number at byte offset " + std::to_string(at), at);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("netpbm: expected P5 or P6 magic at byte offset 0", 0);
  }
  PnmImage img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  img.width = number();
  img.height = number();
  const std::size_t maxval = number();
  if (maxval != 255) throw FormatError("netpbm: only maxval 255 is supported", pos);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError("netpbm: missing separator after header", pos);
  }
  ++pos;
  const std::size_t need = img.width * img.height * img.channels;
  if (bytes.size() - pos != need) {
    throw FormatError("netpbm: payload has " + std::to_string(bytes.size() - pos) +
                          " bytes, header declares " + std::to_string(need),
                      pos);
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

void write_pnm(const std::filesystem::path& path, const ImageGrid& grid) {
  write_file_bytes(path, encode_pnm(to_pnm(grid)));
}

PnmImage read_pnm(const std::filesystem::path& path) { return decode_pnm(read_file_bytes(path)); }

}  // namespace mvae
