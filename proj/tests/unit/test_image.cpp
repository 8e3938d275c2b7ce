#include <doctest.h>

#include "../support/fixtures.hpp"
#include "mvae/error.hpp"
#include "mvae/image.hpp"

using namespace mvae;
using mvae::testing::scratch_dir;

TEST_CASE("tile shapes") {
  CHECK(infer_tile_shape(784).height == 28);
  CHECK(infer_tile_shape(784).channels == 1);
  CHECK(infer_tile_shape(3072).width == 32);
  CHECK(infer_tile_shape(3072).channels == 3);
  CHECK(infer_tile_shape(16).height == 4);
  CHECK(infer_tile_shape(10).height == 1);
  CHECK(infer_tile_shape(10).width == 10);
}

TEST_CASE("quantize") {
  CHECK(quantize(0.0) == 0);
  CHECK(quantize(1.0) == 255);
  CHECK(quantize(0.5) == 128);
  CHECK(quantize(-0.3) == 0);
  CHECK(quantize(1.7) == 255);
  CHECK(quantize(100.0 / 255.0) == 100);
}

TEST_CASE("grid geometry and tile placement") {
  ImageGrid g(3, 10, infer_tile_shape(784));
  CHECK(g.pixel_height() == 84);
  CHECK(g.pixel_width() == 280);
  CHECK(g.payload().size() == 84 * 280);
  std::vector<double> s(784);
  for (std::size_t i = 0; i < 784; ++i) s[i] = static_cast<double>(i % 255) / 255.0;
  g.set_tile(2, 7, s);
  CHECK(g.tile_values(2, 7) == s);
  CHECK(g.payload()[(2 * 28) * 280 + 7 * 28] == s[0]);
  CHECK(g.payload()[(2 * 28 + 1) * 280 + 7 * 28 + 2] == s[28 + 2]);
  CHECK_THROWS_AS(g.set_tile(3, 0, s), ContractError);
}

TEST_CASE("rgb tiles interleave channels") {
  ImageGrid g(1, 1, TileShape{2, 2, 3});
  const std::vector<double> s{0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.05};
  g.set_tile(0, 0, s);
  // pixel (0,0) gathers element 0 of each channel plane
  CHECK(g.payload()[0] == 0.0);
  CHECK(g.payload()[1] == 0.4);
  CHECK(g.payload()[2] == 0.8);
  CHECK(g.tile_values(0, 0) == s);
}

TEST_CASE("netpbm round trip") {
  const auto dir = scratch_dir("pnm");
  for (std::size_t ch : {1u, 3u}) {
    ImageGrid g(2, 3, TileShape{4, 5, ch});
    Rng rng(ch);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 3; ++c) {
        std::vector<double> s(4 * 5 * ch);
        for (double& v : s) v = rng.uniform();
        g.set_tile(r, c, s);
      }
    const auto path = dir / (ch == 1 ? "g.pgm" : "g.ppm");
    write_pnm(path, g);
    const PnmImage img = read_pnm(path);
    CHECK(img.width == 15);
    CHECK(img.height == 8);
    CHECK(img.channels == ch);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      CHECK(img.pixels[i] == quantize(g.payload()[i]));
      CHECK(std::abs(img.pixels[i] / 255.0 - g.payload()[i]) <= 0.5 / 255.0 + 1e-12);
    }
    const auto bytes = encode_pnm(img);
    CHECK(std::string(bytes.begin(), bytes.begin() + 2) == (ch == 1 ? "P5" : "P6"));
  }
  CHECK_THROWS_AS(decode_pnm({'P', '2', '\n'}), FormatError);
  PnmImage tiny{2, 1, 1, {1, 2}};
  auto bytes = encode_pnm(tiny);
  bytes.pop_back();
  CHECK_THROWS_AS(decode_pnm(bytes), FormatError);
}
