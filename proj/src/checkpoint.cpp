#include "mvae/checkpoint.hpp"

#include <string>

#include "mvae/container.hpp"
#include "mvae/error.hpp"

namespace mvae {

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ckpt.params.check_shapes(ckpt.spec);
  ByteWriter w;
  write_container_preamble(w, ContainerKind::model);
  w.u32(static_cast<std::uint32_t>(ckpt.spec.latent));
  w.u32(static_cast<std::uint32_t>(ckpt.spec.input_dim));
  w.u32(static_cast<std::uint32_t>(ckpt.spec.hidden));
  w.u8(static_cast<std::uint8_t>(ckpt.spec.likelihood));
  w.u8(ckpt.spec.couple_mean ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(ckpt.spec.model));
  w.u8(0);
  const auto blocks = ckpt.params.blocks();
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) w.matrix(*b.matrix);
  return w.bytes();
}

Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  read_container_preamble(r, ContainerKind::model);
  Checkpoint ckpt;
  ckpt.spec.latent = r.u32();
  ckpt.spec.input_dim = r.u32();
  ckpt.spec.hidden = r.u32();
  std::size_t at = r.offset();
  const std::uint8_t likelihood = r.u8();
  if (likelihood > 1) throw FormatError("invalid likelihood code", at);
  ckpt.spec.likelihood = static_cast<Likelihood>(likelihood);
  at = r.offset();
  const std::uint8_t couple = r.u8();
  if (couple > 1) throw FormatError("invalid couple_mean flag", at);
  ckpt.spec.couple_mean = couple == 1;
  at = r.offset();
  const std::uint8_t model = r.u8();
  if (model > 1) throw FormatError("invalid model code", at);
  ckpt.spec.model = static_cast<ModelKind>(model);
  r.u8();
  if (ckpt.spec.latent == 0 || ckpt.spec.input_dim == 0 || ckpt.spec.hidden == 0) {
    throw FormatError("zero dimension in model header", 12);
  }
  at = r.offset();
  const std::uint32_t count = r.u32();
  if (count != kBlockCount) {
    throw FormatError("expected " + std::to_string(kBlockCount) + " parameter blocks, found " +
                          std::to_string(count),
                      at);
  }
  const ParameterBlocks expected = ParameterBlocks::zeros(ckpt.spec);
  const auto want = expected.blocks();
  auto blocks = ckpt.params.blocks();
  for (std::size_t i = 0; i < kBlockCount; ++i) {
    at = r.offset();
    *blocks[i].matrix = r.matrix();
    if (blocks[i].matrix->rows() != want[i].matrix->rows() ||
        blocks[i].matrix->cols() != want[i].matrix->cols()) {
      throw FormatError("block " + std::string(blocks[i].name) + " has wrong shape", at);
    }
  }
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after last block", r.offset());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace mvae
