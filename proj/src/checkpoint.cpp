#include "svldl/checkpoint.hpp"

#include <string>

#include "svldl/binary_io.hpp"
#include "svldl/error.hpp"

namespace svldl {

namespace {

constexpr char kMagic[] = "SVLDL1";
constexpr std::size_t kMagicSize = 6;

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelParameters& params) {
  std::vector<std::uint8_t> out(kMagic, kMagic + kMagicSize);
  const auto& cfg = params.config;
  for (int v : {cfg.K, cfg.layers, cfg.feature_dim, cfg.hidden}) {
    binary::put_u32(out, static_cast<std::uint32_t>(v));
  }
  for (const Tensor* t : params.tensors()) {
    binary::put_u32(out, static_cast<std::uint32_t>(t->shape.size()));
    for (std::size_t d : t->shape) binary::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t->data) binary::put_f64(out, v);
  }
  return out;
}

ModelParameters decode_checkpoint(std::span<const std::uint8_t> bytes) {
  binary::Reader in(bytes, "checkpoint");
  if (!in.magic(kMagic, kMagicSize)) throw FormatError("checkpoint: bad magic");
  ModelConfig cfg;
  cfg.K = static_cast<int>(in.u32());
  cfg.layers = static_cast<int>(in.u32());
  cfg.feature_dim = static_cast<int>(in.u32());
  cfg.hidden = static_cast<int>(in.u32());
  ModelParameters params;
  try {
    params = ModelParameters::zeros(cfg);
  } catch (const DomainError& e) {
    throw FormatError(std::string("checkpoint: invalid config block: ") + e.what());
  }
  const auto& names = ModelParameters::tensor_names();
  auto tensors = params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor& t = *tensors[i];
    const std::uint32_t rank = in.u32();
    if (rank != t.shape.size()) {
      throw FormatError(std::string("checkpoint: wrong rank for ") + names[i]);
    }
    for (std::size_t d = 0; d < rank; ++d) {
      if (in.u32() != t.shape[d]) {
        throw FormatError(std::string("checkpoint: shape of ") + names[i] +
                          " disagrees with the config block");
      }
    }
    in.need(t.data.size() * 8);
    for (double& v : t.data) v = in.f64();
  }
  if (in.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return params;
}

void save_checkpoint(const std::filesystem::path& path,
                     const ModelParameters& params) {
  binary::write_file(path, encode_checkpoint(params));
}

ModelParameters load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(binary::read_file(path));
}

}  // namespace svldl
