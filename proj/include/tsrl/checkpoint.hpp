#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsrl/encoder.hpp"
#include "tsrl/recon.hpp"
#include "tsrl/tensor.hpp"

namespace tsrl {

// Checkpoint container, all integers and floats little-endian:
//   magic   8 bytes  "TSRLCKPT"
//   version u32
//   count   u32
//   count x { name_len u32, name bytes, rank u32, dims u64[rank], data f64[prod(dims)] }
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::vector<std::uint8_t> serialize_tensors(const NamedTensors& tensors);
/// Throws FormatError on bad magic, version mismatch, truncation or trailing bytes.
NamedTensors deserialize_tensors(const std::vector<std::uint8_t>& bytes);

struct Checkpoint {
  EncoderState encoder;
  std::optional<DecoderState> decoder;

  const EncoderConfig& config() const { return encoder.config(); }
};

/// Writes the encoder config (as the leading "config.encoder" tensor), the
/// encoder parameters and optionally the decoder.
void save_checkpoint(const EncoderState& encoder, const DecoderState* decoder,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tsrl
