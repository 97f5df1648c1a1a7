#include "tsrl/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tsrl/error.hpp"

namespace tsrl {
namespace {

constexpr char kMagic[8] = {'T', 'S', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr const char* kConfigName = "config.encoder";

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint64_t le(int width, const char* what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint: truncated while reading ") + what);
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_tensors(const NamedTensors& tensors) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le(out, kCheckpointVersion, 4);
  put_le(out, tensors.size(), 4);
  for (const auto& [name, t] : tensors) {
    put_le(out, name.size(), 4);
    out.insert(out.end(), name.begin(), name.end());
    put_le(out, t.rank(), 4);
    for (std::size_t d : t.shape()) put_le(out, d, 8);
    for (double v : t.data()) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  return out;
}

NamedTensors deserialize_tensors(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.text(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
    throw FormatError("checkpoint: bad magic bytes");
  }
  const auto version = in.le(4, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: format version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = in.le(4, "tensor count");
  NamedTensors out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = in.le(4, "name length");
    std::string name = in.text(name_len, "name");
    const auto rank = in.le(4, "rank");
    if (rank > 8) throw FormatError("checkpoint: tensor '" + name + "' has implausible rank");
    Shape shape(rank);
    std::uint64_t total = 1;
    for (auto& d : shape) {
      d = in.le(8, "dims");
      if (d != 0 && total > (std::uint64_t{1} << 40) / d) {
        throw FormatError("checkpoint: tensor '" + name + "' is implausibly large");
      }
      total *= d;
    }
    std::vector<double> data(total);
    for (double& v : data) v = std::bit_cast<double>(in.le(8, "tensor data"));
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!in.done()) throw FormatError("checkpoint: trailing bytes after last tensor");
  return out;
}

void save_checkpoint(const EncoderState& encoder, const DecoderState* decoder,
                     const std::filesystem::path& path) {
  const EncoderConfig& c = encoder.config();
  NamedTensors tensors;
  tensors.emplace_back(kConfigName,
                       Tensor({5}, {static_cast<double>(c.input_dims), static_cast<double>(c.repr_dims),
                                    static_cast<double>(c.hidden_dims), static_cast<double>(c.depth),
                                    static_cast<double>(c.kernel_size)}));
  for (const auto& p : encoder.named_parameters()) tensors.push_back(p);
  if (decoder) {
    tensors.emplace_back("decoder.weight", decoder->weight);
    tensors.emplace_back("decoder.bias", decoder->bias);
  }
  const auto bytes = serialize_tensors(tensors);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  NamedTensors tensors = deserialize_tensors(bytes);
  if (tensors.empty() || tensors.front().first != kConfigName ||
      tensors.front().second.shape() != Shape{5}) {
    throw FormatError("checkpoint: missing encoder config record");
  }
  auto field = [&](std::size_t i) {
    const double v = tensors.front().second.data()[i];
    if (!(v >= 1.0 && v <= 1e6 && v == std::floor(v))) {
      throw FormatError("checkpoint: corrupt encoder config");
    }
    return static_cast<std::size_t>(v);
  };
  EncoderConfig config{field(0), field(1), field(2), field(3), field(4)};
  tensors.erase(tensors.begin());

  std::optional<DecoderState> decoder;
  if (tensors.size() >= 2 && tensors[tensors.size() - 2].first == "decoder.weight" &&
      tensors.back().first == "decoder.bias") {
    DecoderState dec{tensors[tensors.size() - 2].second.detach(), tensors.back().second.detach()};
    if (dec.weight.rank() != 2 || dec.weight.dim(0) != config.repr_dims || dec.bias.rank() != 1 ||
        dec.bias.dim(0) != dec.weight.dim(1)) {
      throw FormatError("checkpoint: decoder shapes do not match the encoder");
    }
    dec.weight.set_requires_grad(true);
    dec.bias.set_requires_grad(true);
    decoder = std::move(dec);
    tensors.resize(tensors.size() - 2);
  }
  return {EncoderState::from_tensors(config, std::move(tensors)), std::move(decoder)};
}

}  // namespace tsrl
