#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsrl/dataset.hpp"
#include "tsrl/tensor.hpp"

namespace tsrl {

struct EncoderConfig {
  std::size_t input_dims = 1;    // F
  std::size_t repr_dims = 64;    // K
  std::size_t hidden_dims = 64;
  std::size_t depth = 4;         // conv blocks; block d uses dilation 2^d
  std::size_t kernel_size = 3;

  void validate() const;
  /// Timestamps of history each output can see.
  std::size_t receptive_field() const;
};

/// Named parameter tensors in a fixed order. Layout:
///   input.weight [F,H], input.bias [H]
///   block{d}.conv1.weight [Cout,Cin,k] / .bias, block{d}.conv2.* likewise
///   block{d}.shortcut.weight [Cin,Cout] / .bias when Cin != Cout
///   output.weight [K,K], output.bias [K]
/// Blocks are H->H except the last, which is H->K.
class EncoderState {
 public:
  EncoderState() = default;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
  static EncoderState init(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  const std::vector<std::pair<std::string, Tensor>>& named_parameters() const { return params_; }
  std::vector<Tensor> parameters() const;
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const;

  /// Deep copy with fresh leaves.
  EncoderState clone() const;

  /// Assembles a state from loaded tensors; checks names and shapes against
  /// the config.
  static EncoderState from_tensors(const EncoderConfig& config,
                                   std::vector<std::pair<std::string, Tensor>> tensors);

 private:
  static std::vector<std::pair<std::string, Shape>> layout(const EncoderConfig& config);

  EncoderConfig config_;
  std::vector<std::pair<std::string, Tensor>> params_;
};

/// Values with missing cells zeroed plus the timestamps that had any missing
/// feature.
struct EncoderInput {
  Tensor values;                // [B,T,F]
  std::vector<bool> missing;    // B*T
  std::vector<bool> observed;   // B*T*F
};

/// Packs equal-shape instances into one batch.
EncoderInput pack_batch(std::span<const TimeSeriesInstance> instances);

/// Per-timestamp representations [B,T,K]. `hidden` (B*T, true = hidden)
/// zeroes the projected latents at those timestamps before the conv stack.
Tensor encode(const EncoderState& state, const Tensor& x,
              const std::vector<bool>* hidden = nullptr);
/// Batch form; timestamps with missing inputs are hidden as well.
Tensor encode(const EncoderState& state, const EncoderInput& input,
              const std::vector<bool>* hidden = nullptr);

}  // namespace tsrl
