#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tsrl/rng.hpp"
#include "tsrl/tensor.hpp"

namespace tsrl {

/// Per-timestamp observation flags for a batch (true = observed). A masked
/// timestamp hides every feature at once.
struct MaskSpec {
  std::size_t batch = 0;
  std::size_t length = 0;
  double rate = 0.0;
  std::vector<bool> observed;  // B*T

  /// Complement, in the form encode() takes.
  std::vector<bool> hidden() const;
  std::size_t masked_count() const;
};

/// Independent Bernoulli(1 - rate) observation flags per (b, t).
MaskSpec random_mask(std::size_t batch, std::size_t length, double rate, Rng& rng);
MaskSpec random_mask(std::size_t batch, std::size_t length, double rate, std::uint64_t seed);

/// Pointwise linear decoder K -> F.
struct DecoderState {
  Tensor weight;  // [K,F]
  Tensor bias;    // [F]

  static DecoderState init(std::size_t repr_dims, std::size_t features, std::uint64_t seed);
  std::vector<Tensor> parameters() const { return {weight, bias}; }
  DecoderState clone() const;
};

/// r [B,T,K] -> reconstruction [B,T,F].
Tensor reconstruct(const DecoderState& decoder, const Tensor& r);

/// Which positions the reconstruction error is summed over.
enum class ReconOn { kMasked, kObserved };

/// B*T*F flags selecting the cells that enter the loss: masked (or, with
/// kObserved, unmasked) timestamps whose ground truth is itself observed.
std::vector<bool> recon_cells(const MaskSpec& mask, std::size_t features, ReconOn on,
                              const std::vector<bool>& data_observed);

struct ReconLoss {
  Tensor value;
  /// Set when no cell in either view was selected; value is then 0.
  bool no_masked_positions = false;
};

/// (1 / 2B) * sum over selected cells of squared error, over both views.
/// Predictions are tracked tensors [B,L,F]; targets are plain values.
ReconLoss recon_loss(const Tensor& target, const Tensor& target_aug, const Tensor& prediction,
                     const Tensor& prediction_aug, const std::vector<bool>& cells,
                     const std::vector<bool>& cells_aug);

/// L = L_dual + alpha * L_recon.
Tensor total_loss(const Tensor& dual, const Tensor& recon, double alpha);

}  // namespace tsrl
