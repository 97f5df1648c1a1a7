#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tsrl/rng.hpp"
#include "tsrl/tensor.hpp"

namespace tsrl {

/// Representations of the two views restricted to the crop overlap, so that
/// position t indexes the same absolute timestamp in both. Each is [B,L,K].
struct AlignedReprPair {
  Tensor r;
  Tensor r_prime;

  std::size_t batch() const { return r.dim(0); }
  std::size_t length() const { return r.dim(1); }
  std::size_t width() const { return r.dim(2); }
  void validate() const;
};

/// One universum per (i, t) for both views, built with shared coefficients
/// and partners: u[i,t] = lambda * r[i,t] + (1 - lambda) * r[partner].
/// `partner` holds flat row indices (b * L + t) into the [B,L] grid.
struct UniversumDraw {
  Tensor u;        // from r
  Tensor u_prime;  // from r_prime
  std::vector<double> lambda;
  std::vector<std::size_t> partner;
};

struct DualConOptions {
  /// Logits are dot / temperature.
  double temperature = 1.0;
  /// Universum draws per (i, t) per kind; 0 turns universums off.
  std::size_t universum_density = 1;
  /// Anchor (i, t) also sees the temporal universums of its own instance at
  /// every t' in the overlap, t' = t included.
  bool temporal_self_universum = true;
  /// Whether anchor i sees the instance universums built for i itself, in
  /// addition to those built for every j != i.
  bool instance_self_universum = false;
};

/// Temporal universums: partner t' uniform over the overlap minus t. Returns
/// no draws when L < 2.
std::vector<UniversumDraw> synth_temporal_universum(const AlignedReprPair& pair, Rng& rng,
                                                    std::size_t density = 1);

/// Instance universums: partner j uniform over the batch minus i, same t.
/// Throws for B < 2.
std::vector<UniversumDraw> synth_instance_universum(const AlignedReprPair& pair, Rng& rng,
                                                    std::size_t density = 1);

/// Mean temporal contrastive loss over all (i, t), symmetrised over which
/// view supplies the anchor.
Tensor temporal_loss(const AlignedReprPair& pair, std::span<const UniversumDraw> universums,
                     const DualConOptions& options = {});

/// Mean instance contrastive loss over all (i, t), symmetrised. Throws for B < 2.
Tensor instance_loss(const AlignedReprPair& pair, std::span<const UniversumDraw> universums,
                     const DualConOptions& options = {});

struct LevelLoss {
  std::size_t length = 0;
  double temporal = 0.0;  // 0 when the level has a single timestamp
  double instance = 0.0;
  bool temporal_skipped = false;
};

struct LossBreakdown {
  std::vector<LevelLoss> levels;
  Tensor dual;                 // mean over levels of temporal + instance
  double temporal_mean = 0.0;  // mean over levels
  double instance_mean = 0.0;

  std::size_t level_count() const { return levels.size(); }
};

/// Dual loss at the overlap resolution, then repeatedly after max-pooling both
/// views by 2 along time, down to a single timestamp. Universums are drawn
/// afresh at every level.
LossBreakdown hierarchical_dual_loss(const AlignedReprPair& pair, Rng& rng,
                                     const DualConOptions& options = {});

/// Lengths visited by hierarchical_dual_loss for an overlap of `length`.
std::vector<std::size_t> pooling_schedule(std::size_t length);

struct HardnessStats {
  double universum_sum = 0.0;  // anchor . (own universum)
  double negative_sum = 0.0;   // anchor . (ordinary negative)
  std::size_t universum_count = 0;
  std::size_t negative_count = 0;

  double universum_mean() const {
    return universum_count ? universum_sum / static_cast<double>(universum_count) : 0.0;
  }
  double negative_mean() const {
    return negative_count ? negative_sum / static_cast<double>(negative_count) : 0.0;
  }
};

/// Level-0 similarity statistics: universums synthesised for each anchor
/// against the ordinary temporal and instance negatives of the same anchor.
/// Statistics are accumulated into `stats`.
void accumulate_hardness(const AlignedReprPair& pair, Rng& rng, HardnessStats& stats);

}  // namespace tsrl
