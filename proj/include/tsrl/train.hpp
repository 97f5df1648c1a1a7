#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tsrl/dataset.hpp"
#include "tsrl/dualcon.hpp"
#include "tsrl/encoder.hpp"
#include "tsrl/error.hpp"
#include "tsrl/recon.hpp"

namespace tsrl {

struct TrainConfig {
  /// Total optimiser steps. Ignored when `epochs` is non-zero.
  std::size_t iterations = 200;
  std::size_t epochs = 0;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double alpha = 0.5;
  double mix_rate = 0.1;
  double mask_rate = 0.5;
  ReconOn recon_on = ReconOn::kMasked;
  /// input_dims is taken from the dataset.
  EncoderConfig encoder;
  DualConOptions dualcon;
  std::uint64_t seed = 0;

  void validate() const;
};

struct IterationRecord {
  std::size_t iter = 0;
  double l_temp = 0.0;   // mean over hierarchy levels
  double l_inst = 0.0;
  double l_dual = 0.0;
  double l_recon = 0.0;
  double total = 0.0;
  double wall_ms = 0.0;
  bool recon_empty = false;
};

struct TrainReport {
  std::vector<IterationRecord> records;
  double wall_ms = 0.0;
  std::string checkpoint_path;

  /// One JSON object per line: iter, l_temp, l_inst, l_dual, l_recon, total, wall_ms.
  void write_jsonl(std::ostream& out) const;
};

struct TrainResult {
  EncoderState encoder;
  DecoderState decoder;
  TrainReport report;
};

/// Raised when the objective stops being finite. Carries the failing
/// iteration and, when an output path was configured, where the last good
/// state was written.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(std::size_t iteration, std::string checkpoint, const std::string& cause);
  std::size_t iteration() const { return iteration_; }
  const std::string& checkpoint() const { return checkpoint_; }

 private:
  std::size_t iteration_;
  std::string checkpoint_;
};

struct TrainOutputs {
  /// Final checkpoint; on divergence the last good state is written next to
  /// it with a ".last_good" suffix.
  std::optional<std::filesystem::path> checkpoint;
};

struct ObjectiveTerms {
  LossBreakdown dual;
  ReconLoss recon;
  Tensor total;  // dual + alpha * recon
};

/// One batch of the training objective: augmented views, hierarchical dual
/// loss over their overlap, then masked reconstruction of both views. All
/// draws come from `rng`.
ObjectiveTerms training_objective(const EncoderState& encoder, const DecoderState& decoder,
                                  std::span<const TimeSeriesInstance> batch,
                                  const TrainConfig& cfg, Rng& rng);

/// Joint contrastive + reconstruction training. Every random choice derives
/// from cfg.seed.
TrainResult train(const Dataset& ds, const TrainConfig& cfg, const TrainOutputs& outputs = {});

/// Representations for one batch under the training-time augmentation: the
/// two views' representations restricted to their overlap. Used by the
/// hardness diagnostics.
AlignedReprPair augmented_overlap_reprs(const EncoderState& encoder,
                                        std::span<const TimeSeriesInstance> batch,
                                        double mix_rate, Rng& rng);

}  // namespace tsrl
