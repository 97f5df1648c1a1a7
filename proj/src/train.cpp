#include "tsrl/train.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "json.hpp"

#include "tsrl/adam.hpp"
#include "tsrl/checkpoint.hpp"
#include "tsrl/ftaug.hpp"
#include "tsrl/ops.hpp"

namespace tsrl {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct BatchViews {
  std::vector<TimeSeriesInstance> view1;
  std::vector<TimeSeriesInstance> view2;
  CropPair crop;
};

// One crop pair per batch keeps every overlap the same length; each instance
// gets a donor drawn uniformly from the other batch members.
BatchViews make_views(std::span<const TimeSeriesInstance> batch, double mix_rate, Rng& rng) {
  const std::size_t b = batch.size();
  if (b < 2) throw ShapeError("augment: batch needs at least 2 instances");
  BatchViews views;
  views.crop = random_crop_pair(batch.front().length, rng);
  views.view1.reserve(b);
  views.view2.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t j = rng.below(b - 1);
    if (j >= i) ++j;
    AugmentedPair pair = ftaug_pair(batch[i], batch[j], mix_rate, views.crop, rng);
    views.view1.push_back(std::move(pair.view1));
    views.view2.push_back(std::move(pair.view2));
  }
  return views;
}

AlignedReprPair overlap_reprs(const Tensor& r1, const Tensor& r2, const CropPair& crop) {
  const std::size_t len = crop.overlap_length();
  return {slice_time(r1, crop.overlap_offset_view1(), len),
          slice_time(r2, crop.overlap_offset_view2(), len)};
}

std::filesystem::path last_good_path(const std::filesystem::path& checkpoint) {
  std::filesystem::path p = checkpoint;
  p += ".last_good";
  return p;
}

}  // namespace

ObjectiveTerms training_objective(const EncoderState& encoder, const DecoderState& decoder,
                                  std::span<const TimeSeriesInstance> batch,
                                  const TrainConfig& cfg, Rng& rng) {
  BatchViews views = make_views(batch, cfg.mix_rate, rng);
  const EncoderInput in1 = pack_batch(views.view1);
  const EncoderInput in2 = pack_batch(views.view2);

  ObjectiveTerms out;
  const Tensor r1 = encode(encoder, in1);
  const Tensor r2 = encode(encoder, in2);
  out.dual = hierarchical_dual_loss(overlap_reprs(r1, r2, views.crop), rng, cfg.dualcon);

  const std::size_t b = batch.size();
  const std::size_t f = batch.front().features;
  const MaskSpec m1 = random_mask(b, views.crop.view1_length(), cfg.mask_rate, rng);
  const MaskSpec m2 = random_mask(b, views.crop.view2_length(), cfg.mask_rate, rng);
  const std::vector<bool> h1 = m1.hidden();
  const std::vector<bool> h2 = m2.hidden();
  const Tensor pred1 = reconstruct(decoder, encode(encoder, in1, &h1));
  const Tensor pred2 = reconstruct(decoder, encode(encoder, in2, &h2));
  out.recon = recon_loss(in1.values, in2.values, pred1, pred2,
                         recon_cells(m1, f, cfg.recon_on, in1.observed),
                         recon_cells(m2, f, cfg.recon_on, in2.observed));
  out.total = total_loss(out.dual.dual, out.recon.value, cfg.alpha);
  return out;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
  if (iterations == 0 && epochs == 0) {
    throw ConfigError("train: iterations or epochs must be positive");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("train: alpha must be >= 0");
  if (!(mix_rate >= 0.0 && mix_rate <= 1.0)) throw ConfigError("train: mix_rate must be in [0,1]");
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) {
    throw ConfigError("train: mask_rate must be in (0,1)");
  }
  if (!(dualcon.temperature > 0.0)) throw ConfigError("train: temperature must be positive");
  encoder.validate();
}

void TrainReport::write_jsonl(std::ostream& out) const {
  for (const IterationRecord& r : records) {
    nlohmann::ordered_json j;
    j["iter"] = r.iter;
    j["l_temp"] = r.l_temp;
    j["l_inst"] = r.l_inst;
    j["l_dual"] = r.l_dual;
    j["l_recon"] = r.l_recon;
    j["total"] = r.total;
    j["wall_ms"] = r.wall_ms;
    out << j.dump() << '\n';
  }
}

TrainingDiverged::TrainingDiverged(std::size_t iteration, std::string checkpoint,
                                   const std::string& cause)
    : NumericError("train: diverged at iteration " + std::to_string(iteration) + " (" + cause +
                   ")" + (checkpoint.empty() ? "" : "; last good state in " + checkpoint)),
      iteration_(iteration),
      checkpoint_(std::move(checkpoint)) {}

AlignedReprPair augmented_overlap_reprs(const EncoderState& encoder,
                                        std::span<const TimeSeriesInstance> batch,
                                        double mix_rate, Rng& rng) {
  BatchViews views = make_views(batch, mix_rate, rng);
  const Tensor r1 = encode(encoder, pack_batch(views.view1));
  const Tensor r2 = encode(encoder, pack_batch(views.view2));
  return overlap_reprs(r1, r2, views.crop);
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg_in, const TrainOutputs& outputs) {
  if (ds.size() < 2) throw ConfigError("train: dataset needs at least 2 instances");
  TrainConfig cfg = cfg_in;
  cfg.encoder.input_dims = ds.features();
  cfg.validate();

  TrainResult result;
  result.encoder = EncoderState::init(cfg.encoder, Rng::derive(cfg.seed, 1).next_u64());
  result.decoder =
      DecoderState::init(cfg.encoder.repr_dims, ds.features(), Rng::derive(cfg.seed, 2).next_u64());
  Rng rng = Rng::derive(cfg.seed, 3);

  std::vector<Tensor> params = result.encoder.parameters();
  for (const Tensor& p : result.decoder.parameters()) params.push_back(p);
  Adam optimizer(params, AdamOptions{.lr = cfg.lr});

  const std::size_t per_epoch = batches(ds.size(), cfg.batch_size, 0).size();
  const std::size_t total_iters = cfg.epochs > 0 ? cfg.epochs * per_epoch : cfg.iterations;

  const auto start = Clock::now();
  std::vector<std::vector<std::size_t>> epoch_batches;
  std::size_t cursor = 0;
  std::vector<TimeSeriesInstance> batch;
  for (std::size_t it = 0; it < total_iters; ++it) {
    if (cursor == epoch_batches.size()) {
      epoch_batches = batches(ds.size(), cfg.batch_size, rng.next_u64());
      cursor = 0;
    }
    batch.clear();
    for (std::size_t idx : epoch_batches[cursor]) batch.push_back(ds.instances[idx]);
    ++cursor;

    const auto iter_start = Clock::now();
    IterationRecord rec;
    rec.iter = it;
    try {
      ObjectiveTerms losses = training_objective(result.encoder, result.decoder, batch, cfg, rng);
      rec.l_temp = losses.dual.temporal_mean;
      rec.l_inst = losses.dual.instance_mean;
      rec.l_dual = losses.dual.dual.item();
      rec.l_recon = losses.recon.value.item();
      rec.total = losses.total.item();
      rec.recon_empty = losses.recon.no_masked_positions;
      backward(losses.total);
      for (const Tensor& p : params) {
        for (double g : p.grad()) {
          if (!std::isfinite(g)) throw NumericError("non-finite gradient");
        }
      }
    } catch (const NumericError& e) {
      // Parameters are only written by the optimiser step, so the current
      // state is still the last good one.
      std::string saved;
      if (outputs.checkpoint) {
        const auto path = last_good_path(*outputs.checkpoint);
        save_checkpoint(result.encoder, &result.decoder, path);
        saved = path.string();
      }
      throw TrainingDiverged(it, saved, e.what());
    }
    optimizer.step();
    optimizer.zero_grad();
    rec.wall_ms = elapsed_ms(iter_start);
    result.report.records.push_back(rec);
  }
  result.report.wall_ms = elapsed_ms(start);

  if (outputs.checkpoint) {
    save_checkpoint(result.encoder, &result.decoder, *outputs.checkpoint);
    result.report.checkpoint_path = outputs.checkpoint->string();
  }
  return result;
}

}  // namespace tsrl
