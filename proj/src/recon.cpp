#include "tsrl/recon.hpp"

#include <cmath>

#include "tsrl/error.hpp"
#include "tsrl/ops.hpp"

namespace tsrl {
namespace {

// sum over selected cells of (prediction - target)^2
Tensor masked_sse(const Tensor& prediction, const Tensor& target, const std::vector<bool>& cells) {
  if (prediction.shape() != target.shape()) {
    throw ShapeError("recon_loss: prediction " + shape_str(prediction.shape()) +
                     " vs target " + shape_str(target.shape()));
  }
  if (cells.size() != prediction.numel()) {
    throw ShapeError("recon_loss: cell mask has " + std::to_string(cells.size()) +
                     " entries, expected " + std::to_string(prediction.numel()));
  }
  auto p = prediction.data();
  auto y = target.data();
  double total = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i]) total += (p[i] - y[i]) * (p[i] - y[i]);
  }
  return Tensor::from_op("masked_sse", {}, {total}, {prediction},
                         [prediction, target, cells](const detail::Node& self) {
                           auto g = prediction.grad_sink();
                           auto p = prediction.data();
                           auto y = target.data();
                           for (std::size_t i = 0; i < cells.size(); ++i) {
                             if (cells[i]) g[i] += 2.0 * (p[i] - y[i]) * self.grad[0];
                           }
                         });
}

}  // namespace

std::vector<bool> MaskSpec::hidden() const {
  std::vector<bool> out(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) out[i] = !observed[i];
  return out;
}

std::size_t MaskSpec::masked_count() const {
  std::size_t n = 0;
  for (bool seen : observed) n += seen ? 0 : 1;
  return n;
}

MaskSpec random_mask(std::size_t batch, std::size_t length, double rate, Rng& rng) {
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("random_mask: rate must lie in (0, 1)");
  MaskSpec mask;
  mask.batch = batch;
  mask.length = length;
  mask.rate = rate;
  mask.observed.resize(batch * length);
  for (std::size_t i = 0; i < mask.observed.size(); ++i) mask.observed[i] = rng.uniform() >= rate;
  return mask;
}

MaskSpec random_mask(std::size_t batch, std::size_t length, double rate, std::uint64_t seed) {
  Rng rng(seed);
  return random_mask(batch, length, rate, rng);
}

DecoderState DecoderState::init(std::size_t repr_dims, std::size_t features, std::uint64_t seed) {
  if (repr_dims < 1 || features < 1) throw ConfigError("decoder: dimensions must be >= 1");
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(repr_dims));
  std::vector<double> w(repr_dims * features);
  for (double& v : w) v = bound * (2.0 * rng.uniform() - 1.0);
  std::vector<double> b(features);
  for (double& v : b) v = bound * (2.0 * rng.uniform() - 1.0);
  return {Tensor({repr_dims, features}, std::move(w), true), Tensor({features}, std::move(b), true)};
}

DecoderState DecoderState::clone() const {
  DecoderState copy{weight.detach(), bias.detach()};
  copy.weight.set_requires_grad(true);
  copy.bias.set_requires_grad(true);
  return copy;
}

Tensor reconstruct(const DecoderState& decoder, const Tensor& r) {
  if (r.rank() != 3) throw ShapeError("reconstruct: r must be [B,T,K], got " + shape_str(r.shape()));
  if (r.dim(2) != decoder.weight.dim(0)) {
    throw ShapeError("reconstruct: representation dimension (dim 2) is " +
                     std::to_string(r.dim(2)) + ", decoder expects " +
                     std::to_string(decoder.weight.dim(0)));
  }
  return linear(r, decoder.weight, decoder.bias);
}

std::vector<bool> recon_cells(const MaskSpec& mask, std::size_t features, ReconOn on,
                              const std::vector<bool>& data_observed) {
  if (data_observed.size() != mask.observed.size() * features) {
    throw ShapeError("recon_cells: data mask has " + std::to_string(data_observed.size()) +
                     " cells, expected " + std::to_string(mask.observed.size() * features));
  }
  std::vector<bool> cells(data_observed.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const bool kept = mask.observed[i / features];
    const bool selected = on == ReconOn::kMasked ? !kept : kept;
    cells[i] = selected && data_observed[i];
  }
  return cells;
}

ReconLoss recon_loss(const Tensor& target, const Tensor& target_aug, const Tensor& prediction,
                     const Tensor& prediction_aug, const std::vector<bool>& cells,
                     const std::vector<bool>& cells_aug) {
  if (prediction.rank() != 3 || prediction_aug.rank() != 3) {
    throw ShapeError("recon_loss: predictions must be [B,L,F]");
  }
  const std::size_t batch = prediction.dim(0);
  if (batch == 0 || prediction_aug.dim(0) != batch) {
    throw ShapeError("recon_loss: both views need the same non-zero batch size");
  }
  ReconLoss out;
  out.no_masked_positions = std::find(cells.begin(), cells.end(), true) == cells.end() &&
                            std::find(cells_aug.begin(), cells_aug.end(), true) == cells_aug.end();
  Tensor both = masked_sse(prediction, target, cells) + masked_sse(prediction_aug, target_aug, cells_aug);
  out.value = scale(both, 1.0 / (2.0 * static_cast<double>(batch)));
  return out;
}

Tensor total_loss(const Tensor& dual, const Tensor& recon, double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("total_loss: alpha must be >= 0");
  return dual + scale(recon, alpha);
}

}  // namespace tsrl
