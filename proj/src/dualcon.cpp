#include "tsrl/dualcon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "tsrl/error.hpp"
#include "tsrl/ops.hpp"

namespace tsrl {
namespace {

struct RowRef {
  std::uint32_t source;
  std::uint32_t row;
};

// Anchors and their candidate lists; the first candidate of each list is the
// positive, the rest are negatives.
struct ContrastPlan {
  std::vector<RowRef> anchors;
  std::vector<std::size_t> offsets{0};
  std::vector<RowRef> candidates;

  void close_anchor() { offsets.push_back(candidates.size()); }
};

constexpr std::uint32_t kR = 0;
constexpr std::uint32_t kRPrime = 1;
std::uint32_t universum_source(std::size_t draw, bool prime) {
  return static_cast<std::uint32_t>(2 + 2 * draw + (prime ? 1 : 0));
}

std::vector<Tensor> plan_sources(const AlignedReprPair& pair,
                                 std::span<const UniversumDraw> universums) {
  std::vector<Tensor> sources{pair.r, pair.r_prime};
  for (const auto& draw : universums) {
    if (draw.u.shape() != pair.r.shape() || draw.u_prime.shape() != pair.r.shape()) {
      throw ShapeError("dualcon: universum shape " + shape_str(draw.u.shape()) +
                       " does not match representations " + shape_str(pair.r.shape()));
    }
    sources.push_back(draw.u);
    sources.push_back(draw.u_prime);
  }
  return sources;
}

// Mean over anchors of logsumexp(logits) - logit(positive), with
// logit = anchor . candidate / temperature.
Tensor contrast(const std::vector<Tensor>& sources, ContrastPlan plan, std::size_t width,
                double temperature) {
  if (plan.anchors.empty()) throw ShapeError("dualcon: no anchors");
  std::vector<const double*> rows;
  for (const Tensor& s : sources) rows.push_back(s.data().data());
  for (const Tensor& s : sources) {
    for (double v : s.data()) {
      if (!std::isfinite(v)) throw NumericError("dualcon: non-finite representation");
    }
  }
  auto vec = [&](RowRef ref) { return rows[ref.source] + static_cast<std::size_t>(ref.row) * width; };
  auto dot = [width](const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t k = 0; k < width; ++k) s += a[k] * b[k];
    return s;
  };

  const double inv_temp = 1.0 / temperature;
  const double weight = 1.0 / static_cast<double>(plan.anchors.size());
  std::vector<double> probs(plan.candidates.size());
  double loss = 0.0;
  for (std::size_t a = 0; a < plan.anchors.size(); ++a) {
    const double* anchor = vec(plan.anchors[a]);
    const std::size_t begin = plan.offsets[a];
    const std::size_t end = plan.offsets[a + 1];
    double peak = -INFINITY;
    for (std::size_t c = begin; c < end; ++c) {
      probs[c] = dot(anchor, vec(plan.candidates[c])) * inv_temp;
      peak = std::max(peak, probs[c]);
    }
    double total = 0.0;
    for (std::size_t c = begin; c < end; ++c) total += std::exp(probs[c] - peak);
    const double lse = peak + std::log(total);
    loss += weight * (lse - probs[begin]);
    for (std::size_t c = begin; c < end; ++c) probs[c] = std::exp(probs[c] - lse);
  }

  return Tensor::from_op(
      "contrast", {}, {loss}, sources,
      [sources, plan = std::move(plan), probs = std::move(probs), width, inv_temp,
       weight](const detail::Node& self) {
        std::vector<const double*> rows;
        std::vector<std::span<double>> sinks;
        for (const Tensor& s : sources) {
          rows.push_back(s.data().data());
          sinks.push_back(s.grad_sink());
        }
        const double g = self.grad[0] * weight * inv_temp;
        std::vector<double> ga(width);
        for (std::size_t a = 0; a < plan.anchors.size(); ++a) {
          const RowRef anchor_ref = plan.anchors[a];
          const double* anchor = rows[anchor_ref.source] + std::size_t{anchor_ref.row} * width;
          std::fill(ga.begin(), ga.end(), 0.0);
          for (std::size_t c = plan.offsets[a]; c < plan.offsets[a + 1]; ++c) {
            const RowRef ref = plan.candidates[c];
            const double coeff = probs[c] - (c == plan.offsets[a] ? 1.0 : 0.0);
            const double* z = rows[ref.source] + std::size_t{ref.row} * width;
            for (std::size_t k = 0; k < width; ++k) ga[k] += coeff * z[k];
            auto& sink = sinks[ref.source];
            if (!sink.empty()) {
              double* gz = sink.data() + std::size_t{ref.row} * width;
              for (std::size_t k = 0; k < width; ++k) gz[k] += g * coeff * anchor[k];
            }
          }
          auto& sink = sinks[anchor_ref.source];
          if (!sink.empty()) {
            double* out = sink.data() + std::size_t{anchor_ref.row} * width;
            for (std::size_t k = 0; k < width; ++k) out[k] += g * ga[k];
          }
        }
      });
}

void check_temperature(const DualConOptions& options) {
  if (!(options.temperature > 0.0)) throw ConfigError("dualcon: temperature must be > 0");
}

UniversumDraw make_draw(const AlignedReprPair& pair, std::vector<double> lambda,
                        std::vector<std::size_t> partner) {
  UniversumDraw draw;
  draw.u = mix_rows(pair.r, lambda, partner);
  draw.u_prime = mix_rows(pair.r_prime, lambda, partner);
  draw.lambda = std::move(lambda);
  draw.partner = std::move(partner);
  return draw;
}

}  // namespace

void AlignedReprPair::validate() const {
  if (r.rank() != 3) throw ShapeError("dualcon: representations must be [B,L,K], got " + shape_str(r.shape()));
  if (r.shape() != r_prime.shape()) {
    throw ShapeError("dualcon: view shapes differ: " + shape_str(r.shape()) + " vs " +
                     shape_str(r_prime.shape()));
  }
  if (r.dim(0) < 1 || r.dim(1) < 1 || r.dim(2) < 1) {
    throw ShapeError("dualcon: empty representations " + shape_str(r.shape()));
  }
}

std::vector<UniversumDraw> synth_temporal_universum(const AlignedReprPair& pair, Rng& rng,
                                                    std::size_t density) {
  pair.validate();
  const std::size_t batch = pair.batch();
  const std::size_t length = pair.length();
  std::vector<UniversumDraw> draws;
  if (length < 2) return draws;
  for (std::size_t d = 0; d < density; ++d) {
    std::vector<double> lambda(batch * length);
    std::vector<std::size_t> partner(batch * length);
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t t = 0; t < length; ++t) {
        lambda[i * length + t] = rng.uniform_open_closed(0.5);
        std::size_t other = rng.below(length - 1);
        if (other >= t) ++other;
        partner[i * length + t] = i * length + other;
      }
    }
    draws.push_back(make_draw(pair, std::move(lambda), std::move(partner)));
  }
  return draws;
}

std::vector<UniversumDraw> synth_instance_universum(const AlignedReprPair& pair, Rng& rng,
                                                    std::size_t density) {
  pair.validate();
  const std::size_t batch = pair.batch();
  const std::size_t length = pair.length();
  if (batch < 2) throw ShapeError("synth_instance_universum: batch size must be >= 2");
  std::vector<UniversumDraw> draws;
  for (std::size_t d = 0; d < density; ++d) {
    std::vector<double> lambda(batch * length);
    std::vector<std::size_t> partner(batch * length);
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t t = 0; t < length; ++t) {
        lambda[i * length + t] = rng.uniform_open_closed(0.5);
        std::size_t other = rng.below(batch - 1);
        if (other >= i) ++other;
        partner[i * length + t] = other * length + t;
      }
    }
    draws.push_back(make_draw(pair, std::move(lambda), std::move(partner)));
  }
  return draws;
}

Tensor temporal_loss(const AlignedReprPair& pair, std::span<const UniversumDraw> universums,
                     const DualConOptions& options) {
  pair.validate();
  check_temperature(options);
  const std::size_t batch = pair.batch();
  const std::size_t length = pair.length();
  auto row = [length](std::size_t i, std::size_t t) { return static_cast<std::uint32_t>(i * length + t); };

  ContrastPlan plan;
  for (std::uint32_t view : {kR, kRPrime}) {
    const std::uint32_t other = view == kR ? kRPrime : kR;
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t t = 0; t < length; ++t) {
        plan.anchors.push_back({view, row(i, t)});
        plan.candidates.push_back({other, row(i, t)});
        for (std::size_t s = 0; s < length; ++s) {
          if (s == t) continue;
          plan.candidates.push_back({view, row(i, s)});
          plan.candidates.push_back({other, row(i, s)});
        }
        for (std::size_t d = 0; d < universums.size(); ++d) {
          for (std::size_t s = 0; s < length; ++s) {
            if (s == t && !options.temporal_self_universum) continue;
            plan.candidates.push_back({universum_source(d, false), row(i, s)});
            plan.candidates.push_back({universum_source(d, true), row(i, s)});
          }
        }
        plan.close_anchor();
      }
    }
  }
  return contrast(plan_sources(pair, universums), std::move(plan), pair.width(),
                  options.temperature);
}

Tensor instance_loss(const AlignedReprPair& pair, std::span<const UniversumDraw> universums,
                     const DualConOptions& options) {
  pair.validate();
  check_temperature(options);
  const std::size_t batch = pair.batch();
  const std::size_t length = pair.length();
  if (batch < 2) throw ShapeError("instance_loss: batch size must be >= 2");
  auto row = [length](std::size_t i, std::size_t t) { return static_cast<std::uint32_t>(i * length + t); };

  ContrastPlan plan;
  for (std::uint32_t view : {kR, kRPrime}) {
    const std::uint32_t other = view == kR ? kRPrime : kR;
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t t = 0; t < length; ++t) {
        plan.anchors.push_back({view, row(i, t)});
        plan.candidates.push_back({other, row(i, t)});
        for (std::size_t j = 0; j < batch; ++j) {
          if (j == i) continue;
          plan.candidates.push_back({view, row(j, t)});
          plan.candidates.push_back({other, row(j, t)});
        }
        for (std::size_t d = 0; d < universums.size(); ++d) {
          for (std::size_t j = 0; j < batch; ++j) {
            if (j == i && !options.instance_self_universum) continue;
            plan.candidates.push_back({universum_source(d, false), row(j, t)});
            plan.candidates.push_back({universum_source(d, true), row(j, t)});
          }
        }
        plan.close_anchor();
      }
    }
  }
  return contrast(plan_sources(pair, universums), std::move(plan), pair.width(),
                  options.temperature);
}

std::vector<std::size_t> pooling_schedule(std::size_t length) {
  std::vector<std::size_t> out;
  if (length == 0) return out;
  while (true) {
    out.push_back(length);
    if (length == 1) break;
    length = (length + 1) / 2;
  }
  return out;
}

LossBreakdown hierarchical_dual_loss(const AlignedReprPair& pair, Rng& rng,
                                     const DualConOptions& options) {
  pair.validate();
  check_temperature(options);
  LossBreakdown out;
  AlignedReprPair level = pair;
  Tensor total;
  while (true) {
    LevelLoss stats;
    stats.length = level.length();

    Tensor level_loss;
    if (level.length() >= 2) {
      const auto temporal_u = options.universum_density > 0
                                  ? synth_temporal_universum(level, rng, options.universum_density)
                                  : std::vector<UniversumDraw>{};
      level_loss = temporal_loss(level, temporal_u, options);
      stats.temporal = level_loss.item();
    } else {
      stats.temporal_skipped = true;
    }
    const auto instance_u = options.universum_density > 0
                                ? synth_instance_universum(level, rng, options.universum_density)
                                : std::vector<UniversumDraw>{};
    Tensor inst = instance_loss(level, instance_u, options);
    stats.instance = inst.item();
    level_loss = level_loss.defined() ? level_loss + inst : inst;

    total = total.defined() ? total + level_loss : level_loss;
    out.temporal_mean += stats.temporal;
    out.instance_mean += stats.instance;
    out.levels.push_back(stats);

    if (level.length() == 1) break;
    level.r = maxpool1d_time(level.r, 2);
    level.r_prime = maxpool1d_time(level.r_prime, 2);
  }
  const double count = static_cast<double>(out.levels.size());
  out.dual = scale(total, 1.0 / count);
  out.temporal_mean /= count;
  out.instance_mean /= count;
  return out;
}

void accumulate_hardness(const AlignedReprPair& pair, Rng& rng, HardnessStats& stats) {
  pair.validate();
  const std::size_t batch = pair.batch();
  const std::size_t length = pair.length();
  const std::size_t width = pair.width();
  auto r = pair.r.data();
  auto rp = pair.r_prime.data();
  auto dot = [width](const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t k = 0; k < width; ++k) s += a[k] * b[k];
    return s;
  };
  std::vector<UniversumDraw> draws = synth_temporal_universum(pair, rng);
  if (batch >= 2) {
    auto inst = synth_instance_universum(pair, rng);
    draws.insert(draws.end(), inst.begin(), inst.end());
  }

  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t t = 0; t < length; ++t) {
      const std::size_t row = i * length + t;
      const double* anchor = r.data() + row * width;
      for (const auto& draw : draws) {
        stats.universum_sum += dot(anchor, draw.u.data().data() + row * width);
        stats.universum_sum += dot(anchor, draw.u_prime.data().data() + row * width);
        stats.universum_count += 2;
      }
      for (std::size_t s = 0; s < length; ++s) {
        if (s == t) continue;
        stats.negative_sum += dot(anchor, r.data() + (i * length + s) * width);
        stats.negative_sum += dot(anchor, rp.data() + (i * length + s) * width);
        stats.negative_count += 2;
      }
      for (std::size_t j = 0; j < batch; ++j) {
        if (j == i) continue;
        stats.negative_sum += dot(anchor, r.data() + (j * length + t) * width);
        stats.negative_sum += dot(anchor, rp.data() + (j * length + t) * width);
        stats.negative_count += 2;
      }
    }
  }
}

}  // namespace tsrl
