#include "tsrl/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "tsrl/encoder.hpp"
#include "tsrl/error.hpp"
#include "tsrl/ftaug.hpp"
#include "tsrl/ops.hpp"
#include "tsrl/recon.hpp"
#include "tsrl/train.hpp"

namespace tsrl {

namespace {

using Vec = std::vector<double>;

Vec row_of(const Tensor& x, std::size_t row, std::size_t width) {
  auto d = x.data();
  return Vec(d.begin() + static_cast<std::ptrdiff_t>(row * width),
             d.begin() + static_cast<std::ptrdiff_t>((row + 1) * width));
}

double dot_vec(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

Vec mix_vec(double lambda, const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = lambda * a[k] + (1.0 - lambda) * b[k];
  return out;
}

// -log(exp(pos) / (exp(pos) + sum exp(neg))), written out literally.
double nll(const Vec& anchor, const Vec& positive, const std::vector<Vec>& negatives,
           double temperature) {
  const double pos = std::exp(dot_vec(anchor, positive) / temperature);
  double denom = pos;
  for (const Vec& n : negatives) denom += std::exp(dot_vec(anchor, n) / temperature);
  return -std::log(pos / denom);
}

struct Views {
  const Tensor* self;
  const Tensor* other;
  bool prime;
};

// Universum row of draw d, built from the view's own representations.
Vec universum_row(const AlignedReprPair& pair, const UniversumDraw& draw, bool prime,
                  std::size_t row) {
  const Tensor& src = prime ? pair.r_prime : pair.r;
  const std::size_t k = pair.width();
  return mix_vec(draw.lambda[row], row_of(src, row, k), row_of(src, draw.partner[row], k));
}

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true, double sd = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = sd * rng.normal();
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

// Scalar probe of a tensor-valued op: <op(x), w> with fixed random w.
Tensor probe(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return dot(y, random_tensor(y.shape(), rng, false));
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

double brute_temporal_loss(const AlignedReprPair& pair, std::span<const UniversumDraw> universums,
                           const DualConOptions& options) {
  pair.validate();
  const std::size_t b = pair.batch(), l = pair.length(), k = pair.width();
  double total = 0.0;
  std::size_t anchors = 0;
  for (const Views v : {Views{&pair.r, &pair.r_prime, false}, Views{&pair.r_prime, &pair.r, true}}) {
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t t = 0; t < l; ++t) {
        const Vec anchor = row_of(*v.self, i * l + t, k);
        std::vector<Vec> negatives;
        for (std::size_t s = 0; s < l; ++s) {
          if (s == t) continue;
          negatives.push_back(row_of(*v.self, i * l + s, k));
          negatives.push_back(row_of(*v.other, i * l + s, k));
        }
        for (const auto& draw : universums) {
          for (std::size_t s = 0; s < l; ++s) {
            if (s == t && !options.temporal_self_universum) continue;
            negatives.push_back(universum_row(pair, draw, false, i * l + s));
            negatives.push_back(universum_row(pair, draw, true, i * l + s));
          }
        }
        total += nll(anchor, row_of(*v.other, i * l + t, k), negatives, options.temperature);
        ++anchors;
      }
    }
  }
  return total / static_cast<double>(anchors);
}

double brute_instance_loss(const AlignedReprPair& pair, std::span<const UniversumDraw> universums,
                           const DualConOptions& options) {
  pair.validate();
  const std::size_t b = pair.batch(), l = pair.length(), k = pair.width();
  double total = 0.0;
  std::size_t anchors = 0;
  for (const Views v : {Views{&pair.r, &pair.r_prime, false}, Views{&pair.r_prime, &pair.r, true}}) {
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t t = 0; t < l; ++t) {
        const Vec anchor = row_of(*v.self, i * l + t, k);
        std::vector<Vec> negatives;
        for (std::size_t j = 0; j < b; ++j) {
          if (j == i) continue;
          negatives.push_back(row_of(*v.self, j * l + t, k));
          negatives.push_back(row_of(*v.other, j * l + t, k));
        }
        for (const auto& draw : universums) {
          for (std::size_t j = 0; j < b; ++j) {
            if (j == i && !options.instance_self_universum) continue;
            negatives.push_back(universum_row(pair, draw, false, j * l + t));
            negatives.push_back(universum_row(pair, draw, true, j * l + t));
          }
        }
        total += nll(anchor, row_of(*v.other, i * l + t, k), negatives, options.temperature);
        ++anchors;
      }
    }
  }
  return total / static_cast<double>(anchors);
}

std::string check_temporal_draws(const AlignedReprPair& pair,
                                 std::span<const UniversumDraw> draws) {
  const std::size_t l = pair.length();
  for (const auto& d : draws) {
    for (std::size_t row = 0; row < d.lambda.size(); ++row) {
      if (!(d.lambda[row] > 0.0 && d.lambda[row] <= 0.5)) return "lambda outside (0, 0.5]";
      const std::size_t p = d.partner[row];
      if (p / l != row / l) return "temporal partner from another instance";
      if (p == row) return "temporal partner equals the anchor timestamp";
    }
  }
  return {};
}

std::string check_instance_draws(const AlignedReprPair& pair,
                                 std::span<const UniversumDraw> draws) {
  const std::size_t l = pair.length();
  for (const auto& d : draws) {
    for (std::size_t row = 0; row < d.lambda.size(); ++row) {
      if (!(d.lambda[row] > 0.0 && d.lambda[row] <= 0.5)) return "lambda outside (0, 0.5]";
      const std::size_t p = d.partner[row];
      if (p % l != row % l) return "instance partner at another timestamp";
      if (p / l == row / l) return "instance partner is the anchor's own instance";
    }
  }
  return {};
}

GradCheck check_gradients(const std::string& name, const ScalarFn& f, std::vector<Tensor> inputs,
                          const GradCheckOptions& options) {
  GradCheck result;
  result.name = name;
  for (Tensor& in : inputs) {
    if (!in.is_leaf() || !in.requires_grad()) {
      throw Error("check_gradients: inputs must be leaves requiring grad");
    }
    in.zero_grad();
  }
  backward(f(inputs));
  std::vector<Vec> analytic;
  for (const Tensor& in : inputs) {
    analytic.emplace_back(in.numel(), 0.0);
    if (in.has_grad()) std::copy(in.grad().begin(), in.grad().end(), analytic.back().begin());
  }

  NoGradGuard no_grad;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    auto values = inputs[a].mutable_data();
    for (std::size_t e = 0; e < values.size(); ++e) {
      const double saved = values[e];
      values[e] = saved + options.step;
      const double up = f(inputs).item();
      values[e] = saved - options.step;
      const double down = f(inputs).item();
      values[e] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double exact = analytic[a][e];
      const double denom = std::max({std::abs(exact), std::abs(numeric), options.floor});
      const double rel = std::abs(exact - numeric) / denom;
      result.max_rel_error = std::max(result.max_rel_error, rel);
      ++result.checked;
    }
  }
  for (Tensor& in : inputs) in.zero_grad();
  result.passed = result.max_rel_error <= options.rtol;
  return result;
}

SuiteResult dft_roundtrip_suite(std::uint64_t seed, std::size_t max_length, double tolerance) {
  const auto start = Clock::now();
  SuiteResult out;
  out.name = "dft_roundtrip";
  Rng rng(seed);
  for (std::size_t t = 1; t <= max_length; ++t) {
    std::vector<double> x(t);
    for (double& v : x) v = rng.normal();
    const auto back = idft(dft(x));
    double err = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      err = std::max(err, std::abs(back[i] - Complex(x[i], 0.0)));
    }
    out.worst = std::max(out.worst, err);
    ++out.cases;
    if (err > tolerance && out.passed) {
      out.passed = false;
      out.detail = "length " + std::to_string(t) + " error " + std::to_string(err);
    }
  }
  out.seconds = seconds_since(start);
  return out;
}

SuiteResult loss_oracle_suite(std::uint64_t seed, std::size_t cases, double tolerance) {
  const auto start = Clock::now();
  SuiteResult out;
  out.name = "loss_oracle";
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t b = pick(rng, 2, 3), l = pick(rng, 1, 4), k = pick(rng, 1, 3);
    AlignedReprPair pair{random_tensor({b, l, k}, rng, false), random_tensor({b, l, k}, rng, false)};
    DualConOptions opt;
    opt.temperature = 0.25 + rng.uniform() * 1.75;
    opt.universum_density = c % 2 == 0 ? 0 : pick(rng, 1, 2);
    opt.temporal_self_universum = rng.below(2) == 1;
    opt.instance_self_universum = rng.below(2) == 1;

    std::vector<UniversumDraw> tu, iu;
    if (opt.universum_density > 0) {
      tu = synth_temporal_universum(pair, rng, opt.universum_density);
      iu = synth_instance_universum(pair, rng, opt.universum_density);
      std::string bad = check_temporal_draws(pair, tu);
      if (bad.empty()) bad = check_instance_draws(pair, iu);
      if (!bad.empty() && out.passed) {
        out.passed = false;
        out.detail = "case " + std::to_string(c) + ": " + bad;
      }
    }
    double err = std::abs(instance_loss(pair, iu, opt).item() - brute_instance_loss(pair, iu, opt));
    if (l >= 2) {
      err = std::max(err, std::abs(temporal_loss(pair, tu, opt).item() -
                                   brute_temporal_loss(pair, tu, opt)));
    }
    out.worst = std::max(out.worst, err);
    ++out.cases;
    if (err > tolerance && out.passed) {
      out.passed = false;
      std::ostringstream os;
      os << "case " << c << " (B=" << b << ", L=" << l << ", K=" << k << ") error " << err;
      out.detail = os.str();
    }
  }
  out.seconds = seconds_since(start);
  return out;
}

SuiteResult gradient_suite(std::uint64_t seed, std::size_t configs,
                           const GradCheckOptions& options) {
  const auto start = Clock::now();
  SuiteResult out;
  out.name = "gradients";
  Rng rng(seed);
  auto record = [&](const GradCheck& g) {
    out.worst = std::max(out.worst, g.max_rel_error);
    ++out.cases;
    if (!g.passed && out.passed) {
      out.passed = false;
      out.detail = g.name + " relative error " + std::to_string(g.max_rel_error);
    }
  };

  for (std::size_t c = 0; c < configs; ++c) {
    const std::uint64_t ps = rng.next_u64();
    const std::size_t b = pick(rng, 1, 3), t = pick(rng, 1, 6), ci = pick(rng, 1, 3),
                      co = pick(rng, 1, 3);
    const Shape s{b, t, ci};
    const std::string tag = "[" + std::to_string(c) + "]";

    record(check_gradients("add" + tag, [&](const auto& in) { return probe(in[0] + in[1], ps); },
                           {random_tensor(s, rng), random_tensor(s, rng)}, options));
    record(check_gradients("mul" + tag, [&](const auto& in) { return probe(mul(in[0], in[1]), ps); },
                           {random_tensor(s, rng), random_tensor(s, rng)}, options));
    const double factor = rng.normal();
    record(check_gradients("scale" + tag,
                           [&](const auto& in) { return probe(scale(in[0], factor), ps); },
                           {random_tensor(s, rng)}, options));
    record(check_gradients("sum" + tag, [&](const auto& in) { return sum(in[0]); },
                           {random_tensor(s, rng)}, options));
    record(check_gradients("mean" + tag, [&](const auto& in) { return mean(in[0]); },
                           {random_tensor(s, rng)}, options));
    record(check_gradients("dot" + tag, [&](const auto& in) { return dot(in[0], in[1]); },
                           {random_tensor(s, rng), random_tensor(s, rng)}, options));
    record(check_gradients("gelu" + tag, [&](const auto& in) { return probe(gelu(in[0]), ps); },
                           {random_tensor(s, rng, true, 2.0)}, options));
    record(check_gradients(
        "linear" + tag, [&](const auto& in) { return probe(linear(in[0], in[1], in[2]), ps); },
        {random_tensor(s, rng), random_tensor({ci, co}, rng), random_tensor({co}, rng)}, options));
    record(check_gradients("add_bias" + tag,
                           [&](const auto& in) { return probe(add_bias(in[0], in[1]), ps); },
                           {random_tensor(s, rng), random_tensor({ci}, rng)}, options));
    const std::size_t kernel = pick(rng, 1, 3), dilation = pick(rng, 1, 3);
    record(check_gradients(
        "conv" + tag,
        [&](const auto& in) { return probe(dilated_causal_conv1d(in[0], in[1], dilation), ps); },
        {random_tensor(s, rng), random_tensor({co, ci, kernel}, rng)}, options));
    const std::size_t pool = pick(rng, 1, 3);
    record(check_gradients("maxpool" + tag,
                           [&](const auto& in) { return probe(maxpool1d_time(in[0], pool), ps); },
                           {random_tensor(s, rng)}, options));
    const std::size_t first = rng.below(t);
    const std::size_t len = pick(rng, 1, t - first);
    record(check_gradients("slice_time" + tag,
                           [&](const auto& in) { return probe(slice_time(in[0], first, len), ps); },
                           {random_tensor(s, rng)}, options));
    std::vector<bool> hidden(b * t);
    for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] = rng.below(2) == 1;
    record(check_gradients("mask_timesteps" + tag,
                           [&](const auto& in) { return probe(mask_timesteps(in[0], hidden), ps); },
                           {random_tensor(s, rng)}, options));
    std::vector<double> coeff(b * t);
    std::vector<std::size_t> partner(b * t);
    for (std::size_t i = 0; i < coeff.size(); ++i) {
      coeff[i] = rng.uniform_open_closed(0.5);
      partner[i] = rng.below(b * t);
    }
    record(check_gradients("mix_rows" + tag,
                           [&](const auto& in) { return probe(mix_rows(in[0], coeff, partner), ps); },
                           {random_tensor(s, rng)}, options));

    // Contrastive terms, universums included, on fixed draws.
    const std::size_t bb = pick(rng, 2, 3), ll = pick(rng, 2, 4), kk = pick(rng, 1, 3);
    DualConOptions dopt;
    dopt.temperature = 0.5 + rng.uniform();
    const std::uint64_t draw_seed = rng.next_u64();
    record(check_gradients(
        "temporal_loss" + tag,
        [&](const auto& in) {
          AlignedReprPair p{in[0], in[1]};
          Rng r(draw_seed);
          return temporal_loss(p, synth_temporal_universum(p, r), dopt);
        },
        {random_tensor({bb, ll, kk}, rng, true, 0.7), random_tensor({bb, ll, kk}, rng, true, 0.7)},
        options));
    record(check_gradients(
        "instance_loss" + tag,
        [&](const auto& in) {
          AlignedReprPair p{in[0], in[1]};
          Rng r(draw_seed);
          return instance_loss(p, synth_instance_universum(p, r), dopt);
        },
        {random_tensor({bb, ll, kk}, rng, true, 0.7), random_tensor({bb, ll, kk}, rng, true, 0.7)},
        options));
    record(check_gradients(
        "hierarchical_dual_loss" + tag,
        [&](const auto& in) {
          Rng r(draw_seed);
          return hierarchical_dual_loss({in[0], in[1]}, r, dopt).dual;
        },
        {random_tensor({bb, ll, kk}, rng, true, 0.7), random_tensor({bb, ll, kk}, rng, true, 0.7)},
        options));

    const MaskSpec mask = random_mask(b, t, 0.5, rng);
    const std::vector<bool> all_obs(b * t * ci, true);
    const auto cells = recon_cells(mask, ci, ReconOn::kMasked, all_obs);
    const Tensor target = random_tensor(s, rng, false);
    const Tensor target_aug = random_tensor(s, rng, false);
    record(check_gradients(
        "recon_loss" + tag,
        [&](const auto& in) {
          return recon_loss(target, target_aug, in[0], in[1], cells, cells).value;
        },
        {random_tensor(s, rng), random_tensor(s, rng)}, options));

    // Full objective through encoder, decoder and augmentation.
    EncoderConfig ec;
    ec.input_dims = pick(rng, 1, 2);
    ec.hidden_dims = pick(rng, 2, 4);
    ec.repr_dims = pick(rng, 2, 4);
    ec.depth = pick(rng, 1, 2);
    ec.kernel_size = pick(rng, 2, 3);
    const EncoderState enc = EncoderState::init(ec, rng.next_u64());
    const DecoderState dec = DecoderState::init(ec.repr_dims, ec.input_dims, rng.next_u64());
    const std::size_t n = pick(rng, 2, 3), length = pick(rng, 3, 8);
    std::vector<TimeSeriesInstance> batch;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(length * ec.input_dims);
      for (double& x : v) x = rng.normal();
      batch.push_back(TimeSeriesInstance::from_values(length, ec.input_dims, std::move(v)));
    }
    TrainConfig tc;
    tc.alpha = rng.uniform() * 2.0;
    tc.mix_rate = rng.uniform() * 0.5;
    tc.encoder = ec;
    const std::uint64_t objective_seed = rng.next_u64();
    std::vector<Tensor> params = enc.parameters();
    for (const Tensor& p : dec.parameters()) params.push_back(p);
    record(check_gradients(
        "training_objective" + tag,
        [&](const auto&) {
          Rng r(objective_seed);
          return training_objective(enc, dec, batch, tc, r).total;
        },
        params, options));
  }
  out.seconds = seconds_since(start);
  return out;
}

std::vector<SuiteResult> run_selftest(std::uint64_t seed, std::ostream* log,
                                      std::size_t gradient_configs) {
  std::vector<SuiteResult> results;
  results.push_back(dft_roundtrip_suite(Rng::derive(seed, 1).next_u64()));
  results.push_back(loss_oracle_suite(Rng::derive(seed, 2).next_u64()));
  results.push_back(gradient_suite(Rng::derive(seed, 3).next_u64(), gradient_configs));
  if (log) {
    for (const auto& r : results) {
      *log << (r.passed ? "PASS " : "FAIL ") << r.name << " cases=" << r.cases
           << " worst=" << r.worst << " time=" << r.seconds << "s";
      if (!r.detail.empty()) *log << " (" << r.detail << ")";
      *log << '\n';
    }
  }
  return results;
}

}  // namespace tsrl
