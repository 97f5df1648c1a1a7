#include "tsrl/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "tsrl/error.hpp"

namespace tsrl {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(const char* op, const char* name, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + name + " must have rank " + std::to_string(rank) +
                     ", got shape " + shape_str(t.shape()));
  }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return Tensor::from_op("add", a.shape(), std::move(out), {a, b},
                         [a, b](const detail::Node& self) {
                           for (const Tensor& in : {a, b}) {
                             auto g = in.grad_sink();
                             for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                           }
                         });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  return Tensor::from_op("mul", a.shape(), std::move(out), {a, b},
                         [a, b](const detail::Node& self) {
                           auto ga = a.grad_sink();
                           auto db = b.data();
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * db[i];
                           auto gb = b.grad_sink();
                           auto da = a.data();
                           for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * da[i];
                         });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= factor;
  return Tensor::from_op("scale", a.shape(), std::move(out), {a},
                         [a, factor](const detail::Node& self) {
                           auto g = a.grad_sink();
                           for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
                         });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return Tensor::from_op("sum", {}, {total}, {a}, [a](const detail::Node& self) {
    auto g = a.grad_sink();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_same_shape("dot", a, b);
  double total = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) total += da[i] * db[i];
  return Tensor::from_op("dot", {}, {total}, {a, b}, [a, b](const detail::Node& self) {
    const double g0 = self.grad[0];
    auto ga = a.grad_sink();
    auto db = b.data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g0 * db[i];
    auto gb = b.grad_sink();
    auto da = a.data();
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g0 * da[i];
  });
}

// Exact (erf) GELU.
Tensor gelu(const Tensor& a) {
  auto da = a.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < da.size(); ++i) {
    out[i] = 0.5 * da[i] * (1.0 + std::erf(da[i] * kInvSqrt2));
  }
  return Tensor::from_op("gelu", a.shape(), std::move(out), {a}, [a](const detail::Node& self) {
    auto g = a.grad_sink();
    auto x = a.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
      g[i] += self.grad[i] * (cdf + x[i] * pdf);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", "weight", weight, 2);
  if (x.rank() < 1 || x.shape().back() != weight.dim(0)) {
    throw ShapeError("linear: input last dimension " +
                     (x.rank() ? std::to_string(x.shape().back()) : std::string("<none>")) +
                     " does not match weight rows " + std::to_string(weight.dim(0)));
  }
  const std::size_t in = weight.dim(0);
  const std::size_t out_dim = weight.dim(1);
  const std::size_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;

  std::vector<double> out(rows * out_dim);
  MapMat(out.data(), rows, out_dim).noalias() =
      ConstMapMat(x.data().data(), rows, in) * ConstMapMat(weight.data().data(), in, out_dim);
  Tensor result = Tensor::from_op(
      "linear", out_shape, std::move(out), {x, weight},
      [x, weight, rows, in, out_dim](const detail::Node& self) {
        ConstMapMat gout(self.grad.data(), rows, out_dim);
        if (auto gx = x.grad_sink(); !gx.empty()) {
          MapMat(gx.data(), rows, in).noalias() +=
              gout * ConstMapMat(weight.data().data(), in, out_dim).transpose();
        }
        if (auto gw = weight.grad_sink(); !gw.empty()) {
          MapMat(gw.data(), in, out_dim).noalias() +=
              ConstMapMat(x.data().data(), rows, in).transpose() * gout;
        }
      });
  return bias.defined() ? add_bias(result, bias) : result;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank("add_bias", "bias", bias, 1);
  if (x.rank() < 1 || x.shape().back() != bias.dim(0)) {
    throw ShapeError("add_bias: channel dimension of " + shape_str(x.shape()) +
                     " does not match bias " + shape_str(bias.shape()));
  }
  const std::size_t channels = bias.dim(0);
  std::vector<double> out(x.data().begin(), x.data().end());
  auto db = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += db[i % channels];
  return Tensor::from_op("add_bias", x.shape(), std::move(out), {x, bias},
                         [x, bias, channels](const detail::Node& self) {
                           auto gx = x.grad_sink();
                           for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
                           auto gb = bias.grad_sink();
                           if (!gb.empty()) {
                             for (std::size_t i = 0; i < self.grad.size(); ++i) {
                               gb[i % channels] += self.grad[i];
                             }
                           }
                         });
}

Tensor dilated_causal_conv1d(const Tensor& input, const Tensor& weights, std::size_t dilation) {
  require_rank("dilated_causal_conv1d", "input", input, 3);
  require_rank("dilated_causal_conv1d", "weights", weights, 3);
  if (dilation < 1) throw ShapeError("dilated_causal_conv1d: dilation must be >= 1");
  const std::size_t batch = input.dim(0);
  const std::size_t steps = input.dim(1);
  const std::size_t cin = input.dim(2);
  const std::size_t cout = weights.dim(0);
  const std::size_t k = weights.dim(2);
  if (weights.dim(1) != cin) {
    throw ShapeError("dilated_causal_conv1d: input channels (dim 2 of input) = " +
                     std::to_string(cin) + " but weights dim 1 = " +
                     std::to_string(weights.dim(1)));
  }
  if (k < 1) throw ShapeError("dilated_causal_conv1d: kernel size (dim 2 of weights) must be >= 1");

  // Per-tap [Cin, Cout] matrices so each tap is one GEMM per batch item.
  auto pack = [cin, cout, k](std::span<const double> w) {
    std::vector<double> packed(k * cin * cout);
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t j = 0; j < k; ++j)
          packed[(j * cin + ci) * cout + co] = w[(co * cin + ci) * k + j];
    return packed;
  };
  const std::vector<double> taps = pack(weights.data());

  std::vector<double> out(batch * steps * cout, 0.0);
  const double* in_ptr = input.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    MapMat out_b(out.data() + b * steps * cout, steps, cout);
    ConstMapMat in_b(in_ptr + b * steps * cin, steps, cin);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t shift = (k - 1 - j) * dilation;
      if (shift >= steps) continue;
      const std::size_t n = steps - shift;
      out_b.bottomRows(n).noalias() +=
          in_b.topRows(n) * ConstMapMat(taps.data() + j * cin * cout, cin, cout);
    }
  }

  return Tensor::from_op(
      "dilated_causal_conv1d", {batch, steps, cout}, std::move(out), {input, weights},
      [input, weights, taps, batch, steps, cin, cout, k, dilation](const detail::Node& self) {
        auto gin = input.grad_sink();
        auto gw = weights.grad_sink();
        std::vector<double> gtaps(gw.empty() ? 0 : k * cin * cout, 0.0);
        const double* in_ptr = input.data().data();
        for (std::size_t b = 0; b < batch; ++b) {
          ConstMapMat gout_b(self.grad.data() + b * steps * cout, steps, cout);
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t shift = (k - 1 - j) * dilation;
            if (shift >= steps) continue;
            const std::size_t n = steps - shift;
            ConstMapMat tap(taps.data() + j * cin * cout, cin, cout);
            if (!gin.empty()) {
              MapMat(gin.data() + b * steps * cin, steps, cin).topRows(n).noalias() +=
                  gout_b.bottomRows(n) * tap.transpose();
            }
            if (!gtaps.empty()) {
              MapMat(gtaps.data() + j * cin * cout, cin, cout).noalias() +=
                  ConstMapMat(in_ptr + b * steps * cin, steps, cin).topRows(n).transpose() *
                  gout_b.bottomRows(n);
            }
          }
        }
        if (!gw.empty()) {
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t j = 0; j < k; ++j)
                gw[(co * cin + ci) * k + j] += gtaps[(j * cin + ci) * cout + co];
        }
      });
}

Tensor maxpool1d_time(const Tensor& input, std::size_t kernel) {
  require_rank("maxpool1d_time", "input", input, 3);
  if (kernel < 1) throw ShapeError("maxpool1d_time: kernel must be >= 1");
  const std::size_t batch = input.dim(0);
  const std::size_t steps = input.dim(1);
  const std::size_t channels = input.dim(2);
  if (steps < 1) throw ShapeError("maxpool1d_time: time axis is empty");
  const std::size_t out_steps = (steps + kernel - 1) / kernel;

  auto x = input.data();
  std::vector<double> out(batch * out_steps * channels);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out_steps; ++o) {
      const std::size_t begin = o * kernel;
      const std::size_t end = std::min(begin + kernel, steps);
      for (std::size_t c = 0; c < channels; ++c) {
        std::size_t best = (b * steps + begin) * channels + c;
        for (std::size_t t = begin + 1; t < end; ++t) {
          const std::size_t idx = (b * steps + t) * channels + c;
          if (x[idx] > x[best]) best = idx;
        }
        const std::size_t oi = (b * out_steps + o) * channels + c;
        out[oi] = x[best];
        argmax[oi] = best;
      }
    }
  }
  return Tensor::from_op("maxpool1d_time", {batch, out_steps, channels}, std::move(out), {input},
                         [input, argmax = std::move(argmax)](const detail::Node& self) {
                           auto g = input.grad_sink();
                           for (std::size_t i = 0; i < argmax.size(); ++i) {
                             g[argmax[i]] += self.grad[i];
                           }
                         });
}

Tensor slice_time(const Tensor& x, std::size_t start, std::size_t length) {
  require_rank("slice_time", "input", x, 3);
  const std::size_t batch = x.dim(0);
  const std::size_t steps = x.dim(1);
  const std::size_t channels = x.dim(2);
  if (start + length > steps) {
    throw ShapeError("slice_time: window [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") exceeds time dimension " +
                     std::to_string(steps));
  }
  auto src = x.data();
  std::vector<double> out(batch * length * channels);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto first = src.begin() + static_cast<std::ptrdiff_t>((b * steps + start) * channels);
    std::copy(first, first + static_cast<std::ptrdiff_t>(length * channels),
              out.begin() + static_cast<std::ptrdiff_t>(b * length * channels));
  }
  return Tensor::from_op("slice_time", {batch, length, channels}, std::move(out), {x},
                         [x, batch, steps, channels, start, length](const detail::Node& self) {
                           auto g = x.grad_sink();
                           for (std::size_t b = 0; b < batch; ++b) {
                             for (std::size_t i = 0; i < length * channels; ++i) {
                               g[(b * steps + start) * channels + i] +=
                                   self.grad[b * length * channels + i];
                             }
                           }
                         });
}

Tensor mask_timesteps(const Tensor& x, const std::vector<bool>& hidden) {
  require_rank("mask_timesteps", "input", x, 3);
  const std::size_t rows = x.dim(0) * x.dim(1);
  const std::size_t channels = x.dim(2);
  if (hidden.size() != rows) {
    throw ShapeError("mask_timesteps: mask has " + std::to_string(hidden.size()) +
                     " entries, expected B*T = " + std::to_string(rows));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t r = 0; r < rows; ++r) {
    if (hidden[r]) std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(r * channels), channels, 0.0);
  }
  std::vector<bool> keep_hidden = hidden;
  return Tensor::from_op("mask_timesteps", x.shape(), std::move(out), {x},
                         [x, channels, keep_hidden = std::move(keep_hidden)](const detail::Node& self) {
                           auto g = x.grad_sink();
                           for (std::size_t r = 0; r < keep_hidden.size(); ++r) {
                             if (keep_hidden[r]) continue;
                             for (std::size_t c = 0; c < channels; ++c) {
                               g[r * channels + c] += self.grad[r * channels + c];
                             }
                           }
                         });
}

Tensor mix_rows(const Tensor& x, std::span<const double> coeff,
                std::span<const std::size_t> partner) {
  if (x.rank() < 1) throw ShapeError("mix_rows: input must have at least one axis");
  const std::size_t width = x.shape().back();
  const std::size_t rows = width ? x.numel() / width : 0;
  if (coeff.size() != rows || partner.size() != rows) {
    throw ShapeError("mix_rows: expected " + std::to_string(rows) +
                     " coefficients and partners, got " + std::to_string(coeff.size()) + " and " +
                     std::to_string(partner.size()));
  }
  auto src = x.data();
  std::vector<double> out(src.size());
  for (std::size_t r = 0; r < rows; ++r) {
    if (partner[r] >= rows) throw ShapeError("mix_rows: partner index out of range");
    const double lam = coeff[r];
    const double rest = 1.0 - lam;
    for (std::size_t c = 0; c < width; ++c) {
      out[r * width + c] = lam * src[r * width + c] + rest * src[partner[r] * width + c];
    }
  }
  std::vector<double> lam_copy(coeff.begin(), coeff.end());
  std::vector<std::size_t> partner_copy(partner.begin(), partner.end());
  return Tensor::from_op(
      "mix_rows", x.shape(), std::move(out), {x},
      [x, width, lam_copy = std::move(lam_copy),
       partner_copy = std::move(partner_copy)](const detail::Node& self) {
        auto g = x.grad_sink();
        for (std::size_t r = 0; r < lam_copy.size(); ++r) {
          const double lam = lam_copy[r];
          const double rest = 1.0 - lam;
          for (std::size_t c = 0; c < width; ++c) {
            const double go = self.grad[r * width + c];
            g[r * width + c] += lam * go;
            g[partner_copy[r] * width + c] += rest * go;
          }
        }
      });
}

}  // namespace tsrl
