#include "tsrl/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "tsrl/error.hpp"
#include "tsrl/ops.hpp"
#include "tsrl/rng.hpp"

namespace tsrl {
namespace {

std::string block_name(std::size_t d, const char* part) {
  return "block" + std::to_string(d) + "." + part;
}

std::size_t block_out(const EncoderConfig& c, std::size_t d) {
  return d + 1 == c.depth ? c.repr_dims : c.hidden_dims;
}

}  // namespace

void EncoderConfig::validate() const {
  if (input_dims < 1) throw ConfigError("encoder: input_dims must be >= 1");
  if (repr_dims < 1) throw ConfigError("encoder: repr_dims must be >= 1");
  if (hidden_dims < 1) throw ConfigError("encoder: hidden_dims must be >= 1");
  if (depth < 1) throw ConfigError("encoder: depth must be >= 1");
  if (kernel_size < 1) throw ConfigError("encoder: kernel_size must be >= 1");
  if (depth > 30) throw ConfigError("encoder: depth must be <= 30");
}

std::size_t EncoderConfig::receptive_field() const {
  std::size_t field = 1;
  for (std::size_t d = 0; d < depth; ++d) field += 2 * (kernel_size - 1) * (std::size_t{1} << d);
  return field;
}

std::vector<std::pair<std::string, Shape>> EncoderState::layout(const EncoderConfig& c) {
  std::vector<std::pair<std::string, Shape>> out;
  const std::size_t h = c.hidden_dims;
  out.emplace_back("input.weight", Shape{c.input_dims, h});
  out.emplace_back("input.bias", Shape{h});
  for (std::size_t d = 0; d < c.depth; ++d) {
    const std::size_t cout = block_out(c, d);
    out.emplace_back(block_name(d, "conv1.weight"), Shape{cout, h, c.kernel_size});
    out.emplace_back(block_name(d, "conv1.bias"), Shape{cout});
    out.emplace_back(block_name(d, "conv2.weight"), Shape{cout, cout, c.kernel_size});
    out.emplace_back(block_name(d, "conv2.bias"), Shape{cout});
    if (cout != h) {
      out.emplace_back(block_name(d, "shortcut.weight"), Shape{h, cout});
      out.emplace_back(block_name(d, "shortcut.bias"), Shape{cout});
    }
  }
  out.emplace_back("output.weight", Shape{c.repr_dims, c.repr_dims});
  out.emplace_back("output.bias", Shape{c.repr_dims});
  return out;
}

EncoderState EncoderState::init(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  EncoderState state;
  state.config_ = config;
  const auto shapes = layout(config);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& [name, shape] = shapes[i];
    // Biases share the fan-in of the weight they follow.
    const Shape& weight_shape = shape.size() == 1 ? shapes[i - 1].second : shape;
    std::size_t fan_in = weight_shape[0];
    if (weight_shape.size() == 3) fan_in = weight_shape[1] * weight_shape[2];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = bound * (2.0 * rng.uniform() - 1.0);
    state.params_.emplace_back(name, Tensor(shape, std::move(values), true));
  }
  return state;
}

EncoderState EncoderState::from_tensors(const EncoderConfig& config,
                                        std::vector<std::pair<std::string, Tensor>> tensors) {
  config.validate();
  const auto shapes = layout(config);
  if (tensors.size() != shapes.size()) {
    throw FormatError("encoder: expected " + std::to_string(shapes.size()) + " tensors, got " +
                      std::to_string(tensors.size()));
  }
  EncoderState state;
  state.config_ = config;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (tensors[i].first != shapes[i].first || tensors[i].second.shape() != shapes[i].second) {
      throw FormatError("encoder: tensor " + std::to_string(i) + " is '" + tensors[i].first +
                        "' " + shape_str(tensors[i].second.shape()) + ", expected '" +
                        shapes[i].first + "' " + shape_str(shapes[i].second));
    }
    Tensor leaf = tensors[i].second.detach();
    leaf.set_requires_grad(true);
    state.params_.emplace_back(shapes[i].first, std::move(leaf));
  }
  return state;
}

std::vector<Tensor> EncoderState::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

const Tensor& EncoderState::get(const std::string& name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw Error("encoder: no parameter named '" + name + "'");
}

Tensor& EncoderState::get(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

bool EncoderState::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const auto& p) { return p.first == name; });
}

EncoderState EncoderState::clone() const {
  EncoderState copy;
  copy.config_ = config_;
  for (const auto& [name, t] : params_) {
    Tensor leaf = t.detach();
    leaf.set_requires_grad(true);
    copy.params_.emplace_back(name, std::move(leaf));
  }
  return copy;
}

EncoderInput pack_batch(std::span<const TimeSeriesInstance> instances) {
  if (instances.empty()) throw ShapeError("pack_batch: empty batch");
  const std::size_t length = instances.front().length;
  const std::size_t features = instances.front().features;
  std::vector<double> values(instances.size() * length * features);
  std::vector<bool> missing(instances.size() * length, false);
  std::vector<bool> observed(values.size(), true);
  for (std::size_t b = 0; b < instances.size(); ++b) {
    const auto& inst = instances[b];
    if (inst.length != length || inst.features != features) {
      throw ShapeError("pack_batch: instance " + std::to_string(b) + " has shape " +
                       std::to_string(inst.length) + "x" + std::to_string(inst.features) +
                       ", expected " + std::to_string(length) + "x" + std::to_string(features));
    }
    for (std::size_t i = 0; i < length * features; ++i) {
      const bool seen = inst.observed[i];
      values[b * length * features + i] = seen ? inst.values[i] : 0.0;
      observed[b * length * features + i] = seen;
      if (!seen) missing[b * length + i / features] = true;
    }
  }
  return {Tensor({instances.size(), length, features}, std::move(values)), std::move(missing),
          std::move(observed)};
}

Tensor encode(const EncoderState& state, const Tensor& x, const std::vector<bool>* hidden) {
  const EncoderConfig& c = state.config();
  if (x.rank() != 3) throw ShapeError("encode: input must be [B,T,F], got " + shape_str(x.shape()));
  if (x.dim(2) != c.input_dims) {
    throw ShapeError("encode: input feature dimension (dim 2) is " + std::to_string(x.dim(2)) +
                     ", encoder expects " + std::to_string(c.input_dims));
  }
  Tensor h = linear(x, state.get("input.weight"), state.get("input.bias"));
  if (hidden && std::find(hidden->begin(), hidden->end(), true) != hidden->end()) {
    h = mask_timesteps(h, *hidden);
  }
  for (std::size_t d = 0; d < c.depth; ++d) {
    const std::size_t dilation = std::size_t{1} << d;
    Tensor residual = h;
    if (state.contains(block_name(d, "shortcut.weight"))) {
      residual = linear(h, state.get(block_name(d, "shortcut.weight")),
                        state.get(block_name(d, "shortcut.bias")));
    }
    Tensor y = gelu(h);
    y = add_bias(dilated_causal_conv1d(y, state.get(block_name(d, "conv1.weight")), dilation),
                 state.get(block_name(d, "conv1.bias")));
    y = gelu(y);
    y = add_bias(dilated_causal_conv1d(y, state.get(block_name(d, "conv2.weight")), dilation),
                 state.get(block_name(d, "conv2.bias")));
    h = y + residual;
  }
  return linear(h, state.get("output.weight"), state.get("output.bias"));
}

Tensor encode(const EncoderState& state, const EncoderInput& input,
              const std::vector<bool>* hidden) {
  std::vector<bool> combined = input.missing;
  if (hidden) {
    if (hidden->size() != combined.size()) {
      throw ShapeError("encode: mask has " + std::to_string(hidden->size()) +
                       " entries, expected B*T = " + std::to_string(combined.size()));
    }
    for (std::size_t i = 0; i < combined.size(); ++i) combined[i] = combined[i] || (*hidden)[i];
  }
  return encode(state, input.values, &combined);
}

}  // namespace tsrl
