#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tsrl/tensor.hpp"

namespace tsrl {

// Elementwise and reductions. Binary ops require identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor gelu(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator*(double factor, const Tensor& a) { return scale(a, factor); }

/// x[..., in] @ weight[in, out] (+ bias[out]) applied along the last axis.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor());

/// Adds bias[C] to every row of x[..., C].
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// Causal dilated convolution over time. input [B,T,Cin], weights
/// [Cout,Cin,k]; tap j of the kernel reads input at t - (k-1-j)*dilation,
/// with zeros before the series start. Output [B,T,Cout].
Tensor dilated_causal_conv1d(const Tensor& input, const Tensor& weights,
                             std::size_t dilation);

/// Max over non-overlapping time windows of `kernel` steps; the final window
/// may be shorter. [B,T,K] -> [B,ceil(T/kernel),K]. Gradient goes to the
/// first maximal position of each window.
Tensor maxpool1d_time(const Tensor& input, std::size_t kernel);

/// Rows [start, start+length) of the time axis of x[B,T,C].
Tensor slice_time(const Tensor& x, std::size_t start, std::size_t length);

/// Zeroes x[b,t,:] wherever hidden[b*T + t] is set. x is [B,T,C].
Tensor mask_timesteps(const Tensor& x, const std::vector<bool>& hidden);

/// Treats x as rows of its last axis. Row r of the output is
/// coeff[r]*x[r] + (1-coeff[r])*x[partner[r]].
Tensor mix_rows(const Tensor& x, std::span<const double> coeff,
                std::span<const std::size_t> partner);

}  // namespace tsrl
