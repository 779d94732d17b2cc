#pragma once

// Forward-pass primitives over Tensor. Deterministic, float32 storage,
// float64 accumulation in reductions where noted. MAC counting follows
// the convention in tensor.hpp.

#include "fc/tensor.hpp"

#include <utility>

namespace fc::ops {

// C[M x N] = A[M x K] * B[K x N]; counter += M*K*N.
Tensor matmul(const Tensor& a, const Tensor& b, MacCounter& counter,
              const std::string& tag = "matmul");

// x[T x in] * w[in x out] + bias[out]; counter += T*in*out.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias, MacCounter& counter,
              const std::string& tag = "linear");

// Numerically stable softmax along the last axis.
Tensor softmax(const Tensor& x);

// Per-slice normalization along the last axis, then affine by gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

struct Conv2dSpec {
    std::size_t stride_h = 1, stride_w = 1;
    std::size_t pad_h = 0, pad_w = 0;
};

// Output spatial extent: floor((in + 2*pad - k) / stride) + 1. Throws if < 1.
std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);

// x[Cin x H x W], w[Cout x Cin x kH x kW], bias[Cout] -> [Cout x H' x W'].
// Cross-correlation (no kernel flip); counter += Cout*Cin*kH*kW*H'*W'.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv2dSpec& spec,
              MacCounter& counter, const std::string& tag = "conv2d");

// x[C x H x W], w[C x kH x kW], bias[C] -> [C x H' x W']. One kernel per
// channel, no cross-channel mixing; counter += C*kH*kW*H'*W'.
Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
                        const Conv2dSpec& spec, MacCounter& counter,
                        const std::string& tag = "depthwise");

// x[C x L], w[C x k] 1-D depthwise along L; counter += C*k*L'.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
                        std::size_t pad, MacCounter& counter,
                        const std::string& tag = "depthwise");

float sigmoid(float v);
Tensor silu(const Tensor& x);
Tensor relu(const Tensor& x);

// Split the last axis in half: first * sigmoid(second). Odd extent rejected.
Tensor glu(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);

Tensor transpose2d(const Tensor& x);

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);

}  // namespace fc::ops
