// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference forward kernels for every layer kind plus the FC backward pass.
// All kernels are pure: inputs are never modified and results depend only on
// the arguments. Accumulation runs in double and is rounded to float once per
// output element, in a fixed order.

#pragma once

#include <span>
#include <vector>

#include "cnnlab/model.hpp"

namespace cnnlab {

/// Dense single-precision tensor, channel-major then row then column.
struct Tensor {
  TensorShape shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(TensorShape s) : shape(s), data(static_cast<std::size_t>(s.element_count())) {}
  Tensor(TensorShape s, std::vector<float> values);

  static Tensor flat(std::vector<float> values);

  std::size_t size() const { return data.size(); }
  float& at(std::int64_t c, std::int64_t y, std::int64_t x) {
    return data[static_cast<std::size_t>((c * shape.height + y) * shape.width + x)];
  }
  float at(std::int64_t c, std::int64_t y, std::int64_t x) const {
    return data[static_cast<std::size_t>((c * shape.height + y) * shape.width + x)];
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// FC parameters: `matrix` is in_len rows by out_len columns, row-major, so
/// W[j][k] connects input j to output k.
struct FcWeights {
  std::int64_t in_len = 0;
  std::int64_t out_len = 0;
  std::vector<float> matrix;
  std::vector<float> bias;

  float w(std::int64_t j, std::int64_t k) const {
    return matrix[static_cast<std::size_t>(j * out_len + k)];
  }
};

/// Conv parameters: kernel laid out [out][in][kh][kw], one bias per output channel.
struct ConvWeights {
  std::vector<float> kernel;
  std::vector<float> bias;
};

float sigmoid(float x);
float activate(Activation act, float x);

Tensor fc_forward(const Tensor& x, const FcWeights& w, Activation act);
Tensor conv2d_forward(const Tensor& input, const ConvSpec& spec, const ConvWeights& weights);
/// Patch-matrix lowering followed by a single matrix product; same
/// accumulation order as conv2d_forward.
Tensor conv2d_forward_gemm(const Tensor& input, const ConvSpec& spec, const ConvWeights& weights);
Tensor lrn_forward(const Tensor& input, const NormSpec& spec);
Tensor pool_forward(const Tensor& input, const PoolSpec& spec);
Tensor softmax(const Tensor& v);
Tensor dropout_inference(const Tensor& x, double rate);

struct FcGradients {
  Tensor dx;
  std::vector<float> dw;  // same layout as FcWeights::matrix
  Tensor db;
};

/// Gradients of a linear FC layer (pre-activation) for upstream gradient dy.
FcGradients fc_backward(const Tensor& x, const FcWeights& w, const Tensor& dy);

/// Row-major C[m x n] = A[m x k] * B[k x n], double accumulation in k order.
void gemm(std::span<const float> a, std::span<const float> b, std::span<float> c,
          std::int64_t m, std::int64_t k, std::int64_t n, std::span<const float> row_bias = {});

}  // namespace cnnlab
