// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnnlab/kernels.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cnnlab {

namespace {

void require_shape(const Tensor& t, const TensorShape& expected, std::string_view what) {
  if (t.size() != static_cast<std::size_t>(expected.element_count())) {
    throw Error(fmt::format("{}: tensor has {} elements, expected {} ({})", what, t.size(),
                            expected.element_count(), expected.to_string()));
  }
}

}  // namespace

Tensor::Tensor(TensorShape s, std::vector<float> values) : shape(s), data(std::move(values)) {
  if (data.size() != static_cast<std::size_t>(shape.element_count())) {
    throw Error(fmt::format("tensor data length {} != element count {} of {}", data.size(),
                            shape.element_count(), shape.to_string()));
  }
}

Tensor Tensor::flat(std::vector<float> values) {
  const auto n = static_cast<std::int64_t>(values.size());
  return Tensor(flat_shape(n), std::move(values));
}

float sigmoid(float x) {
  // 1 / (1 + e^-x), evaluated on the side that cannot overflow.
  const double v = x;
  if (v >= 0.0) return static_cast<float>(1.0 / (1.0 + std::exp(-v)));
  const double e = std::exp(v);
  return static_cast<float>(e / (1.0 + e));
}

float activate(Activation act, float x) {
  switch (act) {
    case Activation::none: return x;
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0f ? x : 0.0f;
  }
  return x;
}

void gemm(std::span<const float> a, std::span<const float> b, std::span<float> c,
          std::int64_t m, std::int64_t k, std::int64_t n, std::span<const float> row_bias) {
  if (a.size() != static_cast<std::size_t>(m * k) || b.size() != static_cast<std::size_t>(k * n) ||
      c.size() != static_cast<std::size_t>(m * n)) {
    throw Error("gemm: operand sizes do not match dimensions");
  }
  if (!row_bias.empty() && row_bias.size() != static_cast<std::size_t>(m)) {
    throw Error("gemm: bias length does not match row count");
  }
  const auto nn = static_cast<std::size_t>(n);
  constexpr std::int64_t kRows = 4;
  std::vector<double> acc(kRows * nn);
  for (std::int64_t i0 = 0; i0 < m; i0 += kRows) {
    const std::int64_t rows = std::min(kRows, m - i0);
    std::fill(acc.begin(), acc.end(), 0.0);
    // Each B row is streamed once per block of rows; every output element
    // still accumulates in ascending p order.
    for (std::int64_t p = 0; p < k; ++p) {
      const float* brow = b.data() + static_cast<std::size_t>(p * n);
      for (std::int64_t r = 0; r < rows; ++r) {
        const double av = a[static_cast<std::size_t>((i0 + r) * k + p)];
        double* out = acc.data() + static_cast<std::size_t>(r) * nn;
        for (std::size_t j = 0; j < nn; ++j) out[j] += av * static_cast<double>(brow[j]);
      }
    }
    for (std::int64_t r = 0; r < rows; ++r) {
      const double bias = row_bias.empty() ? 0.0 : row_bias[static_cast<std::size_t>(i0 + r)];
      const double* in = acc.data() + static_cast<std::size_t>(r) * nn;
      float* out = c.data() + static_cast<std::size_t>((i0 + r) * n);
      for (std::size_t j = 0; j < nn; ++j) out[j] = static_cast<float>(in[j] + bias);
    }
  }
}

Tensor fc_forward(const Tensor& x, const FcWeights& w, Activation act) {
  if (static_cast<std::int64_t>(x.size()) != w.in_len) {
    throw Error(fmt::format("fc_forward: input length {} != weight rows {}", x.size(), w.in_len));
  }
  if (w.matrix.size() != static_cast<std::size_t>(w.in_len * w.out_len) ||
      w.bias.size() != static_cast<std::size_t>(w.out_len)) {
    throw Error("fc_forward: weight matrix or bias has the wrong size");
  }
  const auto out_len = static_cast<std::size_t>(w.out_len);
  std::vector<double> acc(out_len, 0.0);
  for (std::int64_t j = 0; j < w.in_len; ++j) {
    const double xj = x.data[static_cast<std::size_t>(j)];
    const float* row = w.matrix.data() + static_cast<std::size_t>(j) * out_len;
    for (std::size_t k = 0; k < out_len; ++k) acc[k] += static_cast<double>(row[k]) * xj;
  }
  Tensor y(flat_shape(w.out_len));
  for (std::size_t k = 0; k < out_len; ++k) {
    y.data[k] = activate(act, static_cast<float>(acc[k] + static_cast<double>(w.bias[k])));
  }
  return y;
}

namespace {

void check_conv_operands(const Tensor& input, const ConvSpec& spec, const ConvWeights& weights) {
  require_shape(input, spec.input, "conv2d");
  if (weights.kernel.size() != static_cast<std::size_t>(spec.kernel.element_count())) {
    throw Error(fmt::format("conv2d: kernel has {} values, expected {}", weights.kernel.size(),
                            spec.kernel.element_count()));
  }
  if (weights.bias.size() != static_cast<std::size_t>(spec.kernel.out_channels)) {
    throw Error(fmt::format("conv2d: bias has {} values, expected {}", weights.bias.size(),
                            spec.kernel.out_channels));
  }
  if (spec.kernel.in_channels != spec.input.channels ||
      spec.kernel.out_channels != spec.output.channels) {
    throw Error("conv2d: kernel channels do not match input/output channels");
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvSpec& spec, const ConvWeights& weights) {
  check_conv_operands(input, spec, weights);
  const auto& k = spec.kernel;
  const TensorShape& in = spec.input;
  Tensor out(spec.output);
  for (std::int64_t o = 0; o < k.out_channels; ++o) {
    for (std::int64_t y = 0; y < spec.output.height; ++y) {
      for (std::int64_t x = 0; x < spec.output.width; ++x) {
        double acc = 0.0;
        for (std::int64_t c = 0; c < k.in_channels; ++c) {
          for (std::int64_t i = 0; i < k.height; ++i) {
            const std::int64_t iy = y * spec.stride + i - spec.pad.top;
            if (iy < 0 || iy >= in.height) continue;
            for (std::int64_t j = 0; j < k.width; ++j) {
              const std::int64_t ix = x * spec.stride + j - spec.pad.left;
              if (ix < 0 || ix >= in.width) continue;
              const float kv =
                  weights.kernel[static_cast<std::size_t>(((o * k.in_channels + c) * k.height + i) *
                                                              k.width +
                                                          j)];
              acc += static_cast<double>(kv) * static_cast<double>(input.at(c, iy, ix));
            }
          }
        }
        const double pre = acc + static_cast<double>(weights.bias[static_cast<std::size_t>(o)]);
        out.at(o, y, x) = activate(spec.activation, static_cast<float>(pre));
      }
    }
  }
  return out;
}

Tensor conv2d_forward_gemm(const Tensor& input, const ConvSpec& spec,
                           const ConvWeights& weights) {
  check_conv_operands(input, spec, weights);
  const auto& k = spec.kernel;
  const TensorShape& in = spec.input;
  const std::int64_t patch_rows = k.in_channels * k.height * k.width;
  const std::int64_t pixels = spec.output.height * spec.output.width;

  // Patch matrix: row (c, i, j), column (y, x); zero where the window hits padding.
  std::vector<float> patches(static_cast<std::size_t>(patch_rows * pixels), 0.0f);
  for (std::int64_t c = 0; c < k.in_channels; ++c) {
    for (std::int64_t i = 0; i < k.height; ++i) {
      for (std::int64_t j = 0; j < k.width; ++j) {
        float* row = patches.data() +
                     static_cast<std::size_t>(((c * k.height + i) * k.width + j) * pixels);
        for (std::int64_t y = 0; y < spec.output.height; ++y) {
          const std::int64_t iy = y * spec.stride + i - spec.pad.top;
          if (iy < 0 || iy >= in.height) continue;
          for (std::int64_t x = 0; x < spec.output.width; ++x) {
            const std::int64_t ix = x * spec.stride + j - spec.pad.left;
            if (ix < 0 || ix >= in.width) continue;
            row[y * spec.output.width + x] = input.at(c, iy, ix);
          }
        }
      }
    }
  }

  Tensor out(spec.output);
  gemm(weights.kernel, patches, out.data, k.out_channels, patch_rows, pixels, weights.bias);
  if (spec.activation != Activation::none) {
    for (float& v : out.data) v = activate(spec.activation, v);
  }
  return out;
}

Tensor lrn_forward(const Tensor& input, const NormSpec& spec) {
  require_shape(input, spec.input, "lrn");
  const TensorShape& s = spec.input;
  const std::int64_t half = spec.local_size / 2;
  const double scale = spec.alpha / static_cast<double>(spec.local_size);
  Tensor out(s);
  for (std::int64_t c = 0; c < s.channels; ++c) {
    const std::int64_t lo = std::max<std::int64_t>(0, c - half);
    const std::int64_t hi = std::min<std::int64_t>(s.channels - 1, c + half);
    for (std::int64_t y = 0; y < s.height; ++y) {
      for (std::int64_t x = 0; x < s.width; ++x) {
        double sum = 0.0;
        for (std::int64_t cc = lo; cc <= hi; ++cc) {
          const double v = input.at(cc, y, x);
          sum += v * v;
        }
        const double denom = std::pow(spec.bias_k + scale * sum, spec.beta);
        out.at(c, y, x) = static_cast<float>(static_cast<double>(input.at(c, y, x)) / denom);
      }
    }
  }
  return out;
}

Tensor pool_forward(const Tensor& input, const PoolSpec& spec) {
  require_shape(input, spec.input, "pool");
  Tensor out(spec.output);
  const double window = static_cast<double>(spec.window_h * spec.window_w);
  for (std::int64_t c = 0; c < spec.output.channels; ++c) {
    for (std::int64_t y = 0; y < spec.output.height; ++y) {
      for (std::int64_t x = 0; x < spec.output.width; ++x) {
        float best = -std::numeric_limits<float>::infinity();
        double sum = 0.0;
        for (std::int64_t i = 0; i < spec.window_h; ++i) {
          for (std::int64_t j = 0; j < spec.window_w; ++j) {
            const float v = input.at(c, y * spec.stride + i, x * spec.stride + j);
            best = std::max(best, v);
            sum += v;
          }
        }
        out.at(c, y, x) =
            spec.kind == PoolKind::max ? best : static_cast<float>(sum / window);
      }
    }
  }
  return out;
}

Tensor softmax(const Tensor& v) {
  if (v.data.empty()) throw Error("softmax: empty vector");
  const float peak = *std::max_element(v.data.begin(), v.data.end());
  std::vector<double> e(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    e[i] = std::exp(static_cast<double>(v.data[i]) - static_cast<double>(peak));
    total += e[i];
  }
  Tensor out(v.shape);
  for (std::size_t i = 0; i < v.size(); ++i) out.data[i] = static_cast<float>(e[i] / total);
  return out;
}

Tensor dropout_inference(const Tensor& x, double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(fmt::format("dropout rate {} outside [0,1)", rate));
  }
  // Inverted dropout: scaling happened at training time.
  return x;
}

FcGradients fc_backward(const Tensor& x, const FcWeights& w, const Tensor& dy) {
  if (static_cast<std::int64_t>(x.size()) != w.in_len) {
    throw Error(fmt::format("fc_backward: input length {} != weight rows {}", x.size(), w.in_len));
  }
  if (static_cast<std::int64_t>(dy.size()) != w.out_len) {
    throw Error(
        fmt::format("fc_backward: gradient length {} != output length {}", dy.size(), w.out_len));
  }
  if (w.matrix.size() != static_cast<std::size_t>(w.in_len * w.out_len)) {
    throw Error("fc_backward: weight matrix has the wrong size");
  }
  const auto out_len = static_cast<std::size_t>(w.out_len);
  FcGradients g;
  g.dx = Tensor(flat_shape(w.in_len));
  g.dw.resize(w.matrix.size());
  for (std::int64_t j = 0; j < w.in_len; ++j) {
    const float* row = w.matrix.data() + static_cast<std::size_t>(j) * out_len;
    float* grow = g.dw.data() + static_cast<std::size_t>(j) * out_len;
    const double xj = x.data[static_cast<std::size_t>(j)];
    double acc = 0.0;
    for (std::size_t k = 0; k < out_len; ++k) {
      const double d = dy.data[k];
      acc += static_cast<double>(row[k]) * d;
      grow[k] = static_cast<float>(xj * d);
    }
    g.dx.data[static_cast<std::size_t>(j)] = static_cast<float>(acc);
  }
  g.db = Tensor(flat_shape(w.out_len), dy.data);
  return g;
}

}  // namespace cnnlab
