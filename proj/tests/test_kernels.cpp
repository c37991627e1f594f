// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <random>

#include "cnnlab/kernels.hpp"
#include "support.hpp"

using namespace cnnlab;
using cnnlab::testing::pick;
using cnnlab::testing::random_tensor;
using cnnlab::testing::random_values;
using cnnlab::testing::relative_error;

namespace {

using BigFloat = boost::multiprecision::cpp_bin_float_50;

// Direct-definition convolution, written independently of the library.
std::vector<double> conv_oracle(const Tensor& in, const ConvSpec& s, const ConvWeights& w) {
  std::vector<double> out(static_cast<std::size_t>(s.output.element_count()), 0.0);
  std::size_t idx = 0;
  for (std::int64_t o = 0; o < s.output.channels; ++o)
    for (std::int64_t y = 0; y < s.output.height; ++y)
      for (std::int64_t x = 0; x < s.output.width; ++x, ++idx) {
        double acc = w.bias[static_cast<std::size_t>(o)];
        for (std::int64_t c = 0; c < s.input.channels; ++c)
          for (std::int64_t i = 0; i < s.kernel.height; ++i)
            for (std::int64_t j = 0; j < s.kernel.width; ++j) {
              const std::int64_t iy = y * s.stride + i - s.pad.top;
              const std::int64_t ix = x * s.stride + j - s.pad.left;
              if (iy < 0 || ix < 0 || iy >= s.input.height || ix >= s.input.width) continue;
              const std::size_t k = static_cast<std::size_t>(
                  ((o * s.kernel.in_channels + c) * s.kernel.height + i) * s.kernel.width + j);
              acc += static_cast<double>(w.kernel[k]) * in.at(c, iy, ix);
            }
        out[idx] = acc;
      }
  return out;
}

struct ConvCase {
  ConvSpec spec;
  ConvWeights weights;
  Tensor input;
};

ConvCase random_conv(std::mt19937_64& rng, Activation act) {
  const auto c = pick(rng, 1, 8);
  const auto h = pick(rng, 1, 16);
  const auto w = pick(rng, 1, 16);
  const auto kh = pick(rng, 1, std::min<std::int64_t>(5, h + 2));
  const auto kw = pick(rng, 1, std::min<std::int64_t>(5, w + 2));
  const Padding pad{pick(rng, 0, 1), pick(rng, 0, 1), pick(rng, 0, 1), pick(rng, 0, 1)};
  const KernelShape kernel{pick(rng, 1, 8), c, std::min(kh, h + pad.top + pad.bottom),
                           std::min(kw, w + pad.left + pad.right)};
  ConvCase cc;
  cc.spec = make_conv(make_shape(c, h, w), kernel, pick(rng, 1, 3), pad, act, ShapeMode::floor);
  cc.weights.kernel = random_values(rng, static_cast<std::size_t>(kernel.element_count()));
  cc.weights.bias = random_values(rng, static_cast<std::size_t>(kernel.out_channels));
  cc.input = random_tensor(rng, cc.spec.input);
  return cc;
}

}  // namespace

TEST_CASE("gemm matches a triple loop") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = pick(rng, 1, 9);
    const auto k = pick(rng, 1, 17);
    const auto n = pick(rng, 1, 13);
    const auto a = random_values(rng, static_cast<std::size_t>(m * k));
    const auto b = random_values(rng, static_cast<std::size_t>(k * n));
    const auto bias = random_values(rng, static_cast<std::size_t>(m));
    std::vector<float> c(static_cast<std::size_t>(m * n));
    gemm(a, b, c, m, k, n, bias);
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::int64_t p = 0; p < k; ++p) {
          acc += static_cast<double>(a[static_cast<std::size_t>(i * k + p)]) *
                 b[static_cast<std::size_t>(p * n + j)];
        }
        acc += bias[static_cast<std::size_t>(i)];
        CHECK(c[static_cast<std::size_t>(i * n + j)] == static_cast<float>(acc));
      }
    }
  }
  std::vector<float> c(4);
  CHECK_THROWS_AS(gemm(std::vector<float>(3), std::vector<float>(4), c, 2, 2, 2), Error);
}

TEST_CASE("conv: lowered, naive and direct oracle agree") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const ConvCase cc = random_conv(rng, Activation::none);
    const Tensor naive = conv2d_forward(cc.input, cc.spec, cc.weights);
    const Tensor lowered = conv2d_forward_gemm(cc.input, cc.spec, cc.weights);
    CHECK(naive.shape == cc.spec.output);
    CHECK(lowered == naive);  // same accumulation order, so bitwise equal
    const auto oracle = conv_oracle(cc.input, cc.spec, cc.weights);
    std::vector<float> rounded(oracle.begin(), oracle.end());
    CHECK(relative_error(rounded, naive.data) <= 1e-6);
  }
}

TEST_CASE("conv applies the activation after the bias") {
  std::mt19937_64 rng(3);
  const ConvCase cc = random_conv(rng, Activation::relu);
  const Tensor out = conv2d_forward_gemm(cc.input, cc.spec, cc.weights);
  const auto oracle = conv_oracle(cc.input, cc.spec, cc.weights);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out.data[i] == std::max(0.0f, static_cast<float>(oracle[i])));
  }
}

TEST_CASE("1x1 conv equals an FC layer applied per pixel") {
  std::mt19937_64 rng(4);
  const std::int64_t c = 5;
  const std::int64_t o = 3;
  const ConvSpec spec = make_conv(make_shape(c, 4, 3), {o, c, 1, 1}, 1, {}, Activation::tanh);
  ConvWeights cw{random_values(rng, static_cast<std::size_t>(o * c)),
                 random_values(rng, static_cast<std::size_t>(o))};
  const Tensor input = random_tensor(rng, spec.input);
  const Tensor out = conv2d_forward_gemm(input, spec, cw);
  FcWeights fw{c, o, std::vector<float>(static_cast<std::size_t>(c * o)), cw.bias};
  for (std::int64_t j = 0; j < c; ++j)
    for (std::int64_t k = 0; k < o; ++k)
      fw.matrix[static_cast<std::size_t>(j * o + k)] = cw.kernel[static_cast<std::size_t>(k * c + j)];
  for (std::int64_t y = 0; y < 4; ++y) {
    for (std::int64_t x = 0; x < 3; ++x) {
      std::vector<float> pixel;
      for (std::int64_t ch = 0; ch < c; ++ch) pixel.push_back(input.at(ch, y, x));
      const Tensor fc = fc_forward(Tensor::flat(pixel), fw, Activation::tanh);
      for (std::int64_t k = 0; k < o; ++k) CHECK(fc.data[static_cast<std::size_t>(k)] == out.at(k, y, x));
    }
  }
}

TEST_CASE("fc forward") {
  FcWeights w{2, 2, {1.0f, 2.0f, 3.0f, 4.0f}, {0.5f, -100.0f}};
  const Tensor y = fc_forward(Tensor::flat({1.0f, 1.0f}), w, Activation::none);
  CHECK(y.data == std::vector<float>{4.5f, -94.0f});
  const Tensor r = fc_forward(Tensor::flat({1.0f, 1.0f}), w, Activation::relu);
  CHECK(r.data == std::vector<float>{4.5f, 0.0f});
  CHECK_THROWS_AS(fc_forward(Tensor::flat({1.0f}), w, Activation::none), Error);
}

TEST_CASE("sigmoid is stable and symmetric") {
  CHECK(sigmoid(0.0f) == 0.5f);
  CHECK(std::isfinite(sigmoid(-1000.0f)));
  CHECK(std::isfinite(sigmoid(1000.0f)));
  CHECK(sigmoid(-1000.0f) >= 0.0f);
  CHECK(sigmoid(1000.0f) <= 1.0f);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto x = static_cast<float>(testing::uniform(rng, -15.0, 15.0));
    const float s = sigmoid(x);
    CHECK(s > 0.0f);
    CHECK(s < 1.0f);
    CHECK(std::fabs(static_cast<double>(s) + sigmoid(-x) - 1.0) <= 1e-6);
    CHECK(std::fabs(s - 1.0 / (1.0 + std::exp(-static_cast<double>(x)))) <= 1e-7);
  }
}

TEST_CASE("lrn matches the normalization formula") {
  std::mt19937_64 rng(6);
  const NormSpec spec = make_lrn(make_shape(7, 3, 2), 5, 0.3, 0.75, 2.0);
  const Tensor in = random_tensor(rng, spec.input);
  const Tensor out = lrn_forward(in, spec);
  for (std::int64_t c = 0; c < 7; ++c) {
    for (std::int64_t y = 0; y < 3; ++y) {
      for (std::int64_t x = 0; x < 2; ++x) {
        double sum = 0.0;
        for (std::int64_t cc = c - 2; cc <= c + 2; ++cc) {
          if (cc < 0 || cc >= 7) continue;  // window clipped at the edges
          sum += static_cast<double>(in.at(cc, y, x)) * in.at(cc, y, x);
        }
        const double expect = in.at(c, y, x) / std::pow(2.0 + 0.3 / 5.0 * sum, 0.75);
        CHECK(out.at(c, y, x) == doctest::Approx(expect).epsilon(1e-6));
      }
    }
  }
  const NormSpec identity = make_lrn(spec.input, 1, 0.0, 0.75, 1.0);
  CHECK(lrn_forward(in, identity) == in);
}

TEST_CASE("pooling") {
  Tensor in(make_shape(1, 4, 4), {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16});
  const Tensor mx = pool_forward(in, make_pool(in.shape, PoolKind::max, 2, 2, 2));
  CHECK(mx.data == std::vector<float>{6, 8, 14, 16});
  const Tensor avg = pool_forward(in, make_pool(in.shape, PoolKind::average, 2, 2, 2));
  CHECK(avg.data == std::vector<float>{3.5f, 5.5f, 11.5f, 13.5f});
  const Tensor overlap = pool_forward(in, make_pool(in.shape, PoolKind::max, 3, 3, 1));
  CHECK(overlap.data == std::vector<float>{11, 12, 15, 16});
  CHECK_THROWS_AS(pool_forward(Tensor(make_shape(1, 3, 3)), make_pool(in.shape, PoolKind::max, 2, 2, 2)),
                  Error);
}

TEST_CASE("softmax against a 50-digit oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<std::size_t>(pick(rng, 1, 200));
    const double spread = trial < 10 ? 5.0 : 80.0;
    const Tensor v = Tensor::flat(random_values(rng, n, -spread, spread));
    const Tensor p = softmax(v);
    BigFloat total = 0;
    for (float x : v.data) total += boost::multiprecision::exp(BigFloat(x));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double expect = static_cast<double>(boost::multiprecision::exp(BigFloat(v.data[i])) / total);
      CHECK(std::fabs(p.data[i] - expect) <= 1e-7 + 1e-6 * expect);
      sum += p.data[i];
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("softmax is shift invariant and overflow safe") {
  const Tensor a = softmax(Tensor::flat({1.0f, 2.0f, 3.0f}));
  const Tensor b = softmax(Tensor::flat({1001.0f, 1002.0f, 1003.0f}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-6));
  const Tensor big = softmax(Tensor::flat({1e30f, 0.0f}));
  CHECK(big.data[0] == 1.0f);
  CHECK(big.data[1] == 0.0f);
  CHECK_THROWS_AS(softmax(Tensor{}), Error);
}

TEST_CASE("dropout at inference is the identity") {
  const Tensor x = Tensor::flat({1.0f, -2.0f, 3.5f});
  CHECK(dropout_inference(x, 0.5) == x);
  CHECK(dropout_inference(x, 0.0) == x);
  CHECK_THROWS_AS(dropout_inference(x, 1.0), Error);
  CHECK_THROWS_AS(dropout_inference(x, -0.5), Error);
}

TEST_CASE("fc backward against central differences") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = pick(rng, 1, 64);
    const auto out = pick(rng, 1, 32);
    FcWeights w{in, out, random_values(rng, static_cast<std::size_t>(in * out)),
                random_values(rng, static_cast<std::size_t>(out))};
    Tensor x = Tensor::flat(random_values(rng, static_cast<std::size_t>(in)));
    const Tensor dy = Tensor::flat(random_values(rng, static_cast<std::size_t>(out)));
    // L = sum_k dy_k * y_k, so dL/dparam is exactly what fc_backward returns.
    auto loss = [&](const Tensor& xx, const FcWeights& ww) {
      const Tensor y = fc_forward(xx, ww, Activation::none);
      double l = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) l += static_cast<double>(dy.data[k]) * y.data[k];
      return l;
    };
    const FcGradients g = fc_backward(x, w, dy);
    const float eps = 1e-2f;
    std::vector<float> dx(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      const float keep = x.data[j];
      x.data[j] = keep + eps;
      const double up = loss(x, w);
      x.data[j] = keep - eps;
      const double down = loss(x, w);
      x.data[j] = keep;
      dx[j] = static_cast<float>((up - down) / (2.0 * eps));
    }
    std::vector<float> dw(w.matrix.size());
    for (std::size_t p = 0; p < w.matrix.size(); ++p) {
      const float keep = w.matrix[p];
      w.matrix[p] = keep + eps;
      const double up = loss(x, w);
      w.matrix[p] = keep - eps;
      const double down = loss(x, w);
      w.matrix[p] = keep;
      dw[p] = static_cast<float>((up - down) / (2.0 * eps));
    }
    std::vector<float> db(w.bias.size());
    for (std::size_t k = 0; k < w.bias.size(); ++k) {
      const float keep = w.bias[k];
      w.bias[k] = keep + eps;
      const double up = loss(x, w);
      w.bias[k] = keep - eps;
      const double down = loss(x, w);
      w.bias[k] = keep;
      db[k] = static_cast<float>((up - down) / (2.0 * eps));
    }
    CHECK(relative_error(g.dx.data, dx) <= 1e-3);
    CHECK(relative_error(g.dw, dw) <= 1e-3);
    CHECK(relative_error(g.db.data, db) <= 1e-3);
  }
}
