// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the test and acceptance binaries.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "cnnlab/device.hpp"
#include "cnnlab/kernels.hpp"
#include "cnnlab/model.hpp"

namespace cnnlab::testing {

inline std::string data_path(std::string_view relative) {
  return std::string(CNNLAB_DATA_DIR) + "/" + std::string(relative);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::int64_t pick(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline std::vector<float> random_values(std::mt19937_64& rng, std::size_t n, double lo = -1.0,
                                        double hi = 1.0) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(uniform(rng, lo, hi));
  return v;
}

inline Tensor random_tensor(std::mt19937_64& rng, const TensorShape& shape) {
  return Tensor(shape, random_values(rng, static_cast<std::size_t>(shape.element_count())));
}

/// Message of the Error thrown by f, or "" when nothing is thrown.
template <class F>
std::string error_message(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

inline bool contains(std::string_view haystack, std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both are zero.
inline double relative_error(std::span<const float> a, std::span<const float> b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    diff += d * d;
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

/// Small random chain mixing all four layer kinds with consistent shapes.
inline NetworkModel random_chain(std::mt19937_64& rng, std::size_t layers) {
  NetworkModel model;
  model.name = "random";
  TensorShape s = make_shape(pick(rng, 1, 4), 2 * pick(rng, 2, 4), 2 * pick(rng, 2, 4));
  for (std::size_t i = 0; i < layers; ++i) {
    Layer layer;
    layer.name = "l" + std::to_string(i + 1);
    const bool can_pool = s.height >= 2 && s.width >= 2;
    switch (pick(rng, 0, 3)) {
      case 0: {
        const std::int64_t k = pick(rng, 0, 1) == 0 ? 1 : 3;
        const std::int64_t p = k / 2;
        layer.spec = make_conv(s, KernelShape{pick(rng, 1, 6), s.channels, k, k}, 1,
                               Padding{p, p, p, p}, Activation::relu);
        break;
      }
      case 1:
        layer.spec = make_lrn(s, s.channels >= 3 ? 3 : 1, 1e-4, 0.75, 2.0);
        break;
      case 2:
        if (can_pool) {
          layer.spec = make_pool(s, PoolKind::max, 2, 2, 2);
          break;
        }
        [[fallthrough]];
      default: {
        FcSpec fc = make_fc(s, pick(rng, 1, 64), FcMode::dropout, 0.5, Activation::relu);
        fc.flat_input = s.height == 1 && s.width == 1;
        layer.spec = fc;
        break;
      }
    }
    s = output_shape(layer.spec);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

/// Random device; with `gaps`, each class is dropped with probability 0.1.
inline DeviceProfile random_profile(std::mt19937_64& rng, std::string name, bool gaps) {
  DeviceProfile p;
  p.name = std::move(name);
  for (LayerClass c : kAllLayerClasses) {
    if (gaps && uniform(rng, 0.0, 1.0) < 0.1) continue;
    // Coarse power levels make exact ties between devices common.
    p.set_rate(c, ClassRate{uniform(rng, 1.0, 2000.0), static_cast<double>(pick(rng, 1, 12)) * 10.0});
  }
  p.overhead_s = pick(rng, 0, 1) == 0 ? 0.0 : uniform(rng, 0.0, 1e-5);
  p.transfer_bytes_per_s = uniform(rng, 1e8, 2e10);
  return p;
}

}  // namespace cnnlab::testing
