// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Parameter blobs and the little-endian "CNNL" weights file.
//
// Layout: magic "CNNL", u32 version (1), u32 blob count, then per blob:
// u32 layer index, u8 kind, u64 element count, raw f32 payload.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cnnlab/model.hpp"

namespace cnnlab {

enum class BlobKind : std::uint8_t { conv_kernel = 0, conv_bias = 1, fc_matrix = 2, fc_bias = 3 };

std::string_view to_string(BlobKind kind);

struct WeightBlob {
  std::uint32_t layer = 0;
  BlobKind kind = BlobKind::conv_kernel;
  std::vector<float> values;

  friend bool operator==(const WeightBlob&, const WeightBlob&) = default;
};

struct WeightSet {
  std::vector<WeightBlob> blobs;

  const WeightBlob* find(std::uint32_t layer, BlobKind kind) const;
  WeightBlob* find(std::uint32_t layer, BlobKind kind);

  friend bool operator==(const WeightSet&, const WeightSet&) = default;
};

/// Blob kinds a layer owns, in file order; empty for pool and LRN.
std::vector<BlobKind> blob_kinds(const LayerSpec& spec);
std::size_t expected_blob_size(const LayerSpec& spec, BlobKind kind);

/// Seeded uniform floats. The engine sequence is fixed by the standard and the
/// float mapping is done here (std distributions vary between libraries), so
/// streams are identical across platforms.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed)
      : engine_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}
  /// Uniform in [lo, hi).
  float next(float lo, float hi);

 private:
  std::mt19937 engine_;
};

/// Seeded uniform [-0.05, 0.05] parameters for every parameterized layer.
WeightSet init_weights(const NetworkModel& model, std::uint64_t seed);

/// Seeded uniform [0, 1) input tensor for the first layer.
std::vector<float> seeded_input(const NetworkModel& model, std::uint64_t seed);

void write_weights(std::ostream& out, const WeightSet& weights);
WeightSet read_weights(std::istream& in);
void save_weights_file(const std::string& path, const WeightSet& weights);
WeightSet load_weights_file(const std::string& path);

}  // namespace cnnlab
