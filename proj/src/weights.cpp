// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnnlab/weights.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace cnnlab {

namespace {

constexpr std::array<char, 4> kMagic{'C', 'N', 'N', 'L'};
constexpr std::uint32_t kVersion = 1;

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

template <class T>
void put(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get(std::istream& in, std::string_view what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error(fmt::format("weights file truncated while reading {}", what));
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

std::string_view to_string(BlobKind kind) {
  switch (kind) {
    case BlobKind::conv_kernel: return "conv kernel";
    case BlobKind::conv_bias: return "conv bias";
    case BlobKind::fc_matrix: return "fc matrix";
    case BlobKind::fc_bias: return "fc bias";
  }
  return "unknown";
}

const WeightBlob* WeightSet::find(std::uint32_t layer, BlobKind kind) const {
  for (const auto& b : blobs) {
    if (b.layer == layer && b.kind == kind) return &b;
  }
  return nullptr;
}

WeightBlob* WeightSet::find(std::uint32_t layer, BlobKind kind) {
  for (auto& b : blobs) {
    if (b.layer == layer && b.kind == kind) return &b;
  }
  return nullptr;
}

std::vector<BlobKind> blob_kinds(const LayerSpec& spec) {
  if (std::holds_alternative<ConvSpec>(spec)) return {BlobKind::conv_kernel, BlobKind::conv_bias};
  if (std::holds_alternative<FcSpec>(spec)) return {BlobKind::fc_matrix, BlobKind::fc_bias};
  return {};
}

std::size_t expected_blob_size(const LayerSpec& spec, BlobKind kind) {
  if (const auto* c = std::get_if<ConvSpec>(&spec)) {
    if (kind == BlobKind::conv_kernel) return static_cast<std::size_t>(c->kernel.element_count());
    if (kind == BlobKind::conv_bias) return static_cast<std::size_t>(c->kernel.out_channels);
  }
  if (const auto* f = std::get_if<FcSpec>(&spec)) {
    if (kind == BlobKind::fc_matrix) {
      return static_cast<std::size_t>(f->input_len()) * static_cast<std::size_t>(f->output_len);
    }
    if (kind == BlobKind::fc_bias) return static_cast<std::size_t>(f->output_len);
  }
  throw Error(fmt::format("{} layer has no {} blob", type_name(spec), to_string(kind)));
}

float UniformSource::next(float lo, float hi) {
  const double unit = static_cast<double>(engine_() >> 8) * 0x1p-24;
  return static_cast<float>(static_cast<double>(lo) + unit * (static_cast<double>(hi) - lo));
}

WeightSet init_weights(const NetworkModel& model, std::uint64_t seed) {
  UniformSource rng(seed);
  WeightSet set;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    for (BlobKind kind : blob_kinds(model.layers[i].spec)) {
      WeightBlob blob{static_cast<std::uint32_t>(i), kind, {}};
      blob.values.resize(expected_blob_size(model.layers[i].spec, kind));
      for (float& v : blob.values) v = rng.next(-0.05f, 0.05f);
      set.blobs.push_back(std::move(blob));
    }
  }
  return set;
}

std::vector<float> seeded_input(const NetworkModel& model, std::uint64_t seed) {
  if (model.layers.empty()) throw Error("empty network");
  UniformSource rng(seed);
  std::vector<float> values(
      static_cast<std::size_t>(input_shape(model.layers.front().spec).element_count()));
  for (float& v : values) v = rng.next(0.0f, 1.0f);
  return values;
}

void write_weights(std::ostream& out, const WeightSet& weights) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(weights.blobs.size()));
  for (const auto& blob : weights.blobs) {
    put<std::uint32_t>(out, blob.layer);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(blob.kind));
    put<std::uint64_t>(out, blob.values.size());
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(blob.values.data()),
                static_cast<std::streamsize>(blob.values.size() * sizeof(float)));
    } else {
      for (float v : blob.values) put<float>(out, v);
    }
  }
  if (!out) throw Error("failed writing weights");
}

WeightSet read_weights(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error("not a weights file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) throw Error(fmt::format("unsupported weights version {}", version));
  const auto count = get<std::uint32_t>(in, "blob count");
  WeightSet set;
  for (std::uint32_t i = 0; i < count; ++i) {
    WeightBlob blob;
    blob.layer = get<std::uint32_t>(in, "layer index");
    const auto kind = get<std::uint8_t>(in, "blob kind");
    if (kind > 3) throw Error(fmt::format("unknown blob kind {}", kind));
    blob.kind = static_cast<BlobKind>(kind);
    const auto n = get<std::uint64_t>(in, "element count");
    if (n > (std::uint64_t{1} << 40)) throw Error(fmt::format("blob element count {} too large", n));
    blob.values.resize(static_cast<std::size_t>(n));
    if constexpr (std::endian::native == std::endian::little) {
      if (!in.read(reinterpret_cast<char*>(blob.values.data()),
                   static_cast<std::streamsize>(n * sizeof(float)))) {
        throw Error("weights file truncated while reading payload");
      }
    } else {
      for (auto& v : blob.values) v = get<float>(in, "payload");
    }
    set.blobs.push_back(std::move(blob));
  }
  return set;
}

void save_weights_file(const std::string& path, const WeightSet& weights) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write weights file '{}'", path));
  write_weights(out, weights);
}

WeightSet load_weights_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open weights file '{}'", path));
  return read_weights(in);
}

}  // namespace cnnlab
