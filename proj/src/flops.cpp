// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>

#include "cnnlab/model.hpp"

namespace cnnlab {

namespace {

using u64 = std::uint64_t;

u64 conv_flops(const ConvSpec& s) {
  const u64 macs = static_cast<u64>(s.kernel.height) * static_cast<u64>(s.kernel.width) *
                   static_cast<u64>(s.kernel.in_channels) *
                   static_cast<u64>(s.output.element_count());
  return 2 * macs;
}

// Sum of squares over the window (n MACs), then scale, bias, power, divide.
u64 lrn_flops(const NormSpec& s) {
  return static_cast<u64>(s.input.element_count()) * (2 * static_cast<u64>(s.local_size) + 4);
}

// One compare (max) or add (average) per window element.
u64 pool_flops(const PoolSpec& s) {
  return static_cast<u64>(s.output.element_count()) * static_cast<u64>(s.window_h) *
         static_cast<u64>(s.window_w);
}

u64 fc_flops(const FcSpec& s) {
  return 2 * static_cast<u64>(s.input_len()) * static_cast<u64>(s.output_len);
}

}  // namespace

std::uint64_t count_layer_flops(const LayerSpec& spec, Direction direction) {
  if (direction == Direction::backward) {
    const auto* fc = std::get_if<FcSpec>(&spec);
    if (fc == nullptr) throw Error("unsupported direction");
    // Input-gradient GEMM plus weight-gradient GEMM.
    return 2 * fc_flops(*fc);
  }
  if (const auto* s = std::get_if<ConvSpec>(&spec)) return conv_flops(*s);
  if (const auto* s = std::get_if<NormSpec>(&spec)) return lrn_flops(*s);
  if (const auto* s = std::get_if<PoolSpec>(&spec)) return pool_flops(*s);
  return fc_flops(std::get<FcSpec>(spec));
}

std::uint64_t count_stage_flops(const TransitionStage& stage) {
  if (const auto* s = std::get_if<NormSpec>(&stage)) return lrn_flops(*s);
  return pool_flops(std::get<PoolSpec>(stage));
}

}  // namespace cnnlab
