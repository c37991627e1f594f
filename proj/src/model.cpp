// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnnlab/model.hpp"

#include <fmt/format.h>

#include <cmath>

namespace cnnlab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) {
    throw Error("tensor element count overflows the addressable range");
  }
  return r;
}

}  // namespace

std::string TensorShape::to_string() const {
  return fmt::format("{}x{}x{}", channels, height, width);
}

TensorShape make_shape(std::int64_t channels, std::int64_t height, std::int64_t width) {
  if (channels < 1 || height < 1 || width < 1) {
    throw Error(fmt::format("non-positive extent in shape {}x{}x{}", channels, height, width));
  }
  // Data buffers are indexed with size_t and sized in bytes of float.
  const std::int64_t count = checked_mul(checked_mul(channels, height), width);
  checked_mul(count, static_cast<std::int64_t>(sizeof(float)));
  return TensorShape{channels, height, width};
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "none";
}

std::string_view to_string(PoolKind k) { return k == PoolKind::max ? "max" : "avg"; }
std::string_view to_string(FcMode m) { return m == FcMode::dropout ? "dropout" : "softmax"; }
std::string_view to_string(Direction d) {
  return d == Direction::forward ? "forward" : "backward";
}

Activation parse_activation(std::string_view s) {
  if (s == "none") return Activation::none;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw Error(fmt::format("unknown activation '{}'", s));
}

std::string_view type_name(const LayerSpec& spec) {
  return std::visit(Overloaded{[](const ConvSpec&) { return std::string_view("conv"); },
                               [](const NormSpec&) { return std::string_view("lrn"); },
                               [](const PoolSpec&) { return std::string_view("pool"); },
                               [](const FcSpec&) { return std::string_view("fc"); }},
                    spec);
}

TensorShape input_shape(const LayerSpec& spec) {
  return std::visit([](const auto& s) { return s.input; }, spec);
}

TensorShape output_shape(const LayerSpec& spec) {
  return std::visit(Overloaded{[](const ConvSpec& s) { return s.output; },
                               [](const NormSpec& s) { return s.input; },
                               [](const PoolSpec& s) { return s.output; },
                               [](const FcSpec& s) { return flat_shape(s.output_len); }},
                    spec);
}

TensorShape input_shape(const TransitionStage& stage) {
  return std::visit([](const auto& s) { return s.input; }, stage);
}

TensorShape output_shape(const TransitionStage& stage) {
  return std::visit(Overloaded{[](const NormSpec& s) { return s.input; },
                               [](const PoolSpec& s) { return s.output; }},
                    stage);
}

TensorShape infer_conv_output_shape(const TensorShape& input, const KernelShape& kernel,
                                    std::int64_t stride, const Padding& pad, ShapeMode mode) {
  if (stride < 1) throw Error(fmt::format("stride must be positive, got {}", stride));
  if (pad.top < 0 || pad.bottom < 0 || pad.left < 0 || pad.right < 0) {
    throw Error("padding must be non-negative");
  }
  if (kernel.height < 1 || kernel.width < 1 || kernel.out_channels < 1 ||
      kernel.in_channels < 1) {
    throw Error("non-positive kernel extent");
  }
  const std::int64_t padded_h = input.height + pad.top + pad.bottom;
  const std::int64_t padded_w = input.width + pad.left + pad.right;
  if (padded_h < kernel.height || padded_w < kernel.width) {
    throw Error(fmt::format("kernel {}x{} larger than padded input {}x{}", kernel.height,
                            kernel.width, padded_h, padded_w));
  }
  const std::int64_t span_h = padded_h - kernel.height;
  const std::int64_t span_w = padded_w - kernel.width;
  if (mode == ShapeMode::strict && (span_h % stride != 0 || span_w % stride != 0)) {
    throw Error("stride does not tile padded input");
  }
  return make_shape(kernel.out_channels, span_h / stride + 1, span_w / stride + 1);
}

TensorShape infer_pool_output_shape(const TensorShape& input, std::int64_t window_h,
                                    std::int64_t window_w, std::int64_t stride) {
  if (stride < 1) throw Error(fmt::format("stride must be positive, got {}", stride));
  if (window_h < 1 || window_w < 1) throw Error("non-positive pooling window");
  if (window_h > input.height || window_w > input.width) {
    throw Error(fmt::format("pooling window {}x{} larger than input {}x{}", window_h, window_w,
                            input.height, input.width));
  }
  return make_shape(input.channels, (input.height - window_h) / stride + 1,
                    (input.width - window_w) / stride + 1);
}

ConvSpec make_conv(const TensorShape& input, const KernelShape& kernel, std::int64_t stride,
                   const Padding& pad, Activation activation, ShapeMode mode) {
  make_shape(input.channels, input.height, input.width);
  if (kernel.in_channels != input.channels) {
    throw Error(fmt::format("kernel in-channels {} != input channels {}", kernel.in_channels,
                            input.channels));
  }
  ConvSpec spec;
  spec.input = input;
  spec.kernel = kernel;
  spec.stride = stride;
  spec.pad = pad;
  spec.activation = activation;
  spec.output = infer_conv_output_shape(input, kernel, stride, pad, mode);
  return spec;
}

NormSpec make_lrn(const TensorShape& input, std::int64_t local_size, double alpha, double beta,
                  double bias_k) {
  make_shape(input.channels, input.height, input.width);
  if (local_size < 1 || local_size % 2 == 0) {
    throw Error(fmt::format("local_size must be a positive odd count, got {}", local_size));
  }
  if (local_size > input.channels) {
    throw Error(fmt::format("local_size {} exceeds input channels {}", local_size,
                            input.channels));
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error("alpha must be >= 0");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("beta must be > 0");
  if (!(bias_k > 0.0) || !std::isfinite(bias_k)) throw Error("k must be > 0");
  return NormSpec{input, NormKind::lrn, local_size, alpha, beta, bias_k};
}

PoolSpec make_pool(const TensorShape& input, PoolKind kind, std::int64_t window_h,
                   std::int64_t window_w, std::int64_t stride) {
  make_shape(input.channels, input.height, input.width);
  PoolSpec spec;
  spec.input = input;
  spec.kind = kind;
  spec.stride = stride;
  spec.window_h = window_h;
  spec.window_w = window_w;
  spec.output = infer_pool_output_shape(input, window_h, window_w, stride);
  spec.window_count = input.channels;
  return spec;
}

FcSpec make_fc(const TensorShape& input, std::int64_t output_len, FcMode mode,
               double dropout_rate, Activation activation) {
  make_shape(input.channels, input.height, input.width);
  if (output_len < 1) throw Error(fmt::format("fc output length must be >= 1, got {}", output_len));
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(fmt::format("dropout rate {} outside [0,1)", dropout_rate));
  }
  FcSpec spec;
  spec.input = input;
  spec.flat_input = input.height == 1 && input.width == 1;
  spec.output_len = output_len;
  spec.mode = mode;
  spec.dropout_rate = dropout_rate;
  spec.activation = activation;
  return spec;
}

TensorShape apply_transition_shapes(const TensorShape& incoming, const Layer& layer) {
  TensorShape current = incoming;
  for (const auto& stage : layer.transition) {
    const TensorShape expected = input_shape(stage);
    if (expected != current) {
      throw Error(fmt::format("layer '{}': transition stage expects {} but receives {}",
                              layer.name, expected.to_string(), current.to_string()));
    }
    current = output_shape(stage);
  }
  return current;
}

ValidationReport validate_network(const NetworkModel& model) {
  ValidationReport report;
  if (model.layers.empty()) {
    report.errors.emplace_back("empty network");
    return report;
  }
  const ShapeMode mode = model.permissive ? ShapeMode::floor : ShapeMode::strict;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    LayerValidation row;
    row.index = i;
    row.name = layer.name;
    row.type = std::string(type_name(layer.spec));
    row.declared_output = output_shape(layer.spec);
    try {
      row.inferred_output = std::visit(
          Overloaded{
              [&](const ConvSpec& s) {
                if (s.kernel.in_channels != s.input.channels) {
                  throw Error(fmt::format("kernel in-channels {} != input channels {}",
                                          s.kernel.in_channels, s.input.channels));
                }
                return infer_conv_output_shape(s.input, s.kernel, s.stride, s.pad, mode);
              },
              [](const NormSpec& s) { return s.input; },
              [](const PoolSpec& s) {
                return infer_pool_output_shape(s.input, s.window_h, s.window_w, s.stride);
              },
              [](const FcSpec& s) { return flat_shape(s.output_len); }},
          layer.spec);
      if (*row.inferred_output != row.declared_output) {
        report.errors.push_back(fmt::format("layer {} '{}': declared output {} != inferred {}",
                                            i, layer.name, row.declared_output.to_string(),
                                            row.inferred_output->to_string()));
      }
    } catch (const Error& e) {
      report.errors.push_back(fmt::format("layer {} '{}': {}", i, layer.name, e.what()));
    }
    row.forward_flops = count_layer_flops(layer.spec, Direction::forward);
    report.total_forward_flops += row.forward_flops;
    if (std::holds_alternative<FcSpec>(layer.spec)) {
      report.total_fc_forward_flops += row.forward_flops;
    }

    if (i == 0 && !layer.transition.empty()) {
      report.errors.push_back(
          fmt::format("layer 0 '{}': transition on the first layer has no predecessor",
                      layer.name));
    }
    if (i + 1 < model.layers.size()) {
      const Layer& next = model.layers[i + 1];
      const std::int64_t want = input_shape(next.spec).element_count();
      std::int64_t have = row.declared_output.element_count();
      bool match = false;
      try {
        have = apply_transition_shapes(row.declared_output, next).element_count();
        match = have == want;
        if (!match) {
          report.errors.push_back(fmt::format(
              "layer {} '{}' -> layer {} '{}': {} elements leave, {} expected", i, layer.name,
              i + 1, next.name, have, want));
        }
      } catch (const Error& e) {
        report.errors.push_back(fmt::format("layer {} '{}': {}", i + 1, next.name, e.what()));
      }
      row.successor_match = match;
    }
    report.layers.push_back(std::move(row));
  }
  return report;
}

}  // namespace cnnlab
