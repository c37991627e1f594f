// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Layer-tuple intermediate representation: tensor geometry, the four layer
// kinds, network chains, shape inference and FLOP accounting.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cnnlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Channels x height x width geometry of a feature-map stack.
struct TensorShape {
  std::int64_t channels = 1;
  std::int64_t height = 1;
  std::int64_t width = 1;

  std::int64_t element_count() const { return channels * height * width; }
  std::string to_string() const;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

/// Builds a shape, rejecting non-positive extents and element counts that
/// overflow the addressable range.
TensorShape make_shape(std::int64_t channels, std::int64_t height, std::int64_t width);
inline TensorShape flat_shape(std::int64_t length) { return make_shape(length, 1, 1); }

enum class Activation { none, sigmoid, tanh, relu };

struct Padding {
  std::int64_t top = 0;
  std::int64_t bottom = 0;
  std::int64_t left = 0;
  std::int64_t right = 0;

  friend bool operator==(const Padding&, const Padding&) = default;
};

struct KernelShape {
  std::int64_t out_channels = 1;
  std::int64_t in_channels = 1;
  std::int64_t height = 1;
  std::int64_t width = 1;

  std::int64_t element_count() const { return out_channels * in_channels * height * width; }
  friend bool operator==(const KernelShape&, const KernelShape&) = default;
};

struct ConvSpec {
  TensorShape input;
  KernelShape kernel;
  TensorShape output;
  std::int64_t stride = 1;
  Padding pad;
  Activation activation = Activation::none;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

enum class NormKind { lrn };

/// Across-channel local response normalization.
struct NormSpec {
  TensorShape input;
  NormKind kind = NormKind::lrn;
  std::int64_t local_size = 1;
  double alpha = 0.0;
  double beta = 1.0;
  double bias_k = 1.0;

  friend bool operator==(const NormSpec&, const NormSpec&) = default;
};

enum class PoolKind { max, average };

struct PoolSpec {
  TensorShape input;
  TensorShape output;
  PoolKind kind = PoolKind::max;
  std::int64_t stride = 1;
  std::int64_t window_count = 1;  // one pooling window stack per feature map
  std::int64_t window_h = 1;
  std::int64_t window_w = 1;

  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

enum class FcMode { dropout, softmax };

struct FcSpec {
  TensorShape input;
  bool flat_input = false;  // declared as a length rather than C x H x W
  std::int64_t output_len = 1;
  FcMode mode = FcMode::dropout;
  double dropout_rate = 0.0;
  Activation activation = Activation::none;

  std::int64_t input_len() const { return input.element_count(); }
  friend bool operator==(const FcSpec&, const FcSpec&) = default;
};

using LayerSpec = std::variant<ConvSpec, NormSpec, PoolSpec, FcSpec>;

/// Parameter-free reshaping step applied to the predecessor's output before a
/// layer runs; lets a chain list only the layers that are scheduled.
using TransitionStage = std::variant<NormSpec, PoolSpec>;

struct Layer {
  std::string name;
  std::vector<TransitionStage> transition;
  LayerSpec spec;

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct NetworkModel {
  std::string name;
  bool permissive = false;  // floor instead of exact tiling for conv strides
  std::vector<Layer> layers;

  friend bool operator==(const NetworkModel&, const NetworkModel&) = default;
};

enum class ShapeMode { strict, floor };
enum class Direction { forward, backward };

std::string_view to_string(Activation a);
std::string_view to_string(PoolKind k);
std::string_view to_string(FcMode m);
std::string_view to_string(Direction d);
Activation parse_activation(std::string_view s);

std::string_view type_name(const LayerSpec& spec);
TensorShape input_shape(const LayerSpec& spec);
TensorShape output_shape(const LayerSpec& spec);
TensorShape input_shape(const TransitionStage& stage);
TensorShape output_shape(const TransitionStage& stage);

// out = (in + pads - k) / stride + 1 per axis; strict mode demands exact division.
TensorShape infer_conv_output_shape(const TensorShape& input, const KernelShape& kernel,
                                    std::int64_t stride, const Padding& pad,
                                    ShapeMode mode = ShapeMode::strict);

TensorShape infer_pool_output_shape(const TensorShape& input, std::int64_t window_h,
                                    std::int64_t window_w, std::int64_t stride);

// Validated constructors; each throws Error on a tuple invariant violation.
ConvSpec make_conv(const TensorShape& input, const KernelShape& kernel, std::int64_t stride,
                   const Padding& pad, Activation activation,
                   ShapeMode mode = ShapeMode::strict);
NormSpec make_lrn(const TensorShape& input, std::int64_t local_size, double alpha, double beta,
                  double bias_k = 1.0);
PoolSpec make_pool(const TensorShape& input, PoolKind kind, std::int64_t window_h,
                   std::int64_t window_w, std::int64_t stride);
FcSpec make_fc(const TensorShape& input, std::int64_t output_len, FcMode mode,
               double dropout_rate = 0.0, Activation activation = Activation::none);

/// Shape handed to `layer` after its transition stages run on `incoming`.
/// Throws when a stage's declared input does not match what it receives.
TensorShape apply_transition_shapes(const TensorShape& incoming, const Layer& layer);

/// Floating-point operations per image; 1 MAC = 2 FLOPs, bias and activation
/// excluded. Backward is defined for FC layers only.
std::uint64_t count_layer_flops(const LayerSpec& spec, Direction direction);
std::uint64_t count_stage_flops(const TransitionStage& stage);

/// Parses the JSON model format. Throws Error with a position on syntax
/// errors and with the offending values on tuple violations.
NetworkModel parse_model(std::string_view text);
std::string render_model(const NetworkModel& model);
NetworkModel load_model_file(const std::string& path);

struct LayerValidation {
  std::size_t index = 0;
  std::string name;
  std::string type;
  TensorShape declared_output;
  std::optional<TensorShape> inferred_output;
  std::optional<bool> successor_match;  // empty for the last layer
  std::uint64_t forward_flops = 0;
};

struct ValidationReport {
  std::vector<LayerValidation> layers;
  std::vector<std::string> errors;
  std::uint64_t total_forward_flops = 0;
  std::uint64_t total_fc_forward_flops = 0;

  bool ok() const { return errors.empty(); }
};

ValidationReport validate_network(const NetworkModel& model);

}  // namespace cnnlab
