// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytical per-device cost models. A device is described by an effective
// throughput and an average power for each layer class, a fixed per-layer
// launch latency and a host-link bandwidth. Layer time is linear in FLOPs:
//
//   time = flops / (gflops * 1e9) + overhead
//   energy = power * time

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cnnlab/model.hpp"

namespace cnnlab {

enum class LayerClass { conv = 0, fc_forward, fc_backward, pool, lrn };
inline constexpr std::size_t kLayerClassCount = 5;
inline constexpr std::array<LayerClass, kLayerClassCount> kAllLayerClasses{
    LayerClass::conv, LayerClass::fc_forward, LayerClass::fc_backward, LayerClass::pool,
    LayerClass::lrn};

/// File key of a class: "conv", "fc_forward", "fc_backward", "pool", "lrn".
std::string_view to_string(LayerClass c);
LayerClass parse_layer_class(std::string_view s);
LayerClass layer_class(const LayerSpec& spec, Direction direction);

struct ClassRate {
  double gflops = 0.0;
  double watts = 0.0;

  friend bool operator==(const ClassRate&, const ClassRate&) = default;
};

struct DeviceProfile {
  std::string name;
  std::array<std::optional<ClassRate>, kLayerClassCount> rates{};
  double overhead_s = 0.0;
  double transfer_bytes_per_s = 0.0;
  std::optional<double> clock_mhz;

  bool supports(LayerClass c) const { return rates[static_cast<std::size_t>(c)].has_value(); }
  /// Throws Error when the class is not supported by this device.
  const ClassRate& rate(LayerClass c) const;
  void set_rate(LayerClass c, ClassRate r) { rates[static_cast<std::size_t>(c)] = r; }

  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

/// Throws on non-positive throughput, power or bandwidth, or negative overhead.
void check_profile(const DeviceProfile& profile);

/// Parses the JSON profile format; all five classes are required.
DeviceProfile load_device_profile(std::string_view text);
DeviceProfile load_device_profile_file(const std::string& path);
std::string render_profile(const DeviceProfile& profile);

struct LayerCostEstimate {
  double time_s = 0.0;
  double power_w = 0.0;
  double energy_j = 0.0;
  double throughput_gflops = 0.0;
  std::uint64_t flops = 0;

  friend bool operator==(const LayerCostEstimate&, const LayerCostEstimate&) = default;
};

struct DensityMetrics {
  double gflops_per_watt = 0.0;
  double gflop_per_joule = 0.0;
};

double estimate_time(std::uint64_t flops, const ClassRate& rate, double overhead_s);
double estimate_layer_time(const LayerSpec& layer, Direction direction,
                           const DeviceProfile& profile);
double estimate_layer_energy(double time_s, double power_w);
LayerCostEstimate estimate_layer_cost(const LayerSpec& layer, Direction direction,
                                      const DeviceProfile& profile);
DensityMetrics density_metrics(const LayerCostEstimate& estimate);

/// Totals over a group of layer estimates. Throughput is total FLOPs over total
/// time and power is the time-weighted mean, so density = GFLOP / J.
struct CostAggregate {
  std::uint64_t flops = 0;
  double time_s = 0.0;
  double energy_j = 0.0;
  double throughput_gflops = 0.0;
  double mean_power_w = 0.0;
  DensityMetrics density;
};

CostAggregate aggregate_costs(std::span<const LayerCostEstimate> estimates);

struct Measurement {
  LayerSpec layer;
  Direction direction = Direction::forward;
  double time_s = 0.0;
  double power_w = 0.0;
};

struct CalibrationOptions {
  std::string name;
  double transfer_bytes_per_s = 8e9;
  double overhead_s = 0.0;
  std::optional<double> clock_mhz;
  /// Classes that must be covered by at least one measurement.
  std::vector<LayerClass> required;
};

/// Per class: throughput = mean of flops/time, power = mean of measured power.
/// Classes without measurements stay unsupported.
DeviceProfile calibrate_profile(std::span<const Measurement> measurements,
                                const CalibrationOptions& options);

/// Measurement fixture: {"device", "transfer_bytes_per_s", "measurements":
/// [{"layer": <name in model>, "direction", "time_s", "watts"}]}.
std::pair<CalibrationOptions, std::vector<Measurement>> parse_measurements(
    std::string_view text, const NetworkModel& model);

}  // namespace cnnlab
