// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Layer-to-device assignment for a sequential chain. Costs follow a strictly
// sequential execution model: the input starts on the host, every device
// change moves the crossing tensor through the host link, and the final
// output returns to the host.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cnnlab/device.hpp"
#include "cnnlab/model.hpp"

namespace cnnlab {

enum class ObjectiveKind { min_latency, min_peak_power, min_energy, max_gflops_per_watt };

struct Objective {
  ObjectiveKind kind = ObjectiveKind::min_latency;
  std::optional<double> power_budget_w;
};

/// CLI spelling: "latency", "peak-power", "energy", "density".
ObjectiveKind parse_objective(std::string_view s);
std::string_view to_string(ObjectiveKind kind);

/// Tensor crossing between layer `boundary - 1` and layer `boundary`.
struct Transfer {
  std::size_t boundary = 0;
  std::uint64_t bytes = 0;

  friend bool operator==(const Transfer&, const Transfer&) = default;
};

struct Schedule {
  std::vector<std::string> assignment;
  std::vector<Transfer> transfers;

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// Builds a schedule, deriving one transfer per adjacent device change.
Schedule make_schedule(const NetworkModel& model, std::vector<std::string> assignment);
Schedule single_device_schedule(const NetworkModel& model, const std::string& device);

struct TransferCost {
  std::size_t boundary = 0;
  std::uint64_t bytes = 0;
  double seconds = 0.0;
};

struct ScheduleCost {
  double total_time_s = 0.0;
  double total_energy_j = 0.0;
  double peak_power_w = 0.0;
  double transfer_time_s = 0.0;  // inter-device boundaries only
  double host_io_time_s = 0.0;   // input upload plus output download
  std::vector<LayerCostEstimate> per_layer;
  std::vector<TransferCost> transfers;
};

inline constexpr std::uint64_t kBytesPerElement = 4;
inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 20;

/// bytes / min(bandwidths); either endpoint may be the host (pass the other
/// device's bandwidth twice).
double transfer_seconds(std::uint64_t bytes, double bandwidth_a, double bandwidth_b);

/// Returns a copy sorted by name; throws on duplicate names or an empty set.
std::vector<DeviceProfile> sorted_devices(std::span<const DeviceProfile> devices);
const DeviceProfile& find_device(std::span<const DeviceProfile> devices, std::string_view name);

ScheduleCost evaluate_schedule(const NetworkModel& model, const Schedule& schedule,
                               std::span<const DeviceProfile> devices);

/// Natural value of an objective (seconds, watts, joules or GFLOPS/W).
/// Density is total GFLOP / total time / peak power.
double objective_value(const ScheduleCost& cost, ObjectiveKind kind);

/// Exhaustive oracle: lexicographically smallest assignment (device-name
/// order) among the optimal ones. Throws when |devices|^|layers| > cap.
Schedule enumerate_all_schedules(const NetworkModel& model, std::span<const DeviceProfile> devices,
                                 const Objective& objective,
                                 std::uint64_t cap = kDefaultEnumerationCap);

/// Polynomial solver with the same optimal objective value as the oracle.
Schedule dp_schedule(const NetworkModel& model, std::span<const DeviceProfile> devices,
                     const Objective& objective);

struct FrontierPoint {
  Schedule schedule;
  ScheduleCost cost;
};

/// Schedules not dominated in (time, energy, peak power), fastest first.
std::vector<FrontierPoint> pareto_frontier(const NetworkModel& model,
                                           std::span<const DeviceProfile> devices,
                                           std::uint64_t cap = kDefaultEnumerationCap);

struct ScheduleFile {
  std::string model;
  std::vector<std::string> assignment;
};

std::string render_schedule(const NetworkModel& model, const Schedule& schedule);
ScheduleFile parse_schedule(std::string_view text);
/// Loads a schedule file and checks it against the model and device set.
Schedule load_schedule_file(const std::string& path, const NetworkModel& model,
                            std::span<const DeviceProfile> devices);

}  // namespace cnnlab
