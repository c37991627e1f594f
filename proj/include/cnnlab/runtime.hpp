// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Executes a scheduled chain on the reference kernels. Every intermediate
// tensor lives in one host-side buffer table; each buffer carries a residency
// tag naming the device (or the host) that currently owns it, and moving a
// buffer between owners is charged with the host-link transfer model.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cnnlab/device.hpp"
#include "cnnlab/kernels.hpp"
#include "cnnlab/model.hpp"
#include "cnnlab/scheduler.hpp"
#include "cnnlab/weights.hpp"

namespace cnnlab {

inline constexpr std::string_view kHostResidency = "host";

using LayerParams = std::variant<std::monostate, ConvWeights, FcWeights>;

/// Typed per-layer parameters; throws naming the layer and the expected count
/// when a blob is missing or mis-sized.
std::vector<LayerParams> bind_weights(const NetworkModel& model, const WeightSet& weights);

/// Buffer i feeds layer i (buffer 0 is the network input); the last buffer is
/// the network output.
struct BufferPlanEntry {
  std::size_t buffer = 0;
  TensorShape shape;
  std::string residency;  // owner when the consumer runs; "host" for the output

  friend bool operator==(const BufferPlanEntry&, const BufferPlanEntry&) = default;
};

struct ExecutionPlan {
  NetworkModel model;
  Schedule schedule;
  std::vector<LayerParams> params;
  std::vector<BufferPlanEntry> buffer_plan;
  std::vector<DeviceProfile> devices;

  std::size_t planned_transfers() const { return schedule.transfers.size(); }
};

ExecutionPlan build_execution_plan(const NetworkModel& model, const Schedule& schedule,
                                   const WeightSet& weights, std::span<const DeviceProfile> devices);

struct TransferRecord {
  std::size_t buffer = 0;
  std::string from;
  std::string to;
  std::uint64_t bytes = 0;
  double seconds = 0.0;
};

/// Residency table for the buffers of one execution.
class BufferSpace {
 public:
  explicit BufferSpace(std::size_t count) : slots_(count) {}

  void produce(std::size_t id, std::string_view owner, Tensor value);
  bool produced(std::size_t id) const;
  const std::string& residency(std::size_t id) const;
  const Tensor& value(std::size_t id) const;
  void move_to(std::size_t id, std::string_view owner);

 private:
  struct Slot {
    std::optional<Tensor> value;
    std::string owner;
  };
  const Slot& slot(std::size_t id) const;
  std::vector<Slot> slots_;
};

/// Moves a buffer between owners (device names or "host"). A same-owner move
/// costs nothing. Throws when the buffer is unproduced or lives elsewhere.
TransferRecord transfer_buffer(BufferSpace& space, std::size_t id, std::string_view from,
                               std::string_view to, const ExecutionPlan& plan);

struct ReportRow {
  std::string layer;
  std::string device;
  std::uint64_t flops = 0;
  double time_s = 0.0;
  double power_w = 0.0;
  double energy_j = 0.0;
  double gflops = 0.0;
  double gflops_per_w = 0.0;
  double gflop_per_j = 0.0;
};

struct ProfileReport {
  std::string model;
  std::vector<ReportRow> rows;
  std::vector<TransferRecord> transfers;  // includes host upload and download
  std::uint64_t total_flops = 0;
  double total_time_s = 0.0;
  double total_energy_j = 0.0;
  double peak_power_w = 0.0;
  double transfer_time_s = 0.0;
  double host_io_time_s = 0.0;
  double wall_clock_s = 0.0;  // host time of the reference computation, informational
};

/// Runs one layer, including its transition stages, on the reference kernels.
Tensor run_layer(const Layer& layer, const LayerParams& params, const Tensor& input);

/// Sequential composition of run_layer over the whole chain.
Tensor run_network(const NetworkModel& model, std::span<const LayerParams> params,
                   const Tensor& input);

struct ExecutionResult {
  Tensor output;
  ProfileReport report;
};

ExecutionResult execute(const ExecutionPlan& plan, const Tensor& input);

/// One image at a time; modeled costs in the report are per image.
std::vector<ExecutionResult> execute_batch(const ExecutionPlan& plan,
                                           std::span<const Tensor> inputs);

/// Aligned human-readable table.
std::string render_report(const ProfileReport& report);
/// `layer,device,flops,time_s,power_w,energy_j,gflops,gflops_per_w,gflop_per_j`.
std::string render_report_csv(const ProfileReport& report);

}  // namespace cnnlab
