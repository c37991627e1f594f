// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnnlab/runtime.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>

#include "cnnlab/number_format.hpp"

namespace cnnlab {

namespace {

const WeightBlob& require_blob(const NetworkModel& model, const WeightSet& weights,
                               std::size_t layer, BlobKind kind) {
  const LayerSpec& spec = model.layers[layer].spec;
  const std::size_t expected = expected_blob_size(spec, kind);
  const WeightBlob* blob = weights.find(static_cast<std::uint32_t>(layer), kind);
  if (blob == nullptr) {
    throw Error(fmt::format("layer '{}' has no {} blob (expected {} values)",
                            model.layers[layer].name, to_string(kind), expected));
  }
  if (blob->values.size() != expected) {
    throw Error(fmt::format("layer '{}' {} blob has {} values, expected {}",
                            model.layers[layer].name, to_string(kind), blob->values.size(),
                            expected));
  }
  return *blob;
}

double bandwidth_of(const ExecutionPlan& plan, std::string_view owner) {
  return find_device(plan.devices, owner).transfer_bytes_per_s;
}

}  // namespace

std::vector<LayerParams> bind_weights(const NetworkModel& model, const WeightSet& weights) {
  for (const auto& blob : weights.blobs) {
    if (blob.layer >= model.layers.size()) {
      throw Error(fmt::format("weights reference layer {} but model '{}' has {} layers",
                              blob.layer, model.name, model.layers.size()));
    }
  }
  std::vector<LayerParams> params;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& spec = model.layers[i].spec;
    if (std::holds_alternative<ConvSpec>(spec)) {
      params.emplace_back(ConvWeights{require_blob(model, weights, i, BlobKind::conv_kernel).values,
                                      require_blob(model, weights, i, BlobKind::conv_bias).values});
    } else if (const auto* f = std::get_if<FcSpec>(&spec)) {
      params.emplace_back(FcWeights{f->input_len(), f->output_len,
                                    require_blob(model, weights, i, BlobKind::fc_matrix).values,
                                    require_blob(model, weights, i, BlobKind::fc_bias).values});
    } else {
      params.emplace_back(std::monostate{});
    }
  }
  return params;
}

ExecutionPlan build_execution_plan(const NetworkModel& model, const Schedule& schedule,
                                   const WeightSet& weights,
                                   std::span<const DeviceProfile> devices) {
  const ValidationReport validation = validate_network(model);
  if (!validation.ok()) {
    throw Error(fmt::format("model '{}' is invalid: {}", model.name, validation.errors.front()));
  }
  ExecutionPlan plan;
  plan.model = model;
  // Re-derive transfers so a hand-built schedule cannot disagree with the model.
  plan.schedule = make_schedule(model, schedule.assignment);
  evaluate_schedule(model, plan.schedule, devices);
  plan.devices.assign(devices.begin(), devices.end());
  plan.params = bind_weights(model, weights);
  const std::size_t n = model.layers.size();
  for (std::size_t i = 0; i < n; ++i) {
    const TensorShape shape =
        i == 0 ? input_shape(model.layers[0].spec) : output_shape(model.layers[i - 1].spec);
    plan.buffer_plan.push_back({i, shape, plan.schedule.assignment[i]});
  }
  plan.buffer_plan.push_back(
      {n, output_shape(model.layers.back().spec), std::string(kHostResidency)});
  return plan;
}

const BufferSpace::Slot& BufferSpace::slot(std::size_t id) const {
  if (id >= slots_.size()) throw Error(fmt::format("unknown buffer b{}", id));
  return slots_[id];
}

void BufferSpace::produce(std::size_t id, std::string_view owner, Tensor value) {
  if (id >= slots_.size()) throw Error(fmt::format("unknown buffer b{}", id));
  if (slots_[id].value) throw Error(fmt::format("buffer b{} produced twice", id));
  slots_[id].value = std::move(value);
  slots_[id].owner = owner;
}

bool BufferSpace::produced(std::size_t id) const { return slot(id).value.has_value(); }

const std::string& BufferSpace::residency(std::size_t id) const {
  if (!produced(id)) throw Error(fmt::format("buffer b{} has not been produced", id));
  return slots_[id].owner;
}

const Tensor& BufferSpace::value(std::size_t id) const {
  if (!produced(id)) throw Error(fmt::format("buffer b{} has not been produced", id));
  return *slots_[id].value;
}

void BufferSpace::move_to(std::size_t id, std::string_view owner) {
  if (!produced(id)) throw Error(fmt::format("buffer b{} has not been produced", id));
  slots_[id].owner = owner;
}

TransferRecord transfer_buffer(BufferSpace& space, std::size_t id, std::string_view from,
                               std::string_view to, const ExecutionPlan& plan) {
  if (!space.produced(id)) throw Error(fmt::format("buffer b{} has not been produced", id));
  if (space.residency(id) != from) {
    throw Error(fmt::format("buffer b{} is resident on '{}', not '{}'", id, space.residency(id),
                            from));
  }
  TransferRecord r{id, std::string(from), std::string(to), 0, 0.0};
  if (from == to) return r;
  r.bytes = static_cast<std::uint64_t>(space.value(id).size()) * kBytesPerElement;
  const bool from_host = from == kHostResidency;
  const bool to_host = to == kHostResidency;
  const double bw_from = from_host ? bandwidth_of(plan, to) : bandwidth_of(plan, from);
  const double bw_to = to_host ? bw_from : bandwidth_of(plan, to);
  r.seconds = transfer_seconds(r.bytes, bw_from, bw_to);
  space.move_to(id, to);
  return r;
}

Tensor run_layer(const Layer& layer, const LayerParams& params, const Tensor& input) {
  Tensor x = input;
  for (const auto& stage : layer.transition) {
    x = std::visit(
        [&x](const auto& s) -> Tensor {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, NormSpec>) {
            return lrn_forward(x, s);
          } else {
            return pool_forward(x, s);
          }
        },
        stage);
  }
  return std::visit(
      [&](const auto& spec) -> Tensor {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, ConvSpec>) {
          return conv2d_forward_gemm(x, spec, std::get<ConvWeights>(params));
        } else if constexpr (std::is_same_v<T, NormSpec>) {
          return lrn_forward(x, spec);
        } else if constexpr (std::is_same_v<T, PoolSpec>) {
          return pool_forward(x, spec);
        } else {
          if (static_cast<std::int64_t>(x.size()) != spec.input_len()) {
            throw Error(fmt::format("layer '{}': input has {} elements, expected {}", layer.name,
                                    x.size(), spec.input_len()));
          }
          Tensor y = fc_forward(x, std::get<FcWeights>(params), spec.activation);
          return spec.mode == FcMode::softmax ? softmax(y) : dropout_inference(y, spec.dropout_rate);
        }
      },
      layer.spec);
}

Tensor run_network(const NetworkModel& model, std::span<const LayerParams> params,
                   const Tensor& input) {
  if (params.size() != model.layers.size()) throw Error("parameter list does not match the model");
  Tensor x = input;
  for (std::size_t i = 0; i < model.layers.size(); ++i) x = run_layer(model.layers[i], params[i], x);
  return x;
}

ExecutionResult execute(const ExecutionPlan& plan, const Tensor& input) {
  const auto& layers = plan.model.layers;
  const std::size_t n = layers.size();
  const TensorShape expected = input_shape(layers.front().spec);
  if (input.size() != static_cast<std::size_t>(expected.element_count())) {
    throw Error(fmt::format("input shape {} does not match the first layer's input {}",
                            input.shape.to_string(), expected.to_string()));
  }
  const ScheduleCost cost = evaluate_schedule(plan.model, plan.schedule, plan.devices);

  ExecutionResult result;
  ProfileReport& report = result.report;
  report.model = plan.model.name;
  BufferSpace space(n + 1);
  space.produce(0, kHostResidency, Tensor(expected, input.data));

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& device = plan.schedule.assignment[i];
    report.transfers.push_back(transfer_buffer(space, i, space.residency(i), device, plan));
    const Tensor& in = space.value(i);
    Tensor out = run_layer(layers[i], plan.params[i], in);
    const TensorShape declared = output_shape(layers[i].spec);
    if (out.size() != static_cast<std::size_t>(declared.element_count())) {
      throw Error(fmt::format("layer '{}' produced {} elements, expected {}", layers[i].name,
                              out.size(), declared.element_count()));
    }
    space.produce(i + 1, device, std::move(out));
  }
  report.transfers.push_back(
      transfer_buffer(space, n, space.residency(n), kHostResidency, plan));
  report.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  // Drop zero-cost same-owner records; only real moves are reported.
  std::erase_if(report.transfers, [](const TransferRecord& r) { return r.from == r.to; });

  for (std::size_t i = 0; i < n; ++i) {
    const LayerCostEstimate& e = cost.per_layer[i];
    const DensityMetrics d = density_metrics(e);
    report.rows.push_back({layers[i].name, plan.schedule.assignment[i], e.flops, e.time_s,
                           e.power_w, e.energy_j, e.throughput_gflops, d.gflops_per_watt,
                           d.gflop_per_joule});
    report.total_flops += e.flops;
  }
  report.total_time_s = cost.total_time_s;
  report.total_energy_j = cost.total_energy_j;
  report.peak_power_w = cost.peak_power_w;
  report.transfer_time_s = cost.transfer_time_s;
  report.host_io_time_s = cost.host_io_time_s;
  result.output = space.value(n);
  return result;
}

std::vector<ExecutionResult> execute_batch(const ExecutionPlan& plan,
                                           std::span<const Tensor> inputs) {
  std::vector<ExecutionResult> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(execute(plan, x));
  return out;
}

std::string render_report(const ProfileReport& report) {
  const std::vector<std::string> header{"layer",  "device", "flops",  "time_s",     "power_w",
                                        "energy_j", "gflops", "gflops/w", "gflop/j"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : report.rows) {
    cells.push_back({r.layer, r.device, fmt::format("{}", r.flops), format_number(r.time_s),
                     format_number(r.power_w), format_number(r.energy_j), format_number(r.gflops),
                     format_number(r.gflops_per_w), format_number(r.gflop_per_j)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string s;
    for (std::size_t c = 0; c < row.size(); ++c) {
      // Text columns left-aligned, numbers right-aligned.
      s += c < 2 ? fmt::format("{:<{}}", row[c], width[c]) : fmt::format("{:>{}}", row[c], width[c]);
      if (c + 1 < row.size()) s += "  ";
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out = line(header);
  for (const auto& row : cells) out += line(row);
  out += "\n";
  out += fmt::format("total flops      {}\n", report.total_flops);
  out += fmt::format("total time_s     {}\n", format_number(report.total_time_s));
  out += fmt::format("  transfer_s     {}\n", format_number(report.transfer_time_s));
  out += fmt::format("  host_io_s      {}\n", format_number(report.host_io_time_s));
  out += fmt::format("total energy_j   {}\n", format_number(report.total_energy_j));
  out += fmt::format("peak power_w     {}\n", format_number(report.peak_power_w));
  return out;
}

std::string render_report_csv(const ProfileReport& report) {
  std::string out = "layer,device,flops,time_s,power_w,energy_j,gflops,gflops_per_w,gflop_per_j\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.layer, r.device, r.flops,
                       format_number(r.time_s), format_number(r.power_w),
                       format_number(r.energy_j), format_number(r.gflops),
                       format_number(r.gflops_per_w), format_number(r.gflop_per_j));
  }
  return out;
}

}  // namespace cnnlab
