// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnnlab/device.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace cnnlab {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

double number(const json& obj, std::string_view key, std::string_view where) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) throw Error(fmt::format("{}: missing '{}'", where, key));
  if (!it->is_number()) throw Error(fmt::format("{}: '{}' must be a number", where, key));
  return it->get<double>();
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw Error(fmt::format("syntax error at byte {}: {}", e.byte, e.what()));
  }
}

}  // namespace

std::string_view to_string(LayerClass c) {
  switch (c) {
    case LayerClass::conv: return "conv";
    case LayerClass::fc_forward: return "fc_forward";
    case LayerClass::fc_backward: return "fc_backward";
    case LayerClass::pool: return "pool";
    case LayerClass::lrn: return "lrn";
  }
  return "conv";
}

LayerClass parse_layer_class(std::string_view s) {
  for (LayerClass c : kAllLayerClasses) {
    if (to_string(c) == s) return c;
  }
  throw Error(fmt::format("unknown layer class '{}'", s));
}

LayerClass layer_class(const LayerSpec& spec, Direction direction) {
  if (const auto* fc = std::get_if<FcSpec>(&spec); fc != nullptr) {
    return direction == Direction::forward ? LayerClass::fc_forward : LayerClass::fc_backward;
  }
  if (direction == Direction::backward) throw Error("unsupported direction");
  if (std::holds_alternative<ConvSpec>(spec)) return LayerClass::conv;
  if (std::holds_alternative<PoolSpec>(spec)) return LayerClass::pool;
  return LayerClass::lrn;
}

const ClassRate& DeviceProfile::rate(LayerClass c) const {
  const auto& r = rates[static_cast<std::size_t>(c)];
  if (!r) {
    throw Error(fmt::format("device '{}' does not support layer class {}", name, to_string(c)));
  }
  return *r;
}

void check_profile(const DeviceProfile& p) {
  if (p.name.empty()) throw Error("device profile has no name");
  for (LayerClass c : kAllLayerClasses) {
    if (!p.supports(c)) continue;
    const ClassRate& r = p.rate(c);
    if (!positive_finite(r.gflops)) {
      throw Error(fmt::format("device '{}': {} throughput must be > 0, got {}", p.name,
                              to_string(c), r.gflops));
    }
    if (!positive_finite(r.watts)) {
      throw Error(fmt::format("device '{}': {} power must be > 0, got {}", p.name, to_string(c),
                              r.watts));
    }
  }
  if (!(p.overhead_s >= 0.0) || !std::isfinite(p.overhead_s)) {
    throw Error(fmt::format("device '{}': overhead must be >= 0", p.name));
  }
  if (!positive_finite(p.transfer_bytes_per_s)) {
    throw Error(fmt::format("device '{}': transfer bandwidth must be > 0", p.name));
  }
  if (p.clock_mhz && !positive_finite(*p.clock_mhz)) {
    throw Error(fmt::format("device '{}': clock must be > 0", p.name));
  }
}

DeviceProfile load_device_profile(std::string_view text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw Error("profile: top level must be an object");
  for (const auto& item : doc.items()) {
    const auto& k = item.key();
    if (k != "name" && k != "classes" && k != "overhead_s" && k != "transfer_bytes_per_s" &&
        k != "clock_mhz") {
      throw Error(fmt::format("profile: unknown key '{}'", k));
    }
  }
  DeviceProfile p;
  if (!doc.contains("name") || !doc["name"].is_string()) {
    throw Error("profile: missing string 'name'");
  }
  p.name = doc["name"].get<std::string>();
  const std::string where = fmt::format("profile '{}'", p.name);
  auto classes = doc.find("classes");
  if (classes == doc.end() || !classes->is_object()) {
    throw Error(fmt::format("{}: missing 'classes' object", where));
  }
  for (const auto& item : classes->items()) {
    const LayerClass c = parse_layer_class(item.key());
    const std::string cw = fmt::format("{} class {}", where, item.key());
    if (!item.value().is_object()) throw Error(fmt::format("{}: must be an object", cw));
    for (const auto& field : item.value().items()) {
      if (field.key() != "gflops" && field.key() != "watts") {
        throw Error(fmt::format("{}: unknown key '{}'", cw, field.key()));
      }
    }
    p.set_rate(c, ClassRate{number(item.value(), "gflops", cw), number(item.value(), "watts", cw)});
  }
  for (LayerClass c : kAllLayerClasses) {
    if (!p.supports(c)) throw Error(fmt::format("{}: missing layer class '{}'", where, to_string(c)));
  }
  p.overhead_s = doc.contains("overhead_s") ? number(doc, "overhead_s", where) : 0.0;
  p.transfer_bytes_per_s = number(doc, "transfer_bytes_per_s", where);
  if (doc.contains("clock_mhz")) p.clock_mhz = number(doc, "clock_mhz", where);
  check_profile(p);
  return p;
}

DeviceProfile load_device_profile_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open profile file '{}'", path));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return load_device_profile(buffer.str());
  } catch (const Error& e) {
    throw Error(fmt::format("{}: {}", path, e.what()));
  }
}

std::string render_profile(const DeviceProfile& p) {
  ordered_json doc;
  doc["name"] = p.name;
  ordered_json classes = ordered_json::object();
  for (LayerClass c : kAllLayerClasses) {
    if (!p.supports(c)) continue;
    classes[std::string(to_string(c))] = {{"gflops", p.rate(c).gflops}, {"watts", p.rate(c).watts}};
  }
  doc["classes"] = std::move(classes);
  doc["overhead_s"] = p.overhead_s;
  doc["transfer_bytes_per_s"] = p.transfer_bytes_per_s;
  if (p.clock_mhz) doc["clock_mhz"] = *p.clock_mhz;
  return doc.dump(2) + "\n";
}

double estimate_time(std::uint64_t flops, const ClassRate& rate, double overhead_s) {
  return static_cast<double>(flops) / (rate.gflops * 1e9) + overhead_s;
}

double estimate_layer_time(const LayerSpec& layer, Direction direction,
                           const DeviceProfile& profile) {
  const ClassRate& rate = profile.rate(layer_class(layer, direction));
  return estimate_time(count_layer_flops(layer, direction), rate, profile.overhead_s);
}

double estimate_layer_energy(double time_s, double power_w) {
  if (time_s < 0.0) throw Error(fmt::format("negative time {}", time_s));
  return power_w * time_s;
}

LayerCostEstimate estimate_layer_cost(const LayerSpec& layer, Direction direction,
                                      const DeviceProfile& profile) {
  const ClassRate& rate = profile.rate(layer_class(layer, direction));
  LayerCostEstimate e;
  e.flops = count_layer_flops(layer, direction);
  e.time_s = estimate_time(e.flops, rate, profile.overhead_s);
  e.power_w = rate.watts;
  e.energy_j = estimate_layer_energy(e.time_s, e.power_w);
  e.throughput_gflops = e.time_s > 0.0 ? static_cast<double>(e.flops) / e.time_s / 1e9 : 0.0;
  return e;
}

DensityMetrics density_metrics(const LayerCostEstimate& e) {
  DensityMetrics d;
  d.gflops_per_watt = e.power_w > 0.0 ? e.throughput_gflops / e.power_w : 0.0;
  d.gflop_per_joule = e.energy_j > 0.0 ? static_cast<double>(e.flops) / 1e9 / e.energy_j : 0.0;
  return d;
}

CostAggregate aggregate_costs(std::span<const LayerCostEstimate> estimates) {
  CostAggregate a;
  for (const auto& e : estimates) {
    a.flops += e.flops;
    a.time_s += e.time_s;
    a.energy_j += e.energy_j;
  }
  if (a.time_s > 0.0) {
    a.throughput_gflops = static_cast<double>(a.flops) / a.time_s / 1e9;
    a.mean_power_w = a.energy_j / a.time_s;
  }
  if (a.mean_power_w > 0.0) a.density.gflops_per_watt = a.throughput_gflops / a.mean_power_w;
  if (a.energy_j > 0.0) a.density.gflop_per_joule = static_cast<double>(a.flops) / 1e9 / a.energy_j;
  return a;
}

DeviceProfile calibrate_profile(std::span<const Measurement> measurements,
                                const CalibrationOptions& options) {
  if (measurements.empty()) throw Error("calibration: no measurements");
  struct Accum {
    double throughput_sum = 0.0;
    double power_sum = 0.0;
    std::size_t count = 0;
  };
  std::array<Accum, kLayerClassCount> acc{};
  for (const auto& m : measurements) {
    if (!positive_finite(m.time_s)) throw Error("calibration: measured time must be > 0");
    if (!positive_finite(m.power_w)) throw Error("calibration: measured power must be > 0");
    const LayerClass c = layer_class(m.layer, m.direction);
    const double flops = static_cast<double>(count_layer_flops(m.layer, m.direction));
    // Throughput attributable to compute once the launch latency is removed.
    const double busy = m.time_s - options.overhead_s;
    if (!(busy > 0.0)) throw Error("calibration: measured time does not exceed the overhead");
    auto& a = acc[static_cast<std::size_t>(c)];
    a.throughput_sum += flops / busy / 1e9;
    a.power_sum += m.power_w;
    ++a.count;
  }
  for (LayerClass c : options.required) {
    if (acc[static_cast<std::size_t>(c)].count == 0) {
      throw Error(fmt::format("calibration: empty class {}", to_string(c)));
    }
  }
  DeviceProfile p;
  p.name = options.name;
  p.overhead_s = options.overhead_s;
  p.transfer_bytes_per_s = options.transfer_bytes_per_s;
  p.clock_mhz = options.clock_mhz;
  for (LayerClass c : kAllLayerClasses) {
    const auto& a = acc[static_cast<std::size_t>(c)];
    if (a.count == 0) continue;
    const auto n = static_cast<double>(a.count);
    p.set_rate(c, ClassRate{a.throughput_sum / n, a.power_sum / n});
  }
  check_profile(p);
  return p;
}

std::pair<CalibrationOptions, std::vector<Measurement>> parse_measurements(
    std::string_view text, const NetworkModel& model) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw Error("measurements: top level must be an object");
  CalibrationOptions options;
  if (!doc.contains("device") || !doc["device"].is_string()) {
    throw Error("measurements: missing string 'device'");
  }
  options.name = doc["device"].get<std::string>();
  if (doc.contains("transfer_bytes_per_s")) {
    options.transfer_bytes_per_s = number(doc, "transfer_bytes_per_s", "measurements");
  }
  if (doc.contains("overhead_s")) options.overhead_s = number(doc, "overhead_s", "measurements");
  if (doc.contains("clock_mhz")) options.clock_mhz = number(doc, "clock_mhz", "measurements");
  auto list = doc.find("measurements");
  if (list == doc.end() || !list->is_array()) {
    throw Error("measurements: missing 'measurements' array");
  }
  std::vector<Measurement> out;
  for (const auto& row : *list) {
    if (!row.contains("layer") || !row["layer"].is_string()) {
      throw Error("measurements: entry without a layer name");
    }
    const std::string name = row["layer"].get<std::string>();
    const Layer* layer = nullptr;
    for (const auto& l : model.layers) {
      if (l.name == name) layer = &l;
    }
    if (layer == nullptr) {
      throw Error(fmt::format("measurements: model '{}' has no layer '{}'", model.name, name));
    }
    Measurement m;
    m.layer = layer->spec;
    const std::string dir = row.value("direction", std::string("forward"));
    if (dir == "forward") {
      m.direction = Direction::forward;
    } else if (dir == "backward") {
      m.direction = Direction::backward;
    } else {
      throw Error(fmt::format("measurements: unknown direction '{}'", dir));
    }
    m.time_s = number(row, "time_s", name);
    m.power_w = number(row, "watts", name);
    out.push_back(std::move(m));
  }
  return {options, out};
}

}  // namespace cnnlab
