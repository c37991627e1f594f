// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnnlab/scheduler.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

namespace cnnlab {

namespace {

// Per-(layer, device) costs shared by evaluation, enumeration and the DP so
// all three accumulate bit-identical values.
struct CostTables {
  std::size_t layers = 0;
  std::size_t devices = 0;
  std::vector<std::string> names;
  std::vector<LayerCostEstimate> estimates;
  std::vector<char> supported;
  std::vector<std::uint64_t> crossing_bytes;  // [i] for the boundary before layer i
  std::vector<double> crossing;               // [i][from][to]
  std::vector<double> host_in;
  std::vector<double> host_out;
  std::uint64_t total_flops = 0;

  std::size_t at(std::size_t i, std::size_t d) const { return i * devices + d; }
  double time(std::size_t i, std::size_t d) const { return estimates[at(i, d)].time_s; }
  double energy(std::size_t i, std::size_t d) const { return estimates[at(i, d)].energy_j; }
  double power(std::size_t i, std::size_t d) const { return estimates[at(i, d)].power_w; }
  bool ok(std::size_t i, std::size_t d) const { return supported[at(i, d)] != 0; }
  double xfer(std::size_t i, std::size_t from, std::size_t to) const {
    return crossing[(i * devices + from) * devices + to];
  }
};

struct Totals {
  double time = 0.0;
  double energy = 0.0;
  double peak = 0.0;
};

using Assignment = std::vector<std::size_t>;
using Mask = std::function<bool(std::size_t, std::size_t)>;

std::uint64_t tensor_bytes(const TensorShape& s) {
  return static_cast<std::uint64_t>(s.element_count()) * kBytesPerElement;
}

CostTables build_tables(const NetworkModel& model, std::span<const DeviceProfile> sorted) {
  if (model.layers.empty()) throw Error("empty network");
  CostTables t;
  t.layers = model.layers.size();
  t.devices = sorted.size();
  for (const auto& d : sorted) t.names.push_back(d.name);
  t.estimates.resize(t.layers * t.devices);
  t.supported.resize(t.layers * t.devices, 0);
  for (std::size_t i = 0; i < t.layers; ++i) {
    const LayerSpec& spec = model.layers[i].spec;
    t.total_flops += count_layer_flops(spec, Direction::forward);
    const LayerClass c = layer_class(spec, Direction::forward);
    for (std::size_t d = 0; d < t.devices; ++d) {
      if (!sorted[d].supports(c)) continue;
      t.estimates[t.at(i, d)] = estimate_layer_cost(spec, Direction::forward, sorted[d]);
      t.supported[t.at(i, d)] = 1;
    }
  }
  t.crossing_bytes.resize(t.layers, 0);
  t.crossing.resize(t.layers * t.devices * t.devices, 0.0);
  for (std::size_t i = 1; i < t.layers; ++i) {
    t.crossing_bytes[i] = tensor_bytes(output_shape(model.layers[i - 1].spec));
    for (std::size_t p = 0; p < t.devices; ++p) {
      for (std::size_t d = 0; d < t.devices; ++d) {
        if (p == d) continue;
        t.crossing[(i * t.devices + p) * t.devices + d] =
            transfer_seconds(t.crossing_bytes[i], sorted[p].transfer_bytes_per_s,
                             sorted[d].transfer_bytes_per_s);
      }
    }
  }
  const std::uint64_t in_bytes = tensor_bytes(input_shape(model.layers.front().spec));
  const std::uint64_t out_bytes = tensor_bytes(output_shape(model.layers.back().spec));
  for (const auto& d : sorted) {
    t.host_in.push_back(transfer_seconds(in_bytes, d.transfer_bytes_per_s, d.transfer_bytes_per_s));
    t.host_out.push_back(
        transfer_seconds(out_bytes, d.transfer_bytes_per_s, d.transfer_bytes_per_s));
  }
  return t;
}

// Sequential chain: upload, then per layer (crossing, compute), then download.
Totals chain_totals(const CostTables& t, const Assignment& a) {
  Totals r;
  r.time = t.host_in[a[0]] + t.time(0, a[0]);
  r.energy = t.energy(0, a[0]);
  r.peak = t.power(0, a[0]);
  for (std::size_t i = 1; i < t.layers; ++i) {
    r.time = r.time + t.xfer(i, a[i - 1], a[i]);
    r.time = r.time + t.time(i, a[i]);
    r.energy = r.energy + t.energy(i, a[i]);
    r.peak = std::max(r.peak, t.power(i, a[i]));
  }
  r.time = r.time + t.host_out[a.back()];
  return r;
}

double density(std::uint64_t flops, double time, double peak) {
  if (!(time > 0.0) || !(peak > 0.0)) return 0.0;
  return static_cast<double>(flops) / 1e9 / time / peak;
}

// Lower is better for every objective.
double score(const Totals& r, ObjectiveKind kind, std::uint64_t flops) {
  switch (kind) {
    case ObjectiveKind::min_latency: return r.time;
    case ObjectiveKind::min_peak_power: return r.peak;
    case ObjectiveKind::min_energy: return r.energy;
    case ObjectiveKind::max_gflops_per_watt: return -density(flops, r.time, r.peak);
  }
  return r.time;
}

Mask budget_mask(const CostTables& t, const Objective& objective) {
  if (objective.power_budget_w && !(*objective.power_budget_w > 0.0)) {
    throw Error(fmt::format("power budget must be > 0, got {}", *objective.power_budget_w));
  }
  const std::optional<double> budget = objective.power_budget_w;
  return [&t, budget](std::size_t i, std::size_t d) {
    return t.ok(i, d) && (!budget || t.power(i, d) <= *budget);
  };
}

[[noreturn]] void throw_infeasible(const NetworkModel& model, const CostTables& t,
                                   const Objective& objective) {
  const Mask allowed = budget_mask(t, objective);
  for (std::size_t i = 0; i < t.layers; ++i) {
    bool any = false;
    for (std::size_t d = 0; d < t.devices; ++d) any = any || allowed(i, d);
    if (any) continue;
    if (objective.power_budget_w) {
      throw Error(fmt::format("no feasible schedule: no device runs layer '{}' within {} W",
                              model.layers[i].name, *objective.power_budget_w));
    }
    throw Error(
        fmt::format("no feasible schedule: no device supports layer '{}'", model.layers[i].name));
  }
  throw Error("no feasible schedule");
}

std::uint64_t checked_space(std::size_t devices, std::size_t layers, std::uint64_t cap) {
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < layers; ++i) {
    if (space > cap / devices) {
      throw Error(fmt::format("{} devices over {} layers exceeds the enumeration cap of {}",
                              devices, layers, cap));
    }
    space *= devices;
  }
  return space;
}

// Additive chain optimum (latency or energy) over the allowed pairs. Ties keep
// the lowest device index.
std::optional<Assignment> dp_chain(const CostTables& t, const Mask& allowed, bool energy) {
  const std::size_t n = t.layers;
  const std::size_t m = t.devices;
  std::vector<double> best(m, 0.0);
  std::vector<double> next(m, 0.0);
  std::vector<char> live(m, 0);
  std::vector<char> next_live(m, 0);
  std::vector<std::size_t> parent(n * m, 0);
  for (std::size_t d = 0; d < m; ++d) {
    if (!allowed(0, d)) continue;
    live[d] = 1;
    best[d] = energy ? t.energy(0, d) : t.host_in[d] + t.time(0, d);
  }
  for (std::size_t i = 1; i < n; ++i) {
    std::fill(next_live.begin(), next_live.end(), 0);
    for (std::size_t d = 0; d < m; ++d) {
      if (!allowed(i, d)) continue;
      bool found = false;
      double bv = 0.0;
      std::size_t bp = 0;
      for (std::size_t p = 0; p < m; ++p) {
        if (!live[p]) continue;
        const double v = energy ? best[p] : best[p] + t.xfer(i, p, d);
        if (!found || v < bv) {
          found = true;
          bv = v;
          bp = p;
        }
      }
      if (!found) continue;
      next_live[d] = 1;
      next[d] = bv + (energy ? t.energy(i, d) : t.time(i, d));
      parent[t.at(i, d)] = bp;
    }
    std::swap(best, next);
    std::swap(live, next_live);
  }
  bool found = false;
  double bv = 0.0;
  std::size_t last = 0;
  for (std::size_t d = 0; d < m; ++d) {
    if (!live[d]) continue;
    const double v = energy ? best[d] : best[d] + t.host_out[d];
    if (!found || v < bv) {
      found = true;
      bv = v;
      last = d;
    }
  }
  if (!found) return std::nullopt;
  Assignment a(n, 0);
  a[n - 1] = last;
  for (std::size_t i = n - 1; i > 0; --i) a[i - 1] = parent[t.at(i, a[i])];
  return a;
}

// Distinct allowed class powers, ascending.
std::vector<double> power_levels(const CostTables& t, const Mask& allowed) {
  std::vector<double> levels;
  for (std::size_t i = 0; i < t.layers; ++i) {
    for (std::size_t d = 0; d < t.devices; ++d) {
      if (allowed(i, d)) levels.push_back(t.power(i, d));
    }
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

Mask under_ceiling(const CostTables& t, const Mask& allowed, double ceiling) {
  return [&t, allowed, ceiling](std::size_t i, std::size_t d) {
    return allowed(i, d) && t.power(i, d) <= ceiling;
  };
}

Schedule to_schedule(const NetworkModel& model, const CostTables& t, const Assignment& a) {
  std::vector<std::string> names;
  names.reserve(a.size());
  for (std::size_t d : a) names.push_back(t.names[d]);
  return make_schedule(model, std::move(names));
}

Assignment resolve(const NetworkModel& model, const Schedule& schedule, const CostTables& t) {
  if (schedule.assignment.size() != model.layers.size()) {
    throw Error(fmt::format("schedule assigns {} layers but model '{}' has {}",
                            schedule.assignment.size(), model.name, model.layers.size()));
  }
  Assignment a;
  for (std::size_t i = 0; i < schedule.assignment.size(); ++i) {
    const auto& name = schedule.assignment[i];
    auto it = std::lower_bound(t.names.begin(), t.names.end(), name);
    if (it == t.names.end() || *it != name) throw Error(fmt::format("unknown device '{}'", name));
    const auto d = static_cast<std::size_t>(it - t.names.begin());
    if (!t.ok(i, d)) {
      throw Error(fmt::format(
          "layer '{}' ({}) is not supported by device '{}'", model.layers[i].name,
          to_string(layer_class(model.layers[i].spec, Direction::forward)), name));
    }
    a.push_back(d);
  }
  return a;
}

ScheduleCost cost_of(const CostTables& t, const Assignment& a) {
  ScheduleCost c;
  const Totals r = chain_totals(t, a);
  c.total_time_s = r.time;
  c.total_energy_j = r.energy;
  c.peak_power_w = r.peak;
  c.host_io_time_s = t.host_in[a.front()] + t.host_out[a.back()];
  for (std::size_t i = 0; i < t.layers; ++i) {
    c.per_layer.push_back(t.estimates[t.at(i, a[i])]);
    if (i > 0 && a[i] != a[i - 1]) {
      const double s = t.xfer(i, a[i - 1], a[i]);
      c.transfers.push_back(TransferCost{i, t.crossing_bytes[i], s});
      c.transfer_time_s += s;
    }
  }
  return c;
}

// Calls visit(assignment) for every allowed assignment in lexicographic order.
template <class Visit>
void for_each_assignment(const CostTables& t, const Mask& allowed, Visit visit) {
  std::vector<std::vector<std::size_t>> choices(t.layers);
  for (std::size_t i = 0; i < t.layers; ++i) {
    for (std::size_t d = 0; d < t.devices; ++d) {
      if (allowed(i, d)) choices[i].push_back(d);
    }
    if (choices[i].empty()) return;
  }
  std::vector<std::size_t> digit(t.layers, 0);
  Assignment a(t.layers);
  for (std::size_t i = 0; i < t.layers; ++i) a[i] = choices[i][0];
  while (true) {
    visit(a);
    std::size_t i = t.layers;
    while (i > 0) {
      --i;
      if (++digit[i] < choices[i].size()) {
        a[i] = choices[i][digit[i]];
        break;
      }
      digit[i] = 0;
      a[i] = choices[i][0];
      if (i == 0) return;
    }
  }
}

}  // namespace

ObjectiveKind parse_objective(std::string_view s) {
  if (s == "latency") return ObjectiveKind::min_latency;
  if (s == "peak-power") return ObjectiveKind::min_peak_power;
  if (s == "energy") return ObjectiveKind::min_energy;
  if (s == "density") return ObjectiveKind::max_gflops_per_watt;
  throw Error(fmt::format("unknown objective '{}' (latency|peak-power|energy|density)", s));
}

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::min_latency: return "latency";
    case ObjectiveKind::min_peak_power: return "peak-power";
    case ObjectiveKind::min_energy: return "energy";
    case ObjectiveKind::max_gflops_per_watt: return "density";
  }
  return "latency";
}

Schedule make_schedule(const NetworkModel& model, std::vector<std::string> assignment) {
  if (assignment.size() != model.layers.size()) {
    throw Error(fmt::format("schedule assigns {} layers but model '{}' has {}", assignment.size(),
                            model.name, model.layers.size()));
  }
  Schedule s;
  for (std::size_t i = 1; i < assignment.size(); ++i) {
    if (assignment[i] != assignment[i - 1]) {
      s.transfers.push_back(Transfer{i, tensor_bytes(output_shape(model.layers[i - 1].spec))});
    }
  }
  s.assignment = std::move(assignment);
  return s;
}

Schedule single_device_schedule(const NetworkModel& model, const std::string& device) {
  return make_schedule(model, std::vector<std::string>(model.layers.size(), device));
}

double transfer_seconds(std::uint64_t bytes, double bandwidth_a, double bandwidth_b) {
  const double bw = std::min(bandwidth_a, bandwidth_b);
  if (!(bw > 0.0)) throw Error("transfer bandwidth must be > 0");
  return static_cast<double>(bytes) / bw;
}

std::vector<DeviceProfile> sorted_devices(std::span<const DeviceProfile> devices) {
  if (devices.empty()) throw Error("no devices given");
  std::vector<DeviceProfile> out(devices.begin(), devices.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const DeviceProfile& a, const DeviceProfile& b) { return a.name < b.name; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].name == out[i - 1].name) {
      throw Error(fmt::format("duplicate device name '{}'", out[i].name));
    }
  }
  return out;
}

const DeviceProfile& find_device(std::span<const DeviceProfile> devices, std::string_view name) {
  for (const auto& d : devices) {
    if (d.name == name) return d;
  }
  throw Error(fmt::format("unknown device '{}'", name));
}

ScheduleCost evaluate_schedule(const NetworkModel& model, const Schedule& schedule,
                               std::span<const DeviceProfile> devices) {
  const auto sorted = sorted_devices(devices);
  const CostTables t = build_tables(model, sorted);
  return cost_of(t, resolve(model, schedule, t));
}

double objective_value(const ScheduleCost& cost, ObjectiveKind kind) {
  std::uint64_t flops = 0;
  for (const auto& e : cost.per_layer) flops += e.flops;
  const Totals r{cost.total_time_s, cost.total_energy_j, cost.peak_power_w};
  const double s = score(r, kind, flops);
  return kind == ObjectiveKind::max_gflops_per_watt ? -s : s;
}

Schedule enumerate_all_schedules(const NetworkModel& model, std::span<const DeviceProfile> devices,
                                 const Objective& objective, std::uint64_t cap) {
  const auto sorted = sorted_devices(devices);
  const CostTables t = build_tables(model, sorted);
  checked_space(t.devices, t.layers, cap);
  const Mask allowed = budget_mask(t, objective);
  std::optional<Assignment> best;
  double best_score = 0.0;
  for_each_assignment(t, allowed, [&](const Assignment& a) {
    const double s = score(chain_totals(t, a), objective.kind, t.total_flops);
    if (!best || s < best_score) {
      best = a;
      best_score = s;
    }
  });
  if (!best) throw_infeasible(model, t, objective);
  return to_schedule(model, t, *best);
}

Schedule dp_schedule(const NetworkModel& model, std::span<const DeviceProfile> devices,
                     const Objective& objective) {
  const auto sorted = sorted_devices(devices);
  const CostTables t = build_tables(model, sorted);
  const Mask allowed = budget_mask(t, objective);
  std::optional<Assignment> result;
  switch (objective.kind) {
    case ObjectiveKind::min_latency:
    case ObjectiveKind::min_energy:
      result = dp_chain(t, allowed, objective.kind == ObjectiveKind::min_energy);
      break;
    case ObjectiveKind::min_peak_power: {
      // Smallest ceiling that still admits a chain, then the fastest chain under it.
      const auto levels = power_levels(t, allowed);
      if (levels.empty() || !dp_chain(t, allowed, false)) break;
      std::size_t lo = 0;
      std::size_t hi = levels.size() - 1;
      while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (dp_chain(t, under_ceiling(t, allowed, levels[mid]), false)) {
          hi = mid;
        } else {
          lo = mid + 1;
        }
      }
      result = dp_chain(t, under_ceiling(t, allowed, levels[lo]), false);
      break;
    }
    case ObjectiveKind::max_gflops_per_watt: {
      // The fastest chain under each ceiling dominates every other chain
      // whose peak fits that ceiling.
      double best = 0.0;
      for (double level : power_levels(t, allowed)) {
        auto a = dp_chain(t, under_ceiling(t, allowed, level), false);
        if (!a) continue;
        const double s = score(chain_totals(t, *a), objective.kind, t.total_flops);
        if (!result || s < best) {
          result = std::move(a);
          best = s;
        }
      }
      break;
    }
  }
  if (!result) throw_infeasible(model, t, objective);
  return to_schedule(model, t, *result);
}

std::vector<FrontierPoint> pareto_frontier(const NetworkModel& model,
                                           std::span<const DeviceProfile> devices,
                                           std::uint64_t cap) {
  const auto sorted = sorted_devices(devices);
  const CostTables t = build_tables(model, sorted);
  checked_space(t.devices, t.layers, cap);
  const Mask allowed = [&t](std::size_t i, std::size_t d) { return t.ok(i, d); };
  struct Entry {
    Totals totals;
    Assignment assignment;
  };
  std::vector<Entry> all;
  for_each_assignment(t, allowed,
                      [&](const Assignment& a) { all.push_back({chain_totals(t, a), a}); });
  if (all.empty()) throw_infeasible(model, t, Objective{});
  std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
    if (a.totals.time != b.totals.time) return a.totals.time < b.totals.time;
    if (a.totals.energy != b.totals.energy) return a.totals.energy < b.totals.energy;
    return a.totals.peak < b.totals.peak;
  });
  // Every kept point is no slower, so a candidate survives only if no kept
  // point is also at least as good in energy and peak power.
  std::vector<const Entry*> kept;
  for (const auto& e : all) {
    const bool dominated = std::any_of(kept.begin(), kept.end(), [&](const Entry* k) {
      return k->totals.energy <= e.totals.energy && k->totals.peak <= e.totals.peak;
    });
    if (!dominated) kept.push_back(&e);
  }
  std::vector<FrontierPoint> out;
  for (const Entry* k : kept) {
    out.push_back({to_schedule(model, t, k->assignment), cost_of(t, k->assignment)});
  }
  return out;
}

std::string render_schedule(const NetworkModel& model, const Schedule& schedule) {
  nlohmann::ordered_json doc;
  doc["model"] = model.name;
  doc["assignment"] = schedule.assignment;
  return doc.dump(2) + "\n";
}

ScheduleFile parse_schedule(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(fmt::format("schedule: syntax error at byte {}", e.byte));
  }
  if (!doc.is_object()) throw Error("schedule: top level must be an object");
  for (const auto& item : doc.items()) {
    if (item.key() != "model" && item.key() != "assignment") {
      throw Error(fmt::format("schedule: unknown key '{}'", item.key()));
    }
  }
  ScheduleFile f;
  if (!doc.contains("model") || !doc["model"].is_string()) {
    throw Error("schedule: missing string 'model'");
  }
  f.model = doc["model"].get<std::string>();
  if (!doc.contains("assignment") || !doc["assignment"].is_array()) {
    throw Error("schedule: missing 'assignment' array");
  }
  for (const auto& v : doc["assignment"]) {
    if (!v.is_string()) throw Error("schedule: assignment entries must be device names");
    f.assignment.push_back(v.get<std::string>());
  }
  return f;
}

Schedule load_schedule_file(const std::string& path, const NetworkModel& model,
                            std::span<const DeviceProfile> devices) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open schedule file '{}'", path));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  ScheduleFile f = parse_schedule(buffer.str());
  if (f.model != model.name) {
    throw Error(fmt::format("schedule is for model '{}', not '{}'", f.model, model.name));
  }
  Schedule s = make_schedule(model, std::move(f.assignment));
  evaluate_schedule(model, s, devices);  // rejects unknown or unsupported devices
  return s;
}

}  // namespace cnnlab
