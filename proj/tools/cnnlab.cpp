// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// cnnlab command-line front end.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cnnlab/device.hpp"
#include "cnnlab/model.hpp"
#include "cnnlab/number_format.hpp"
#include "cnnlab/runtime.hpp"
#include "cnnlab/scheduler.hpp"
#include "cnnlab/weights.hpp"

namespace {

using namespace cnnlab;

// Aligned table: first `text_columns` columns left-aligned, the rest right-aligned.
std::string render_table(const std::vector<std::vector<std::string>>& rows,
                         std::size_t text_columns) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += c < text_columns ? fmt::format("{:<{}}", row[c], width[c])
                               : fmt::format("{:>{}}", row[c], width[c]);
      if (c + 1 < row.size()) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", path));
  out << text;
  if (!out) throw Error(fmt::format("failed writing '{}'", path));
}

NetworkModel load_valid_model(const std::string& path) {
  NetworkModel model = load_model_file(path);
  const ValidationReport report = validate_network(model);
  if (!report.ok()) {
    throw Error(fmt::format("{}: {}{}", path, report.errors.front(),
                            report.errors.size() > 1
                                ? fmt::format(" (+{} more)", report.errors.size() - 1)
                                : std::string()));
  }
  return model;
}

std::vector<DeviceProfile> load_profiles(const std::vector<std::string>& paths) {
  std::vector<DeviceProfile> devices;
  for (const auto& p : paths) devices.push_back(load_device_profile_file(p));
  return devices;
}

std::string assignment_text(const Schedule& s) {
  std::string out;
  for (std::size_t i = 0; i < s.assignment.size(); ++i) {
    if (i > 0) out += ",";
    out += s.assignment[i];
  }
  return out;
}

int cmd_validate(const std::string& model_path) {
  NetworkModel model = load_model_file(model_path);
  const ValidationReport report = validate_network(model);
  std::vector<std::vector<std::string>> rows{
      {"#", "layer", "type", "declared", "inferred", "next", "flops"}};
  for (const auto& l : report.layers) {
    rows.push_back({fmt::format("{}", l.index + 1), l.name, l.type, l.declared_output.to_string(),
                    l.inferred_output ? l.inferred_output->to_string() : "-",
                    l.successor_match ? (*l.successor_match ? "ok" : "MISMATCH") : "-",
                    fmt::format("{}", l.forward_flops)});
  }
  std::cout << "model " << model.name << "\n" << render_table(rows, 3);
  std::cout << fmt::format("total forward flops {}\n", report.total_forward_flops);
  if (!report.ok()) {
    throw Error(fmt::format("validation failed: {}{}", report.errors.front(),
                            report.errors.size() > 1
                                ? fmt::format(" (+{} more)", report.errors.size() - 1)
                                : std::string()));
  }
  std::cout << "ok\n";
  return 0;
}

int cmd_flops(const std::string& model_path) {
  const NetworkModel model = load_valid_model(model_path);
  std::vector<std::vector<std::string>> rows{{"layer", "type", "forward", "backward"}};
  std::uint64_t fwd = 0;
  std::uint64_t bwd = 0;
  for (const auto& l : model.layers) {
    const std::uint64_t f = count_layer_flops(l.spec, Direction::forward);
    fwd += f;
    std::string b = "-";
    if (std::holds_alternative<FcSpec>(l.spec)) {
      const std::uint64_t v = count_layer_flops(l.spec, Direction::backward);
      bwd += v;
      b = fmt::format("{}", v);
    }
    rows.push_back({l.name, std::string(type_name(l.spec)), fmt::format("{}", f), b});
  }
  rows.push_back({"total", "", fmt::format("{}", fwd), fmt::format("{}", bwd)});
  std::cout << render_table(rows, 2);
  return 0;
}

int cmd_weights(const std::string& model_path, std::uint64_t seed, const std::string& out) {
  const NetworkModel model = load_valid_model(model_path);
  const WeightSet weights = init_weights(model, seed);
  save_weights_file(out, weights);
  std::size_t values = 0;
  for (const auto& b : weights.blobs) values += b.values.size();
  std::cout << fmt::format("wrote {} blobs ({} values) to {}\n", weights.blobs.size(), values, out);
  return 0;
}

Tensor read_input(const NetworkModel& model, const std::optional<std::string>& path,
                  std::uint64_t seed) {
  const TensorShape shape = input_shape(model.layers.front().spec);
  if (!path) return Tensor(shape, seeded_input(model, seed));
  const WeightSet file = load_weights_file(*path);
  if (file.blobs.size() != 1) {
    throw Error(fmt::format("input file '{}' holds {} blobs, expected 1", *path, file.blobs.size()));
  }
  const auto& values = file.blobs.front().values;
  if (values.size() != static_cast<std::size_t>(shape.element_count())) {
    throw Error(fmt::format("input file '{}' holds {} values, expected {} for {}", *path,
                            values.size(), shape.element_count(), shape.to_string()));
  }
  return Tensor(shape, values);
}

int cmd_infer(const std::string& model_path, const std::string& weights_path,
              const std::optional<std::string>& input_path, std::uint64_t seed) {
  const NetworkModel model = load_valid_model(model_path);
  const auto params = bind_weights(model, load_weights_file(weights_path));
  const Tensor input = read_input(model, input_path, seed);
  const Tensor out = run_network(model, params, input);
  const double sum = std::accumulate(out.data.begin(), out.data.end(), 0.0);
  std::vector<std::size_t> order(out.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t k = std::min<std::size_t>(5, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return out.data[a] > out.data[b] || (out.data[a] == out.data[b] && a < b);
                    });
  std::cout << fmt::format("output {} ({} values), sum {}\n", out.shape.to_string(), out.size(),
                           format_number(sum));
  std::vector<std::vector<std::string>> rows{{"rank", "index", "value"}};
  for (std::size_t r = 0; r < k; ++r) {
    rows.push_back({fmt::format("{}", r + 1), fmt::format("{}", order[r]),
                    format_number(out.data[order[r]])});
  }
  std::cout << render_table(rows, 0);
  return 0;
}

void print_cost(const ScheduleCost& c) {
  std::cout << fmt::format("total time_s   {}\n", format_number(c.total_time_s));
  std::cout << fmt::format("transfer_s     {} ({} transfers)\n", format_number(c.transfer_time_s),
                           c.transfers.size());
  std::cout << fmt::format("host_io_s      {}\n", format_number(c.host_io_time_s));
  std::cout << fmt::format("total energy_j {}\n", format_number(c.total_energy_j));
  std::cout << fmt::format("peak power_w   {}\n", format_number(c.peak_power_w));
}

int cmd_schedule(const std::string& model_path, const std::vector<std::string>& profiles,
                 const std::string& objective_name, const std::optional<double>& budget,
                 const std::optional<std::string>& out) {
  const NetworkModel model = load_valid_model(model_path);
  const auto devices = load_profiles(profiles);
  const Objective objective{parse_objective(objective_name), budget};
  const Schedule schedule = dp_schedule(model, devices, objective);
  const ScheduleCost cost = evaluate_schedule(model, schedule, devices);
  if (out) write_text(*out, render_schedule(model, schedule));
  std::vector<std::vector<std::string>> rows{{"layer", "device"}};
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    rows.push_back({model.layers[i].name, schedule.assignment[i]});
  }
  std::cout << fmt::format("objective {}\n", objective_name) << render_table(rows, 2);
  print_cost(cost);
  return 0;
}

int cmd_profile(const std::string& model_path, const std::vector<std::string>& profiles,
                const std::optional<std::string>& schedule_path,
                const std::optional<std::string>& csv_path, std::uint64_t seed) {
  const NetworkModel model = load_valid_model(model_path);
  const auto devices = load_profiles(profiles);
  const Schedule schedule = schedule_path
                                ? load_schedule_file(*schedule_path, model, devices)
                                : single_device_schedule(model, devices.front().name);
  const ExecutionPlan plan =
      build_execution_plan(model, schedule, init_weights(model, seed), devices);
  const Tensor input(input_shape(model.layers.front().spec), seeded_input(model, seed + 1));
  const ExecutionResult result = execute(plan, input);
  std::cout << render_report(result.report);
  if (csv_path) write_text(*csv_path, render_report_csv(result.report));
  return 0;
}

int cmd_pareto(const std::string& model_path, const std::vector<std::string>& profiles) {
  const NetworkModel model = load_valid_model(model_path);
  const auto devices = load_profiles(profiles);
  const auto frontier = pareto_frontier(model, devices);
  std::vector<std::vector<std::string>> rows{
      {"time_s", "energy_j", "peak_w", "transfers", "assignment"}};
  for (const auto& p : frontier) {
    rows.push_back({format_number(p.cost.total_time_s), format_number(p.cost.total_energy_j),
                    format_number(p.cost.peak_power_w),
                    fmt::format("{}", p.schedule.transfers.size()), assignment_text(p.schedule)});
  }
  std::cout << render_table(rows, 0);
  std::cout << fmt::format("{} frontier points\n", frontier.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cnnlab: layer-level CNN cost modeling, scheduling and reference inference"};
  app.require_subcommand(1);

  std::string model;
  std::string weights;
  std::string out;
  std::string objective;
  std::vector<std::string> profiles;
  std::optional<std::string> input;
  std::optional<std::string> schedule;
  std::optional<std::string> csv;
  std::optional<std::string> schedule_out;
  std::optional<double> budget;
  std::uint64_t seed = 0;

  auto* validate = app.add_subcommand("validate", "check shapes and print per-layer summary");
  validate->add_option("--model", model, "model file")->required();

  auto* flops = app.add_subcommand("flops", "per-layer forward/backward FLOPs per image");
  flops->add_option("--model", model, "model file")->required();

  auto* gen = app.add_subcommand("weights", "write a seeded weights file");
  gen->add_option("--model", model, "model file")->required();
  gen->add_option("--seed", seed, "random seed");
  gen->add_option("--out", out, "output weights file")->required();

  auto* infer = app.add_subcommand("infer", "run reference inference");
  infer->add_option("--model", model, "model file")->required();
  infer->add_option("--weights", weights, "weights file")->required();
  auto* input_opt = infer->add_option("--input", input, "input tensor (single-blob weights file)");
  infer->add_option("--seed", seed, "seed for a random input")->excludes(input_opt);

  auto* sched = app.add_subcommand("schedule", "assign layers to devices");
  sched->add_option("--model", model, "model file")->required();
  sched->add_option("--profile", profiles, "device profile (repeatable)")->required();
  sched->add_option("--objective", objective, "latency|peak-power|energy|density")
      ->required()
      ->check(CLI::IsMember({"latency", "peak-power", "energy", "density"}));
  sched->add_option("--power-budget", budget, "per-device power ceiling in watts");
  sched->add_option("--out", schedule_out, "schedule file to write");

  auto* prof = app.add_subcommand("profile", "modeled per-layer cost report");
  prof->add_option("--model", model, "model file")->required();
  prof->add_option("--profile", profiles, "device profile (repeatable)")->required();
  prof->add_option("--schedule", schedule, "schedule file (default: all on the first profile)");
  prof->add_option("--csv", csv, "also write the report as CSV");
  prof->add_option("--seed", seed, "seed for weights (N) and input (N+1)");

  auto* pareto = app.add_subcommand("pareto", "time/energy/peak-power trade-off frontier");
  pareto->add_option("--model", model, "model file")->required();
  pareto->add_option("--profile", profiles, "device profile (repeatable)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string what = e.what();
    std::replace(what.begin(), what.end(), '\n', ' ');
    std::fprintf(stderr, "cnnlab: error: %s\n", what.c_str());
    return 2;
  }

  try {
    if (*validate) return cmd_validate(model);
    if (*flops) return cmd_flops(model);
    if (*gen) return cmd_weights(model, seed, out);
    if (*infer) return cmd_infer(model, weights, input, seed);
    if (*sched) return cmd_schedule(model, profiles, objective, budget, schedule_out);
    if (*prof) return cmd_profile(model, profiles, schedule, csv, seed);
    if (*pareto) return cmd_pareto(model, profiles);
  } catch (const std::exception& e) {
    std::cout.flush();
    std::string what = e.what();
    std::replace(what.begin(), what.end(), '\n', ' ');
    std::fprintf(stderr, "cnnlab: error: %s\n", what.c_str());
    return 1;
  }
  return 1;
}
