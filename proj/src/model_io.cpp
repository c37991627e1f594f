// Copyright 2026 The cnnlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON embodiment of the layer tuples. Unknown keys are rejected so typos in
// hand-edited fixtures fail loudly.

#include <fmt/format.h>

#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <sstream>

#include "cnnlab/model.hpp"

namespace cnnlab {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

class Context {
 public:
  explicit Context(std::string where) : where_(std::move(where)) {}

  [[noreturn]] void fail(std::string_view message) const {
    throw Error(fmt::format("{}: {}", where_, message));
  }

  void check_keys(const json& obj, std::initializer_list<std::string_view> allowed) const {
    for (const auto& item : obj.items()) {
      bool known = false;
      for (auto key : allowed) known = known || item.key() == key;
      if (!known) fail(fmt::format("unknown key '{}'", item.key()));
    }
  }

  const json& require(const json& obj, std::string_view key) const {
    auto it = obj.find(std::string(key));
    if (it == obj.end()) fail(fmt::format("missing required field '{}'", key));
    return *it;
  }

  std::int64_t integer(const json& v, std::string_view key) const {
    if (!v.is_number_integer()) fail(fmt::format("'{}' must be an integer", key));
    return v.get<std::int64_t>();
  }

  std::int64_t positive(const json& v, std::string_view key) const {
    const std::int64_t n = integer(v, key);
    if (n < 1) fail(fmt::format("non-positive extent {} in '{}'", n, key));
    return n;
  }

  double real(const json& v, std::string_view key) const {
    if (!v.is_number()) fail(fmt::format("'{}' must be a number", key));
    return v.get<double>();
  }

  std::string text(const json& v, std::string_view key) const {
    if (!v.is_string()) fail(fmt::format("'{}' must be a string", key));
    return v.get<std::string>();
  }

  std::vector<std::int64_t> extents(const json& v, std::string_view key, std::size_t n) const {
    if (!v.is_array() || v.size() != n) {
      fail(fmt::format("'{}' must be an array of {} integers", key, n));
    }
    std::vector<std::int64_t> out;
    for (const auto& e : v) out.push_back(positive(e, key));
    return out;
  }

  TensorShape shape(const json& v, std::string_view key) const {
    auto e = extents(v, key, 3);
    return wrap([&] { return make_shape(e[0], e[1], e[2]); });
  }

  template <class F>
  auto wrap(F&& f) const -> decltype(f()) {
    try {
      return f();
    } catch (const Error& e) {
      fail(e.what());
    }
  }

 private:
  std::string where_;
};

PoolKind parse_pool_kind(const Context& ctx, const json& v) {
  const std::string s = ctx.text(v, "pool");
  if (s == "max") return PoolKind::max;
  if (s == "avg") return PoolKind::average;
  ctx.fail(fmt::format("pool must be \"max\" or \"avg\", got '{}'", s));
}

void check_declared_output(const Context& ctx, const json& obj, const TensorShape& inferred) {
  auto it = obj.find("output");
  if (it == obj.end()) return;
  const TensorShape declared = ctx.shape(*it, "output");
  if (declared != inferred) {
    ctx.fail(fmt::format("declared output {} but inference gives {}", declared.to_string(),
                         inferred.to_string()));
  }
}

NormSpec parse_lrn(const Context& ctx, const json& obj, const TensorShape& input) {
  const std::int64_t local_size = ctx.positive(ctx.require(obj, "local_size"), "local_size");
  const double alpha = ctx.real(ctx.require(obj, "alpha"), "alpha");
  const double beta = ctx.real(ctx.require(obj, "beta"), "beta");
  const double k = obj.contains("k") ? ctx.real(obj["k"], "k") : 1.0;
  return ctx.wrap([&] { return make_lrn(input, local_size, alpha, beta, k); });
}

PoolSpec parse_pool(const Context& ctx, const json& obj, const TensorShape& input) {
  auto window = ctx.extents(ctx.require(obj, "window"), "window", 2);
  const std::int64_t stride = ctx.positive(ctx.require(obj, "stride"), "stride");
  const PoolKind kind = parse_pool_kind(ctx, ctx.require(obj, "pool"));
  PoolSpec spec = ctx.wrap([&] { return make_pool(input, kind, window[0], window[1], stride); });
  check_declared_output(ctx, obj, spec.output);
  return spec;
}

TransitionStage parse_stage(const Context& ctx, const json& obj, const TensorShape& incoming) {
  if (!obj.is_object()) ctx.fail("transition stage must be an object");
  const std::string type = ctx.text(ctx.require(obj, "type"), "type");
  const TensorShape input = obj.contains("input") ? ctx.shape(obj["input"], "input") : incoming;
  if (type == "lrn") {
    ctx.check_keys(obj, {"type", "input", "local_size", "alpha", "beta", "k"});
    return parse_lrn(ctx, obj, input);
  }
  if (type == "pool") {
    ctx.check_keys(obj, {"type", "input", "window", "stride", "pool", "output"});
    return parse_pool(ctx, obj, input);
  }
  ctx.fail(fmt::format("unknown transition stage type '{}'", type));
}

Layer parse_layer(const json& obj, std::size_t index, ShapeMode mode,
                  const std::optional<TensorShape>& previous_output) {
  Context ctx(fmt::format("layer {}", index));
  if (!obj.is_object()) ctx.fail("layer must be an object");
  const std::string type = ctx.text(ctx.require(obj, "type"), "type");
  Layer layer;
  layer.name = obj.contains("name") ? ctx.text(obj["name"], "name")
                                    : fmt::format("{}{}", type, index + 1);
  ctx = Context(fmt::format("layer {} '{}'", index, layer.name));

  if (auto it = obj.find("transition"); it != obj.end()) {
    if (!it->is_array()) ctx.fail("'transition' must be an array of stages");
    if (!previous_output && !it->empty()) ctx.fail("transition on the first layer");
    TensorShape current = previous_output.value_or(TensorShape{});
    for (const auto& stage_obj : *it) {
      TransitionStage stage = parse_stage(ctx, stage_obj, current);
      current = output_shape(stage);
      layer.transition.push_back(std::move(stage));
    }
  }

  if (type == "conv") {
    ctx.check_keys(obj, {"type", "name", "input", "kernel", "stride", "pad", "activation",
                         "output", "transition"});
    const TensorShape input = ctx.shape(ctx.require(obj, "input"), "input");
    auto k = ctx.extents(ctx.require(obj, "kernel"), "kernel", 4);
    const std::int64_t stride = ctx.positive(ctx.require(obj, "stride"), "stride");
    Padding pad;
    if (auto it = obj.find("pad"); it != obj.end()) {
      if (!it->is_array() || it->size() != 4) ctx.fail("'pad' must be an array of 4 integers");
      std::int64_t p[4];
      for (std::size_t i = 0; i < 4; ++i) {
        p[i] = ctx.integer((*it)[i], "pad");
        if (p[i] < 0) ctx.fail(fmt::format("negative padding {}", p[i]));
      }
      pad = Padding{p[0], p[1], p[2], p[3]};
    }
    const Activation act = ctx.wrap(
        [&] { return parse_activation(ctx.text(ctx.require(obj, "activation"), "activation")); });
    ConvSpec spec = ctx.wrap([&] {
      return make_conv(input, KernelShape{k[0], k[1], k[2], k[3]}, stride, pad, act, mode);
    });
    check_declared_output(ctx, obj, spec.output);
    layer.spec = spec;
  } else if (type == "lrn") {
    ctx.check_keys(obj, {"type", "name", "input", "local_size", "alpha", "beta", "k",
                         "transition"});
    layer.spec = parse_lrn(ctx, obj, ctx.shape(ctx.require(obj, "input"), "input"));
  } else if (type == "pool") {
    ctx.check_keys(obj, {"type", "name", "input", "window", "stride", "pool", "output",
                         "transition"});
    layer.spec = parse_pool(ctx, obj, ctx.shape(ctx.require(obj, "input"), "input"));
  } else if (type == "fc") {
    ctx.check_keys(obj, {"type", "name", "input", "out", "mode", "rate", "activation",
                         "transition"});
    const json& in = ctx.require(obj, "input");
    TensorShape input;
    bool flat = false;
    if (in.is_array()) {
      input = ctx.shape(in, "input");
    } else {
      input = ctx.wrap([&] { return flat_shape(ctx.positive(in, "input")); });
      flat = true;
    }
    const std::int64_t out = ctx.positive(ctx.require(obj, "out"), "out");
    const std::string mode_text = ctx.text(ctx.require(obj, "mode"), "mode");
    FcMode fc_mode;
    if (mode_text == "dropout") {
      fc_mode = FcMode::dropout;
    } else if (mode_text == "softmax") {
      fc_mode = FcMode::softmax;
    } else {
      ctx.fail(fmt::format("mode must be \"dropout\" or \"softmax\", got '{}'", mode_text));
    }
    const double rate = obj.contains("rate") ? ctx.real(obj["rate"], "rate") : 0.0;
    const Activation act =
        obj.contains("activation")
            ? ctx.wrap([&] { return parse_activation(ctx.text(obj["activation"], "activation")); })
            : Activation::none;
    FcSpec spec = ctx.wrap([&] { return make_fc(input, out, fc_mode, rate, act); });
    spec.flat_input = flat;
    layer.spec = spec;
  } else {
    ctx.fail(fmt::format("unknown layer type '{}'", type));
  }
  return layer;
}

ordered_json shape_json(const TensorShape& s) {
  return ordered_json::array({s.channels, s.height, s.width});
}

ordered_json lrn_json(const NormSpec& s) {
  ordered_json j;
  j["type"] = "lrn";
  j["input"] = shape_json(s.input);
  j["local_size"] = s.local_size;
  j["alpha"] = s.alpha;
  j["beta"] = s.beta;
  j["k"] = s.bias_k;
  return j;
}

ordered_json pool_json(const PoolSpec& s) {
  ordered_json j;
  j["type"] = "pool";
  j["input"] = shape_json(s.input);
  j["window"] = ordered_json::array({s.window_h, s.window_w});
  j["stride"] = s.stride;
  j["pool"] = std::string(to_string(s.kind));
  j["output"] = shape_json(s.output);
  return j;
}

ordered_json layer_json(const Layer& layer) {
  ordered_json j;
  if (const auto* s = std::get_if<ConvSpec>(&layer.spec)) {
    j["type"] = "conv";
    j["input"] = shape_json(s->input);
    j["kernel"] = ordered_json::array(
        {s->kernel.out_channels, s->kernel.in_channels, s->kernel.height, s->kernel.width});
    j["stride"] = s->stride;
    j["pad"] = ordered_json::array({s->pad.top, s->pad.bottom, s->pad.left, s->pad.right});
    j["activation"] = std::string(to_string(s->activation));
    j["output"] = shape_json(s->output);
  } else if (const auto* s = std::get_if<NormSpec>(&layer.spec)) {
    j = lrn_json(*s);
  } else if (const auto* s = std::get_if<PoolSpec>(&layer.spec)) {
    j = pool_json(*s);
  } else {
    const auto& f = std::get<FcSpec>(layer.spec);
    j["type"] = "fc";
    if (f.flat_input) {
      j["input"] = f.input_len();
    } else {
      j["input"] = shape_json(f.input);
    }
    j["out"] = f.output_len;
    j["mode"] = std::string(to_string(f.mode));
    j["rate"] = f.dropout_rate;
    j["activation"] = std::string(to_string(f.activation));
  }
  ordered_json named;
  named["name"] = layer.name;
  for (auto& item : j.items()) named[item.key()] = item.value();
  if (!layer.transition.empty()) {
    ordered_json stages = ordered_json::array();
    for (const auto& stage : layer.transition) {
      if (const auto* s = std::get_if<NormSpec>(&stage)) {
        stages.push_back(lrn_json(*s));
      } else {
        stages.push_back(pool_json(std::get<PoolSpec>(stage)));
      }
    }
    named["transition"] = std::move(stages);
  }
  return named;
}

}  // namespace

NetworkModel parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw Error(fmt::format("syntax error at byte {}: {}", e.byte, e.what()));
  }
  Context ctx("model");
  if (!doc.is_object()) ctx.fail("top level must be an object");
  ctx.check_keys(doc, {"name", "layers", "permissive"});
  NetworkModel model;
  model.name = ctx.text(ctx.require(doc, "name"), "name");
  if (auto it = doc.find("permissive"); it != doc.end()) {
    if (!it->is_boolean()) ctx.fail("'permissive' must be a boolean");
    model.permissive = it->get<bool>();
  }
  const json& layers = ctx.require(doc, "layers");
  if (!layers.is_array()) ctx.fail("'layers' must be an array");
  if (layers.empty()) throw Error("empty network");
  const ShapeMode mode = model.permissive ? ShapeMode::floor : ShapeMode::strict;
  std::optional<TensorShape> previous;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    model.layers.push_back(parse_layer(layers[i], i, mode, previous));
    previous = output_shape(model.layers.back().spec);
  }
  return model;
}

std::string render_model(const NetworkModel& model) {
  ordered_json doc;
  doc["name"] = model.name;
  if (model.permissive) doc["permissive"] = true;
  ordered_json layers = ordered_json::array();
  for (const auto& layer : model.layers) layers.push_back(layer_json(layer));
  doc["layers"] = std::move(layers);
  return doc.dump(2) + "\n";
}

NetworkModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open model file '{}'", path));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_model(buffer.str());
  } catch (const Error& e) {
    throw Error(fmt::format("{}: {}", path, e.what()));
  }
}

}  // namespace cnnlab
