#pragma once

// Layer-graph description: parsing, validation, shape propagation and
// parameter counting.
//
// Tensors are (length, channels), row-major. Node 0 of a graph is the model
// input; node k (k >= 1) is layers[k - 1]. Layers may only consume nodes that
// appear before them, which makes every valid document acyclic.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "blm/error.hpp"

namespace blm::nn {

inline constexpr std::size_t kFrameSize = 260;
inline constexpr std::size_t kOutputSize = 520;
inline constexpr int kDescriptorFormat = 1;

enum class LayerKind { Dense, Conv1D, MaxPool1D, UpSample1D, Concatenate, ReLU, Sigmoid, Flatten };

inline std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "Dense";
    case LayerKind::Conv1D: return "Conv1D";
    case LayerKind::MaxPool1D: return "MaxPool1D";
    case LayerKind::UpSample1D: return "UpSample1D";
    case LayerKind::Concatenate: return "Concatenate";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Sigmoid: return "Sigmoid";
    case LayerKind::Flatten: return "Flatten";
  }
  return "?";
}

inline std::optional<LayerKind> parse_kind(std::string_view text) {
  for (auto k : {LayerKind::Dense, LayerKind::Conv1D, LayerKind::MaxPool1D, LayerKind::UpSample1D,
                 LayerKind::Concatenate, LayerKind::ReLU, LayerKind::Sigmoid, LayerKind::Flatten}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

struct Shape {
  std::size_t length = 0;
  std::size_t channels = 0;

  constexpr std::size_t size() const { return length * channels; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.length) + "," + std::to_string(s.channels) + ")";
}

struct LayerDescriptor {
  std::string name;
  LayerKind kind = LayerKind::Dense;
  std::vector<std::string> inputs;

  // Dense
  std::size_t units = 0;
  // Conv1D
  std::size_t filters = 0;
  std::size_t kernel_size = 0;
  // Dense, Conv1D
  bool use_bias = true;
  // MaxPool1D, UpSample1D
  std::size_t factor = 0;

  // Filled in by validation.
  std::vector<std::size_t> input_nodes;
  std::vector<Shape> input_shapes;
  Shape output_shape;

  bool has_weights() const { return kind == LayerKind::Dense || kind == LayerKind::Conv1D; }

  std::size_t kernel_count() const {
    if (kind == LayerKind::Dense) return input_shapes.at(0).size() * units;
    if (kind == LayerKind::Conv1D) return kernel_size * input_shapes.at(0).channels * filters;
    return 0;
  }
  std::size_t bias_count() const {
    if (!use_bias) return 0;
    if (kind == LayerKind::Dense) return units;
    if (kind == LayerKind::Conv1D) return filters;
    return 0;
  }
  std::size_t param_count() const { return kernel_count() + bias_count(); }

  // Multiplications per forward pass.
  std::size_t mult_count() const {
    if (kind == LayerKind::Dense) return input_shapes.at(0).size() * units;
    if (kind == LayerKind::Conv1D) return output_shape.length * kernel_size * input_shapes.at(0).channels * filters;
    return 0;
  }
  // Multiplications for one output position; equal to mult_count() for Dense.
  std::size_t mults_per_invocation() const {
    if (kind == LayerKind::Conv1D) return kernel_size * input_shapes.at(0).channels * filters;
    return mult_count();
  }
  std::size_t invocations() const { return kind == LayerKind::Conv1D ? output_shape.length : 1; }
  // Inputs feeding each output element (accumulator depth).
  std::size_t fan_in() const {
    if (kind == LayerKind::Dense) return input_shapes.at(0).size();
    if (kind == LayerKind::Conv1D) return kernel_size * input_shapes.at(0).channels;
    return 1;
  }
};

struct DescriptorOptions {
  // Require the deployable de-blending interface: input (260,1), output 520.
  bool require_frame_io = true;
};

struct ModelDescriptor {
  std::string name;
  std::string input_name = "input";
  Shape input_shape{kFrameSize, 1};
  std::vector<LayerDescriptor> layers;
  std::optional<std::size_t> declared_params;

  // Filled in by validation.
  std::size_t param_count = 0;
  std::size_t output_layer = 0;

  std::size_t node_count() const { return layers.size() + 1; }
  const std::string& node_name(std::size_t node) const {
    return node == 0 ? input_name : layers.at(node - 1).name;
  }
  Shape node_shape(std::size_t node) const {
    return node == 0 ? input_shape : layers.at(node - 1).output_shape;
  }
  const LayerDescriptor& output() const { return layers.at(output_layer); }
  std::size_t output_size() const { return output().output_shape.size(); }

  // Names of every node that carries a precision: the input plus all layers.
  std::vector<std::string> node_names() const {
    std::vector<std::string> names;
    names.reserve(node_count());
    for (std::size_t i = 0; i < node_count(); ++i) names.push_back(node_name(i));
    return names;
  }

  std::optional<std::size_t> find_layer(std::string_view layer_name) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].name == layer_name) return i;
    }
    return std::nullopt;
  }
};

namespace detail {

[[noreturn]] inline void shape_error(const std::string& layer, const std::string& what) {
  throw Error(ErrorKind::ShapeError, "layer '" + layer + "': " + what);
}

inline Shape infer_output_shape(const LayerDescriptor& l) {
  const auto need_inputs = [&](std::size_t n) {
    if (l.input_shapes.size() != n) {
      shape_error(l.name, "expects " + std::to_string(n) + " input(s), got " + std::to_string(l.input_shapes.size()));
    }
  };
  switch (l.kind) {
    case LayerKind::Dense:
      need_inputs(1);
      if (l.units == 0) shape_error(l.name, "units must be positive");
      return {l.units, 1};
    case LayerKind::Conv1D:
      need_inputs(1);
      if (l.filters == 0 || l.kernel_size == 0) shape_error(l.name, "filters and kernel_size must be positive");
      return {l.input_shapes[0].length, l.filters};
    case LayerKind::MaxPool1D: {
      need_inputs(1);
      if (l.factor == 0) shape_error(l.name, "factor must be positive");
      const std::size_t out = l.input_shapes[0].length / l.factor;  // trailing remainder is dropped
      if (out == 0) shape_error(l.name, "pooling factor exceeds input length");
      return {out, l.input_shapes[0].channels};
    }
    case LayerKind::UpSample1D:
      need_inputs(1);
      if (l.factor == 0) shape_error(l.name, "factor must be positive");
      return {l.input_shapes[0].length * l.factor, l.input_shapes[0].channels};
    case LayerKind::Concatenate:
      need_inputs(2);
      if (l.input_shapes[0].length != l.input_shapes[1].length) {
        shape_error(l.name, "cannot concatenate " + to_string(l.input_shapes[0]) + " with " +
                                to_string(l.input_shapes[1]));
      }
      return {l.input_shapes[0].length, l.input_shapes[0].channels + l.input_shapes[1].channels};
    case LayerKind::ReLU:
    case LayerKind::Sigmoid:
      need_inputs(1);
      return l.input_shapes[0];
    case LayerKind::Flatten:
      need_inputs(1);
      return {l.input_shapes[0].size(), 1};
  }
  shape_error(l.name, "unknown kind");
}

}  // namespace detail

// Resolves input references, propagates shapes and counts parameters.
inline void validate(ModelDescriptor& d, const DescriptorOptions& options = {}) {
  if (d.input_shape.size() == 0) throw Error(ErrorKind::ShapeError, "input shape must be non-empty");
  if (d.layers.empty()) throw Error(ErrorKind::ShapeError, "descriptor has no layers");

  std::unordered_map<std::string, std::size_t> node_of;
  node_of[d.input_name] = 0;
  std::vector<std::size_t> consumers(d.node_count(), 0);
  d.param_count = 0;

  for (std::size_t i = 0; i < d.layers.size(); ++i) {
    auto& l = d.layers[i];
    if (l.name.empty()) throw Error(ErrorKind::ParseError, "layer " + std::to_string(i) + " has no name");
    if (node_of.count(l.name)) detail::shape_error(l.name, "duplicate layer name");
    l.input_nodes.clear();
    l.input_shapes.clear();
    for (const auto& src : l.inputs) {
      auto it = node_of.find(src);
      if (it == node_of.end()) detail::shape_error(l.name, "unknown or later input '" + src + "'");
      l.input_nodes.push_back(it->second);
      l.input_shapes.push_back(d.node_shape(it->second));
      ++consumers[it->second];
    }
    l.output_shape = detail::infer_output_shape(l);
    d.param_count += l.param_count();
    node_of[l.name] = i + 1;
  }

  std::optional<std::size_t> output;
  for (std::size_t i = 0; i < d.layers.size(); ++i) {
    if (consumers[i + 1] == 0) {
      if (output) {
        detail::shape_error(d.layers[i].name, "second unconsumed layer; graph must have a single output (first: '" +
                                                  d.layers[*output].name + "')");
      }
      output = i;
    }
  }
  if (consumers[0] == 0) throw Error(ErrorKind::ShapeError, "model input is never consumed");
  d.output_layer = *output;

  if (options.require_frame_io) {
    if (!(d.input_shape == Shape{kFrameSize, 1})) {
      throw Error(ErrorKind::ShapeError, "input shape " + to_string(d.input_shape) + " is not (260,1)");
    }
    if (d.output_size() != kOutputSize) {
      detail::shape_error(d.output().name, "output has " + std::to_string(d.output_size()) + " values, expected 520");
    }
  }
  if (d.declared_params && *d.declared_params != d.param_count) {
    throw Error(ErrorKind::ShapeError, "declared parameter count " + std::to_string(*d.declared_params) +
                                           " != computed " + std::to_string(d.param_count));
  }
}

inline nlohmann::json to_json(const ModelDescriptor& d) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : d.layers) {
    nlohmann::json params = nlohmann::json::object();
    switch (l.kind) {
      case LayerKind::Dense:
        params = {{"units", l.units}, {"use_bias", l.use_bias}};
        break;
      case LayerKind::Conv1D:
        params = {{"filters", l.filters}, {"kernel_size", l.kernel_size}, {"padding", "same"}, {"use_bias", l.use_bias}};
        break;
      case LayerKind::MaxPool1D:
      case LayerKind::UpSample1D:
        params = {{"factor", l.factor}};
        break;
      default:
        break;
    }
    layers.push_back({{"name", l.name}, {"kind", std::string(to_string(l.kind))}, {"params", params}, {"inputs", l.inputs}});
  }
  nlohmann::json out = {
      {"format", kDescriptorFormat},
      {"name", d.name},
      {"input", {{"name", d.input_name}, {"shape", {d.input_shape.length, d.input_shape.channels}}}},
      {"layers", layers},
  };
  if (d.declared_params) out["declared_params"] = *d.declared_params;
  return out;
}

inline ModelDescriptor load_descriptor(std::string_view text, const DescriptorOptions& options = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  ModelDescriptor d;
  try {
    if (doc.value("format", 0) != kDescriptorFormat) {
      throw Error(ErrorKind::ParseError, "unsupported descriptor format (expected \"format\": 1)");
    }
    d.name = doc.value("name", std::string("model"));
    if (doc.contains("input")) {
      const auto& in = doc.at("input");
      d.input_name = in.value("name", std::string("input"));
      const auto& shape = in.at("shape");
      if (!shape.is_array() || shape.size() != 2) throw Error(ErrorKind::ParseError, "input.shape must be [length, channels]");
      d.input_shape = {shape[0].get<std::size_t>(), shape[1].get<std::size_t>()};
    }
    if (doc.contains("declared_params")) d.declared_params = doc.at("declared_params").get<std::size_t>();

    for (const auto& entry : doc.at("layers")) {
      LayerDescriptor l;
      l.name = entry.at("name").get<std::string>();
      const auto kind_text = entry.at("kind").get<std::string>();
      auto kind = parse_kind(kind_text);
      if (!kind) throw Error(ErrorKind::ParseError, "layer '" + l.name + "': unknown kind '" + kind_text + "'");
      l.kind = *kind;
      l.inputs = entry.value("inputs", std::vector<std::string>{});
      const auto params = entry.value("params", nlohmann::json::object());
      switch (l.kind) {
        case LayerKind::Dense:
          l.units = params.at("units").get<std::size_t>();
          l.use_bias = params.value("use_bias", true);
          break;
        case LayerKind::Conv1D:
          l.filters = params.at("filters").get<std::size_t>();
          l.kernel_size = params.at("kernel_size").get<std::size_t>();
          l.use_bias = params.value("use_bias", true);
          if (params.value("padding", std::string("same")) != "same") {
            throw Error(ErrorKind::ParseError, "layer '" + l.name + "': only padding 'same' is supported");
          }
          break;
        case LayerKind::MaxPool1D:
        case LayerKind::UpSample1D:
          l.factor = params.at("factor").get<std::size_t>();
          break;
        case LayerKind::Concatenate:
          // The skip source may be given as a parameter instead of a second input.
          if (params.contains("skip")) l.inputs.push_back(params.at("skip").get<std::string>());
          break;
        default:
          break;
      }
      d.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  validate(d, options);
  return d;
}

}  // namespace blm::nn
