#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blm/error.hpp"
#include "blm/fxp.hpp"
#include "blm/nn/model.hpp"
#include "blm/nn/sigmoid.hpp"
#include "blm/quant/plan.hpp"

namespace blm::quant {

struct QuantizedLayer {
  fxp::FixedSpec spec;
  std::vector<std::int32_t> kernel;  // same layout as nn::LayerWeights
  std::vector<std::int32_t> bias;
  std::optional<nn::SigmoidTable> sigmoid;
  std::size_t saturated_weights = 0;
};

// A model whose weights and biases sit on each layer's fixed-point grid.
// Weights and activations of a layer share that layer's format.
struct QuantizedModel {
  nn::ModelDescriptor descriptor;
  PrecisionPlan plan;
  fxp::FixedSpec input_spec;
  std::vector<QuantizedLayer> layers;
  std::size_t saturated_weights = 0;

  const fxp::FixedSpec& node_spec(std::size_t node) const {
    return node == 0 ? input_spec : layers.at(node - 1).spec;
  }
  const fxp::FixedSpec& output_spec() const { return layers.at(descriptor.output_layer).spec; }
};

// Checks that every node of the descriptor has exactly one entry and nothing else.
inline void check_plan_covers(const nn::ModelDescriptor& d, const PrecisionPlan& plan) {
  for (const auto& name : d.node_names()) {
    std::size_t hits = 0;
    for (const auto& lp : plan.layers) hits += lp.layer == name ? 1 : 0;
    if (hits == 0) throw Error(ErrorKind::PlanMismatch, "plan has no precision for layer '" + name + "'");
    if (hits > 1) throw Error(ErrorKind::PlanMismatch, "plan lists layer '" + name + "' more than once");
  }
  for (const auto& lp : plan.layers) {
    if (lp.layer != d.input_name && !d.find_layer(lp.layer)) {
      throw Error(ErrorKind::PlanMismatch, "plan names unknown layer '" + lp.layer + "'");
    }
  }
}

inline QuantizedModel quantize_model(const nn::Model& model, const PrecisionPlan& plan) {
  const auto& d = model.descriptor;
  check_plan_covers(d, plan);
  QuantizedModel q;
  q.descriptor = d;
  q.plan = plan;
  q.input_spec = plan.at(d.input_name);
  q.layers.reserve(d.layers.size());
  for (std::size_t i = 0; i < d.layers.size(); ++i) {
    const auto& l = d.layers[i];
    QuantizedLayer ql;
    ql.spec = plan.at(l.name);
    auto grid = [&](const std::vector<float>& src, std::vector<std::int32_t>& dst) {
      dst.reserve(src.size());
      for (float w : src) {
        const auto r = fxp::quantize(w, ql.spec);
        ql.saturated_weights += r.overflowed ? 1 : 0;
        dst.push_back(static_cast<std::int32_t>(r.value.code));
      }
    };
    grid(model.weights[i].kernel, ql.kernel);
    grid(model.weights[i].bias, ql.bias);
    if (l.kind == nn::LayerKind::Sigmoid) ql.sigmoid.emplace(ql.spec);
    q.saturated_weights += ql.saturated_weights;
    q.layers.push_back(std::move(ql));
  }
  return q;
}

}  // namespace blm::quant
