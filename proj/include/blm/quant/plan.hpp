#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "blm/error.hpp"
#include "blm/fxp.hpp"

namespace blm::quant {

enum class Strategy { Uniform, LayerBased };

inline std::string_view to_string(Strategy s) { return s == Strategy::Uniform ? "uniform" : "layer_based"; }

struct LayerPrecision {
  std::string layer;
  fxp::FixedSpec spec;
};

// Per-node fixed-point formats. The model input is a node like any layer and
// carries its own entry.
struct PrecisionPlan {
  Strategy strategy = Strategy::Uniform;
  int guard_bits = 0;
  std::vector<LayerPrecision> layers;

  const fxp::FixedSpec* find(std::string_view name) const {
    for (const auto& lp : layers) {
      if (lp.layer == name) return &lp.spec;
    }
    return nullptr;
  }

  const fxp::FixedSpec& at(std::string_view name) const {
    if (const auto* spec = find(name)) return *spec;
    throw Error(ErrorKind::PlanMismatch, "plan has no precision for layer '" + std::string(name) + "'");
  }
};

inline nlohmann::json to_json(const PrecisionPlan& plan) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& lp : plan.layers) {
    layers.push_back({{"layer", lp.layer},
                      {"W", lp.spec.total_bits},
                      {"I", lp.spec.integer_bits},
                      {"rounding", std::string(fxp::to_string(lp.spec.rounding))},
                      {"overflow", std::string(fxp::to_string(lp.spec.overflow))}});
  }
  return {{"format", 1}, {"strategy", std::string(to_string(plan.strategy))}, {"guard_bits", plan.guard_bits},
          {"layers", layers}};
}

inline PrecisionPlan plan_from_json(const nlohmann::json& doc) {
  PrecisionPlan plan;
  try {
    const auto strategy = doc.value("strategy", std::string("layer_based"));
    if (strategy == "uniform") {
      plan.strategy = Strategy::Uniform;
    } else if (strategy == "layer_based") {
      plan.strategy = Strategy::LayerBased;
    } else {
      throw Error(ErrorKind::ParseError, "unknown plan strategy '" + strategy + "'");
    }
    plan.guard_bits = doc.value("guard_bits", 0);
    std::unordered_set<std::string> seen;
    for (const auto& entry : doc.at("layers")) {
      LayerPrecision lp;
      lp.layer = entry.at("layer").get<std::string>();
      if (!seen.insert(lp.layer).second) {
        throw Error(ErrorKind::PlanMismatch, "layer '" + lp.layer + "' appears twice in plan");
      }
      lp.spec = fxp::make_spec(entry.at("W").get<int>(), entry.at("I").get<int>(),
                               fxp::parse_rounding(entry.value("rounding", std::string("nearest_even"))),
                               fxp::parse_overflow(entry.value("overflow", std::string("saturate"))));
      plan.layers.push_back(lp);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  return plan;
}

}  // namespace blm::quant
