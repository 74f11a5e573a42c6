#pragma once

// Post-training calibration: per-node maximum absolute activation over a
// calibration set, and the integer-bit allocation derived from it.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blm/error.hpp"
#include "blm/fxp.hpp"
#include "blm/nn/infer.hpp"
#include "blm/quant/plan.hpp"

namespace blm::quant {

struct LayerStat {
  std::string layer;
  double max_abs = 0.0;
};

struct CalibrationProfile {
  std::vector<LayerStat> layers;  // descriptor node order, input first
  std::size_t samples = 0;

  double max_abs(std::string_view layer) const {
    for (const auto& s : layers) {
      if (s.layer == layer) return s.max_abs;
    }
    throw Error(ErrorKind::PlanMismatch, "profile has no entry for layer '" + std::string(layer) + "'");
  }

  // Running max is associative and commutative, so partial profiles over
  // disjoint frame subsets merge to the same result in any order.
  void merge(const CalibrationProfile& other) {
    if (layers.empty()) {
      *this = other;
      return;
    }
    if (other.layers.size() != layers.size()) throw Error(ErrorKind::PlanMismatch, "merging profiles of different models");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].layer != other.layers[i].layer) throw Error(ErrorKind::PlanMismatch, "profile layer order differs");
      layers[i].max_abs = std::max(layers[i].max_abs, other.layers[i].max_abs);
    }
    samples += other.samples;
  }
};

inline CalibrationProfile profile(const nn::Model& model, std::span<const nn::Frame> frames) {
  if (frames.empty()) throw Error(ErrorKind::EmptyCalibrationSet, "calibration needs at least one frame");
  const auto& d = model.descriptor;
  CalibrationProfile p;
  for (std::size_t n = 0; n < d.node_count(); ++n) p.layers.push_back({d.node_name(n), 0.0});
  for (const auto& frame : frames) {
    const auto act = nn::forward_float(model, frame.values());
    for (std::size_t n = 0; n < act.size(); ++n) {
      for (double v : act[n]) p.layers[n].max_abs = std::max(p.layers[n].max_abs, std::fabs(v));
    }
  }
  p.samples = frames.size();
  return p;
}

// Smallest I (sign included) with max_abs strictly inside [-2^(I-1), 2^(I-1)),
// plus guard bits, clamped to [1, W].
inline int integer_bits_for(double max_abs, int total_bits, int guard_bits) {
  if (!(max_abs > 0.0)) return 1;
  const int exponent = std::ilogb(max_abs);  // floor(log2(max_abs)), exact
  return std::clamp(exponent + 2 + guard_bits, 1, total_bits);
}

inline PrecisionPlan plan_precision(const CalibrationProfile& prof, int total_bits = 16, int guard_bits = 0,
                                    fxp::Rounding rounding = fxp::Rounding::NearestEven,
                                    fxp::Overflow overflow = fxp::Overflow::Saturate) {
  if (guard_bits < 0) throw Error(ErrorKind::BadParams, "guard bits must be non-negative");
  PrecisionPlan plan;
  plan.strategy = Strategy::LayerBased;
  plan.guard_bits = guard_bits;
  for (const auto& s : prof.layers) {
    plan.layers.push_back(
        {s.layer, fxp::make_spec(total_bits, integer_bits_for(s.max_abs, total_bits, guard_bits), rounding, overflow)});
  }
  return plan;
}

inline PrecisionPlan uniform_plan(const nn::ModelDescriptor& d, int total_bits, int integer_bits,
                                  fxp::Rounding rounding = fxp::Rounding::NearestEven,
                                  fxp::Overflow overflow = fxp::Overflow::Saturate) {
  const auto spec = fxp::make_spec(total_bits, integer_bits, rounding, overflow);
  PrecisionPlan plan;
  plan.strategy = Strategy::Uniform;
  for (const auto& name : d.node_names()) plan.layers.push_back({name, spec});
  return plan;
}

inline nlohmann::json to_json(const CalibrationProfile& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& s : p.layers) layers.push_back({{"layer", s.layer}, {"max_abs", s.max_abs}});
  return {{"format", 1}, {"samples", p.samples}, {"layers", layers}};
}

inline CalibrationProfile profile_from_json(const nlohmann::json& doc) {
  CalibrationProfile p;
  try {
    p.samples = doc.value("samples", std::size_t{0});
    for (const auto& entry : doc.at("layers")) {
      const double m = entry.at("max_abs").get<double>();
      if (!(m >= 0.0)) throw Error(ErrorKind::ParseError, "max_abs must be non-negative");
      p.layers.push_back({entry.at("layer").get<std::string>(), m});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  return p;
}

}  // namespace blm::quant
