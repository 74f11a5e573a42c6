#pragma once

// Reuse-factor resource/latency estimator.
//
// A reuse factor rf time-shares each multiplier rf times: a layer needs
// ceil(mult_count / rf) multipliers and spends rf cycles per invocation plus
// a fixed pipeline fill. Dense layers are invoked once per frame; Conv1D
// layers stream one output position per invocation, so their cycle count
// scales with output length. Layers without multiplications cost the fill
// only. The numbers are a design-space explorer, not a synthesis prediction;
// logic units in particular are an uncalibrated scale.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "blm/error.hpp"
#include "blm/nn/descriptor.hpp"
#include "blm/quant/plan.hpp"

namespace blm::perf {

inline constexpr std::uint64_t kPipelineFill = 8;
inline constexpr std::uint64_t kLogicUnitsPerMultiplier = 64;
inline constexpr double kDefaultClockHz = 100e6;

enum class Schedule { Sequential, Dataflow };

inline std::string_view to_string(Schedule s) { return s == Schedule::Sequential ? "sequential" : "dataflow"; }

inline Schedule parse_schedule(std::string_view text) {
  if (text == "sequential") return Schedule::Sequential;
  if (text == "dataflow") return Schedule::Dataflow;
  throw Error(ErrorKind::ParseError, "unknown schedule '" + std::string(text) + "'");
}

// Case-insensitive glob with '*' and '?'.
inline bool glob_match(std::string_view pattern, std::string_view text) {
  std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  auto eq = [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  };
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || eq(pattern[p], text[t]))) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

struct ReuseMap {
  std::uint64_t default_rf = 1;
  // Patterns match a layer's name or its kind ("dense*" hits every Dense).
  // First match wins.
  std::vector<std::pair<std::string, std::uint64_t>> overrides;

  std::uint64_t rf_for(const nn::LayerDescriptor& layer) const {
    const std::string kind(nn::to_string(layer.kind));
    for (const auto& [pattern, rf] : overrides) {
      if (glob_match(pattern, layer.name) || glob_match(pattern, kind)) return rf;
    }
    return default_rf;
  }
};

// Parses "pattern:rf,pattern:rf".
inline ReuseMap parse_reuse_map(std::uint64_t default_rf, std::string_view overrides) {
  if (default_rf == 0) throw Error(ErrorKind::BadParams, "reuse factor must be positive");
  ReuseMap map{default_rf, {}};
  std::stringstream ss{std::string(overrides)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      throw Error(ErrorKind::ParseError, "reuse override '" + item + "' is not pattern:rf");
    }
    std::uint64_t rf = 0;
    try {
      rf = std::stoull(item.substr(colon + 1));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::ParseError, "reuse override '" + item + "' has a bad factor");
    }
    if (rf == 0) throw Error(ErrorKind::BadParams, "reuse factor must be positive");
    map.overrides.emplace_back(item.substr(0, colon), rf);
  }
  return map;
}

// Default 32, Dense and Sigmoid layers 260: the deployed configuration.
inline ReuseMap deployed_reuse_map() { return parse_reuse_map(32, "dense*:260,sigmoid*:260"); }

struct LayerEstimate {
  std::string name;
  nn::LayerKind kind = nn::LayerKind::Dense;
  std::uint64_t rf = 1;
  std::uint64_t mult_count = 0;
  std::uint64_t multipliers = 0;
  std::uint64_t logic_units = 0;
  std::uint64_t memory_bits = 0;
  std::uint64_t cycles = 0;
  double latency_s = 0.0;
};

struct ResourceEstimate {
  Schedule schedule = Schedule::Sequential;
  double clock_hz = kDefaultClockHz;
  std::vector<LayerEstimate> layers;
  std::uint64_t multipliers = 0;
  std::uint64_t logic_units = 0;
  std::uint64_t memory_bits = 0;
  std::uint64_t cycles = 0;
  double latency_s = 0.0;

  double frames_per_second() const { return latency_s > 0.0 ? 1.0 / latency_s : 0.0; }
};

inline std::uint64_t mult_count(const nn::LayerDescriptor& layer) { return layer.mult_count(); }

inline LayerEstimate estimate_layer(const nn::LayerDescriptor& layer, std::uint64_t rf, double clock_hz,
                                    int total_bits = 16) {
  if (rf == 0) throw Error(ErrorKind::BadParams, "reuse factor must be positive");
  if (!(clock_hz > 0.0)) throw Error(ErrorKind::BadParams, "clock must be positive");
  LayerEstimate e;
  e.name = layer.name;
  e.kind = layer.kind;
  e.rf = rf;
  e.mult_count = layer.mult_count();
  e.multipliers = (e.mult_count + rf - 1) / rf;
  e.logic_units = e.multipliers * kLogicUnitsPerMultiplier;
  e.memory_bits = static_cast<std::uint64_t>(layer.param_count()) * static_cast<std::uint64_t>(total_bits);
  e.cycles = (e.mult_count > 0 ? layer.invocations() * rf : 0) + kPipelineFill;
  e.latency_s = static_cast<double>(e.cycles) / clock_hz;
  return e;
}

// `plan` supplies each layer's word width for memory sizing; 16 bits when null.
inline ResourceEstimate estimate_model(const nn::ModelDescriptor& d, const ReuseMap& reuse,
                                       const quant::PrecisionPlan* plan, double clock_hz, Schedule schedule) {
  ResourceEstimate total;
  total.schedule = schedule;
  total.clock_hz = clock_hz;
  std::uint64_t sum_cycles = 0, max_work = 0, sum_fill = 0;
  for (const auto& layer : d.layers) {
    const int bits = plan ? plan->at(layer.name).total_bits : 16;
    auto e = estimate_layer(layer, reuse.rf_for(layer), clock_hz, bits);
    total.multipliers += e.multipliers;
    total.logic_units += e.logic_units;
    total.memory_bits += e.memory_bits;
    sum_cycles += e.cycles;
    max_work = std::max(max_work, e.cycles - kPipelineFill);
    sum_fill += kPipelineFill;
    total.layers.push_back(std::move(e));
  }
  total.cycles = schedule == Schedule::Sequential ? sum_cycles : max_work + sum_fill;
  total.latency_s = static_cast<double>(total.cycles) / clock_hz;
  return total;
}

struct BudgetReport {
  bool pass = false;
  double latency_s = 0.0;
  double deadline_s = 0.0;
  double slack_s = 0.0;
};

// Inclusive at the boundary: latency == deadline passes.
inline BudgetReport check_budget(double latency_s, double deadline_s) {
  if (!(deadline_s > 0.0)) throw Error(ErrorKind::BadParams, "deadline must be positive");
  return {latency_s <= deadline_s, latency_s, deadline_s, deadline_s - latency_s};
}

inline BudgetReport check_budget(const ResourceEstimate& e, double deadline_s) {
  return check_budget(e.latency_s, deadline_s);
}

inline double frames_per_second(double latency_s) { return 1.0 / latency_s; }

inline void write_table(std::ostream& os, const ResourceEstimate& e) {
  os << std::left << std::setw(18) << "layer" << std::setw(12) << "kind" << std::right << std::setw(6) << "rf"
     << std::setw(11) << "mults" << std::setw(10) << "mult_hw" << std::setw(11) << "logic" << std::setw(11)
     << "mem_bits" << std::setw(9) << "cycles" << '\n';
  for (const auto& l : e.layers) {
    os << std::left << std::setw(18) << l.name << std::setw(12) << nn::to_string(l.kind) << std::right
       << std::setw(6) << l.rf << std::setw(11) << l.mult_count << std::setw(10) << l.multipliers << std::setw(11)
       << l.logic_units << std::setw(11) << l.memory_bits << std::setw(9) << l.cycles << '\n';
  }
  os << "total (" << to_string(e.schedule) << "): multipliers=" << e.multipliers << " logic_units=" << e.logic_units
     << " memory_bits=" << e.memory_bits << " cycles=" << e.cycles << " latency_ms=" << std::setprecision(6)
     << e.latency_s * 1e3 << " fps=" << e.frames_per_second() << '\n';
}

inline void write_csv(std::ostream& os, const ResourceEstimate& e) {
  os << "layer,kind,rf,mult_count,multipliers,logic_units,memory_bits,cycles,latency_s\n";
  for (const auto& l : e.layers) {
    os << l.name << ',' << nn::to_string(l.kind) << ',' << l.rf << ',' << l.mult_count << ',' << l.multipliers << ','
       << l.logic_units << ',' << l.memory_bits << ',' << l.cycles << ',' << l.latency_s << '\n';
  }
  os << "TOTAL_" << to_string(e.schedule) << ",," << ",," << e.multipliers << ',' << e.logic_units << ','
     << e.memory_bits << ',' << e.cycles << ',' << e.latency_s << '\n';
}

}  // namespace blm::perf
