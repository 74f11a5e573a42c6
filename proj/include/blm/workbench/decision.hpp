#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "blm/error.hpp"

namespace blm::workbench {

// Dominant beam-loss source; the numeric values are the wire encoding.
enum class Source : unsigned char { MI = 0, RR = 1 };

inline std::string_view to_string(Source s) { return s == Source::MI ? "MI" : "RR"; }

// Sums even (MI) and odd (RR) slots of a pair-interleaved output. Ties go to MI.
inline Source decide_pairs(std::span<const double> output) {
  double mi = 0.0, rr = 0.0;
  for (std::size_t i = 0; i + 1 < output.size(); i += 2) {
    mi += output[i];
    rr += output[i + 1];
  }
  return rr > mi ? Source::RR : Source::MI;
}

inline Source decide_source(std::span<const double> output) {
  if (output.size() != 520) {
    throw Error(ErrorKind::SizeMismatch, "decision needs 520 values, got " + std::to_string(output.size()));
  }
  return decide_pairs(output);
}

}  // namespace blm::workbench
