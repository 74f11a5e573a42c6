#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "blm/fxp.hpp"

namespace blm::nn {

// Piecewise-constant sigmoid over [-8, 8). Each bucket holds sigmoid at its
// midpoint, quantized to the output format and capped at 1 - ulp. Inputs
// below -8 give 0, inputs at or above 8 give 1 - ulp.
//
// Formats up to 16 bits use 64 buckets per unit (1024 entries). Wider formats
// get one extra bit of table resolution per extra bit of width, up to 2^14
// buckets per unit, so the table error keeps shrinking with the format.
struct SigmoidTable {
  static constexpr double kRange = 8.0;

  static int log2_buckets_for(const fxp::FixedSpec& s) { return std::clamp(6 + (s.total_bits - 16), 6, 14); }

  fxp::FixedSpec spec;
  int log2_buckets_per_unit = 6;
  std::vector<std::int32_t> codes;
  std::int32_t high_code = 0;

  explicit SigmoidTable(const fxp::FixedSpec& out_spec)
      : spec(out_spec), log2_buckets_per_unit(log2_buckets_for(out_spec)) {
    const int per_unit = 1 << log2_buckets_per_unit;
    const int entries = static_cast<int>(2 * kRange) * per_unit;
    high_code = static_cast<std::int32_t>(fxp::quantize(1.0 - spec.ulp(), spec).value.code);
    codes.resize(static_cast<std::size_t>(entries));
    for (int j = 0; j < entries; ++j) {
      const double x = -kRange + (j + 0.5) / per_unit;
      const auto q = fxp::quantize(1.0 / (1.0 + std::exp(-x)), spec).value.code;
      codes[static_cast<std::size_t>(j)] = static_cast<std::int32_t>(std::min<std::int64_t>(q, high_code));
    }
  }

  std::size_t size() const { return codes.size(); }

  // Looks up a raw input code carrying `in_frac` fraction bits.
  std::int32_t lookup(std::int64_t code, int in_frac) const {
    // bucket = floor(x * buckets_per_unit) + entries / 2, computed exactly on the code.
    std::int64_t scaled;
    if (in_frac >= log2_buckets_per_unit) {
      scaled = code >> (in_frac - log2_buckets_per_unit);
    } else {
      const int up = log2_buckets_per_unit - in_frac;
      const std::int64_t limit = std::int64_t{1} << 40;
      scaled = code > limit ? limit : (code < -limit ? -limit : code * (std::int64_t{1} << up));
    }
    const auto entries = static_cast<std::int64_t>(codes.size());
    const std::int64_t bucket = scaled + entries / 2;
    if (bucket < 0) return 0;
    if (bucket >= entries) return high_code;
    return codes[static_cast<std::size_t>(bucket)];
  }
};

inline fxp::FixedValue sigmoid_fixed(const fxp::FixedValue& x, const SigmoidTable& table) {
  return {table.lookup(x.code, x.spec.frac_bits()), table.spec};
}

}  // namespace blm::nn
