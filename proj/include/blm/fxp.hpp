#pragma once

// Signed two's-complement fixed-point arithmetic, parameterized at run time.
//
// A format fx<W,I> has W total bits and I integer bits, the sign bit counted
// among the integer bits (ac_fixed convention). The fraction therefore has
// W - I bits and one unit in the last place is 2^-(W-I).
//
// Values are held as an integer code plus the format. All arithmetic is done
// exactly on wide integers and re-quantized once into the destination format,
// so results are bit-identical across hosts.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <string_view>

#include "blm/error.hpp"

namespace blm::fxp {

using wide_int = __int128;

enum class Rounding { NearestEven, Truncate };
enum class Overflow { Saturate, Wrap };

inline constexpr int kMinTotalBits = 4;
inline constexpr int kMaxTotalBits = 32;

struct FixedSpec {
  int total_bits = 16;
  int integer_bits = 7;
  Rounding rounding = Rounding::NearestEven;
  Overflow overflow = Overflow::Saturate;

  constexpr int frac_bits() const { return total_bits - integer_bits; }
  constexpr std::int64_t max_code() const { return (std::int64_t{1} << (total_bits - 1)) - 1; }
  constexpr std::int64_t min_code() const { return -(std::int64_t{1} << (total_bits - 1)); }
  double ulp() const { return std::ldexp(1.0, -frac_bits()); }
  double max_value() const { return std::ldexp(static_cast<double>(max_code()), -frac_bits()); }
  double min_value() const { return std::ldexp(static_cast<double>(min_code()), -frac_bits()); }

  friend constexpr bool operator==(const FixedSpec&, const FixedSpec&) = default;
};

inline FixedSpec make_spec(int total_bits, int integer_bits,
                           Rounding rounding = Rounding::NearestEven,
                           Overflow overflow = Overflow::Saturate) {
  if (total_bits < kMinTotalBits || total_bits > kMaxTotalBits) {
    throw Error(ErrorKind::BadSpec, "total bits " + std::to_string(total_bits) + " outside [4, 32]");
  }
  if (integer_bits < 1 || integer_bits > total_bits) {
    throw Error(ErrorKind::BadSpec, "integer bits " + std::to_string(integer_bits) +
                                        " outside [1, " + std::to_string(total_bits) + "]");
  }
  return FixedSpec{total_bits, integer_bits, rounding, overflow};
}

inline std::string to_string(const FixedSpec& spec) {
  return "fx<" + std::to_string(spec.total_bits) + "," + std::to_string(spec.integer_bits) + ">";
}

inline std::ostream& operator<<(std::ostream& os, const FixedSpec& spec) { return os << to_string(spec); }

inline std::string_view to_string(Rounding r) { return r == Rounding::NearestEven ? "nearest_even" : "truncate"; }
inline std::string_view to_string(Overflow o) { return o == Overflow::Saturate ? "saturate" : "wrap"; }

inline Rounding parse_rounding(std::string_view text) {
  if (text == "nearest_even") return Rounding::NearestEven;
  if (text == "truncate") return Rounding::Truncate;
  throw Error(ErrorKind::ParseError, "unknown rounding mode '" + std::string(text) + "'");
}

inline Overflow parse_overflow(std::string_view text) {
  if (text == "saturate") return Overflow::Saturate;
  if (text == "wrap") return Overflow::Wrap;
  throw Error(ErrorKind::ParseError, "unknown overflow mode '" + std::string(text) + "'");
}

// Parses "fx<W,I>" (whitespace tolerated inside the brackets).
inline FixedSpec parse_spec(std::string_view text, Rounding rounding = Rounding::NearestEven,
                            Overflow overflow = Overflow::Saturate) {
  auto fail = [&] { return Error(ErrorKind::ParseError, "expected fx<W,I>, got '" + std::string(text) + "'"); };
  if (text.substr(0, 3) != "fx<" || text.empty() || text.back() != '>') throw fail();
  std::string body(text.substr(3, text.size() - 4));
  auto comma = body.find(',');
  if (comma == std::string::npos) throw fail();
  try {
    std::size_t used_w = 0, used_i = 0;
    std::string w_text = body.substr(0, comma), i_text = body.substr(comma + 1);
    int w = std::stoi(w_text, &used_w);
    int i = std::stoi(i_text, &used_i);
    if (w_text.find_first_not_of(" \t", used_w) != std::string::npos ||
        i_text.find_first_not_of(" \t", used_i) != std::string::npos) {
      throw fail();
    }
    return make_spec(w, i, rounding, overflow);
  } catch (const std::logic_error&) {
    throw fail();
  }
}

struct FixedValue {
  std::int64_t code = 0;
  FixedSpec spec{};

  friend constexpr bool operator==(const FixedValue&, const FixedValue&) = default;
};

struct QuantizeResult {
  FixedValue value;
  bool overflowed = false;
};

inline double to_real(const FixedValue& v) {
  return std::ldexp(static_cast<double>(v.code), -v.spec.frac_bits());
}

namespace detail {

// Floor division by 2^shift, shift >= 0.
inline wide_int floor_shift(wide_int value, int shift) { return value >> shift; }

inline std::int64_t wrap_code(wide_int value, int total_bits) {
  const wide_int modulus = wide_int{1} << total_bits;
  wide_int r = value % modulus;
  if (r < 0) r += modulus;
  if (r >= (modulus >> 1)) r -= modulus;
  return static_cast<std::int64_t>(r);
}

inline QuantizeResult fit_range(wide_int code, const FixedSpec& spec) {
  const wide_int hi = spec.max_code();
  const wide_int lo = spec.min_code();
  if (code >= lo && code <= hi) return {FixedValue{static_cast<std::int64_t>(code), spec}, false};
  if (spec.overflow == Overflow::Saturate) {
    return {FixedValue{static_cast<std::int64_t>(code > hi ? hi : lo), spec}, true};
  }
  return {FixedValue{wrap_code(code, spec.total_bits), spec}, true};
}

}  // namespace detail

// Re-quantizes the exact value `value * 2^-src_frac` into `spec`.
// Shifts are bounded by the 32-bit format limit, so the 128-bit intermediate
// never overflows for inputs up to 2^90 in magnitude.
inline QuantizeResult requantize(wide_int value, int src_frac, const FixedSpec& spec) {
  const int shift = src_frac - spec.frac_bits();
  wide_int code;
  if (shift <= 0) {
    code = value << (-shift);
  } else {
    const wide_int floor = detail::floor_shift(value, shift);
    if (spec.rounding == Rounding::Truncate) {
      code = floor;
    } else {
      const wide_int rem = value - (floor << shift);  // in [0, 2^shift)
      const wide_int half = wide_int{1} << (shift - 1);
      code = floor;
      if (rem > half || (rem == half && (floor & 1) != 0)) code += 1;
    }
  }
  return detail::fit_range(code, spec);
}

// Fast path for 64-bit accumulators; identical results to the wide version.
inline QuantizeResult requantize64(std::int64_t value, int src_frac, const FixedSpec& spec) {
  const int shift = src_frac - spec.frac_bits();
  if (shift > 0 && shift < 63) {
    std::int64_t floor = value >> shift;
    if (spec.rounding == Rounding::NearestEven) {
      const std::int64_t rem = value - static_cast<std::int64_t>(static_cast<std::uint64_t>(floor) << shift);
      const std::int64_t half = std::int64_t{1} << (shift - 1);
      if (rem > half || (rem == half && (floor & 1) != 0)) floor += 1;
    }
    if (floor >= spec.min_code() && floor <= spec.max_code()) return {FixedValue{floor, spec}, false};
    return detail::fit_range(floor, spec);
  }
  return requantize(value, src_frac, spec);
}

inline QuantizeResult requantize(const FixedValue& v, const FixedSpec& spec) {
  if (v.spec.frac_bits() == spec.frac_bits() && v.code >= spec.min_code() && v.code <= spec.max_code()) {
    return {FixedValue{v.code, spec}, false};
  }
  return requantize(wide_int{v.code}, v.spec.frac_bits(), spec);
}

inline QuantizeResult quantize(double x, const FixedSpec& spec) {
  if (!std::isfinite(x)) throw Error(ErrorKind::NonFinite, "cannot quantize non-finite value");
  const double scaled = std::ldexp(x, spec.frac_bits());
  double rounded = std::floor(scaled);
  if (spec.rounding == Rounding::NearestEven) {
    const double diff = scaled - rounded;  // exact: both operands share a binade or rounded == 0
    if (diff > 0.5 || (diff == 0.5 && std::fmod(rounded, 2.0) != 0.0)) rounded += 1.0;
  }
  // Anything beyond 2^80 is out of range for every format; clamp before the
  // integer conversion and let fit_range report the overflow. Wrap of such a
  // value keeps only the low bits, computed with fmod (exact on integers).
  constexpr double kLimit = 0x1p80;
  if (std::fabs(rounded) >= kLimit) {
    if (spec.overflow == Overflow::Saturate) {
      return detail::fit_range(rounded > 0 ? wide_int{1} << 80 : -(wide_int{1} << 80), spec);
    }
    const double low = std::fmod(rounded, std::ldexp(1.0, spec.total_bits));
    return {FixedValue{detail::wrap_code(static_cast<wide_int>(low), spec.total_bits), spec}, true};
  }
  return detail::fit_range(static_cast<wide_int>(rounded), spec);
}

inline QuantizeResult fx_add(const FixedValue& a, const FixedValue& b, const FixedSpec& out) {
  const int frac = std::max(a.spec.frac_bits(), b.spec.frac_bits());
  const wide_int sum = (wide_int{a.code} << (frac - a.spec.frac_bits())) +
                       (wide_int{b.code} << (frac - b.spec.frac_bits()));
  return requantize(sum, frac, out);
}

inline QuantizeResult fx_mul(const FixedValue& a, const FixedValue& b, const FixedSpec& out) {
  const wide_int product = wide_int{a.code} * wide_int{b.code};
  return requantize(product, a.spec.frac_bits() + b.spec.frac_bits(), out);
}

// Saturation/wrap events keyed by site (usually a layer name). One log belongs
// to one inference; it is never shared between threads.
class OverflowLog {
 public:
  void record(const std::string& site, std::uint64_t events = 1) {
    if (events != 0) counts_[site] += events;
  }
  std::uint64_t count(const std::string& site) const {
    auto it = counts_.find(site);
    return it == counts_.end() ? 0 : it->second;
  }
  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (const auto& [_, n] : counts_) sum += n;
    return sum;
  }
  void merge(const OverflowLog& other) {
    for (const auto& [site, n] : other.counts_) counts_[site] += n;
  }
  const std::map<std::string, std::uint64_t>& counts() const { return counts_; }

  friend bool operator==(const OverflowLog&, const OverflowLog&) = default;

 private:
  std::map<std::string, std::uint64_t> counts_;
};

}  // namespace blm::fxp
