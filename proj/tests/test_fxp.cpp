#include <gtest/gtest.h>

#include <random>

#include "blm/fxp.hpp"
#include "rational_oracle.hpp"

using namespace blm;
using namespace blm::fxp;

namespace {

oracle::Format fmt(const FixedSpec& s) {
  return {s.total_bits, s.integer_bits,
          s.rounding == Rounding::NearestEven ? oracle::Round::NearestEven : oracle::Round::Truncate,
          s.overflow == Overflow::Saturate ? oracle::Over::Saturate : oracle::Over::Wrap};
}

}  // namespace

TEST(FixedSpec, Fx16_7) {
  const auto s = make_spec(16, 7);
  EXPECT_EQ(s.frac_bits(), 9);
  EXPECT_DOUBLE_EQ(s.ulp(), 0.001953125);
  EXPECT_DOUBLE_EQ(s.min_value(), -64.0);
  EXPECT_DOUBLE_EQ(s.max_value(), 63.998046875);
}

TEST(FixedSpec, Fx18_10) {
  const auto s = make_spec(18, 10);
  EXPECT_DOUBLE_EQ(s.ulp(), 1.0 / 256);
  EXPECT_DOUBLE_EQ(s.min_value(), -512.0);
  EXPECT_DOUBLE_EQ(s.max_value(), 511.99609375);
}

TEST(FixedSpec, RejectsBadShapes) {
  EXPECT_THROW(make_spec(16, 17), Error);
  EXPECT_THROW(make_spec(16, 0), Error);
  EXPECT_THROW(make_spec(3, 1), Error);
  EXPECT_THROW(make_spec(33, 1), Error);
  try {
    make_spec(16, 17);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BadSpec);
  }
}

TEST(FixedSpec, TextNotation) {
  const auto s = parse_spec("fx<16,7>");
  EXPECT_EQ(s.total_bits, 16);
  EXPECT_EQ(s.integer_bits, 7);
  EXPECT_EQ(to_string(s), "fx<16,7>");
  EXPECT_EQ(parse_spec("fx<18,10>").integer_bits, 10);
  EXPECT_THROW(parse_spec("fx<16>"), Error);
  EXPECT_THROW(parse_spec("ac<16,7>"), Error);
  EXPECT_THROW(parse_spec("fx<16,17>"), Error);
  EXPECT_EQ(parse_rounding("truncate"), Rounding::Truncate);
  EXPECT_EQ(parse_overflow("wrap"), Overflow::Wrap);
}

TEST(Quantize, Examples) {
  const auto s = make_spec(16, 7);
  auto r = quantize(0.5, s);
  EXPECT_EQ(to_real(r.value), 0.5);
  EXPECT_FALSE(r.overflowed);

  r = quantize(100.0, s);
  EXPECT_EQ(to_real(r.value), 63.998046875);
  EXPECT_TRUE(r.overflowed);

  EXPECT_EQ(to_real(quantize(0.0001, s).value), 0.0);
  EXPECT_THROW(quantize(std::nan(""), s), Error);
  EXPECT_THROW(quantize(INFINITY, s), Error);
}

TEST(Quantize, TiesGoToEven) {
  const auto s = make_spec(8, 8);  // integer grid
  EXPECT_EQ(quantize(0.5, s).value.code, 0);
  EXPECT_EQ(quantize(1.5, s).value.code, 2);
  EXPECT_EQ(quantize(2.5, s).value.code, 2);
  EXPECT_EQ(quantize(-0.5, s).value.code, 0);
  EXPECT_EQ(quantize(-1.5, s).value.code, -2);
  const auto t = make_spec(8, 8, Rounding::Truncate);
  EXPECT_EQ(quantize(-0.5, t).value.code, -1);  // toward minus infinity
  EXPECT_EQ(quantize(1.9, t).value.code, 1);
}

TEST(Quantize, WrapKeepsLowBits) {
  const auto s = make_spec(8, 8, Rounding::NearestEven, Overflow::Wrap);
  auto r = quantize(130.0, s);
  EXPECT_TRUE(r.overflowed);
  EXPECT_EQ(r.value.code, 130 - 256);
  EXPECT_EQ(quantize(-129.0, s).value.code, 127);
}

TEST(Quantize, WrapOfHugeValuesIsFlagged) {
  const auto s = make_spec(16, 7, Rounding::NearestEven, Overflow::Wrap);
  for (double x : {1e30, -1e30, 1e300, 0x1p80 + 0x1p40}) {
    const auto r = quantize(x, s);
    EXPECT_TRUE(r.overflowed) << x;
    EXPECT_EQ(r.value.code, 0) << x;  // low 16 bits of x * 2^9 are zero
  }
}

TEST(ToReal, Examples) {
  const auto s = make_spec(16, 7);
  EXPECT_EQ(to_real({512, s}), 1.0);
  EXPECT_EQ(to_real({0, s}), 0.0);
  EXPECT_EQ(to_real({-32768, s}), -64.0);
}

TEST(Arithmetic, Examples) {
  const auto s = make_spec(16, 7);
  const auto half = quantize(0.5, s).value, quarter = quantize(0.25, s).value;
  auto m = fx_mul(half, quarter, s);
  EXPECT_EQ(to_real(m.value), 0.125);
  EXPECT_FALSE(m.overflowed);

  m = fx_mul(quantize(60.0, s).value, quantize(2.0, s).value, s);
  EXPECT_EQ(to_real(m.value), 63.998046875);
  EXPECT_TRUE(m.overflowed);

  const FixedValue zero{0, s};
  for (std::int64_t c : {std::int64_t{-32768}, std::int64_t{-1}, std::int64_t{0}, std::int64_t{77}, std::int64_t{32767}}) {
    const FixedValue a{c, s};
    const auto sum = fx_add(a, zero, s);
    EXPECT_EQ(sum.value, a);
    EXPECT_FALSE(sum.overflowed);
  }
}

TEST(Properties, RoundTripWithinHalfUlp) {
  std::mt19937_64 rng(1);
  for (int i = 1; i <= 15; ++i) {
    const auto s = make_spec(16, i);
    const auto t = make_spec(16, i, Rounding::Truncate);
    std::uniform_real_distribution<double> u(s.min_value(), s.max_value());
    for (int k = 0; k < 20000; ++k) {
      const double x = u(rng);
      EXPECT_LE(std::fabs(to_real(quantize(x, s).value) - x), s.ulp() / 2);
      EXPECT_LT(std::fabs(to_real(quantize(x, t).value) - x), t.ulp());
    }
  }
}

TEST(Properties, QuantizeIsMonotone) {
  std::mt19937_64 rng(2);
  const auto s = make_spec(12, 5);
  std::uniform_real_distribution<double> u(-80.0, 80.0);
  std::vector<double> xs(50000);
  for (auto& x : xs) x = u(rng);
  std::sort(xs.begin(), xs.end());
  double prev = -INFINITY;
  for (double x : xs) {
    const double q = to_real(quantize(x, s).value);
    ASSERT_GE(q, prev) << x;
    prev = q;
  }
}

TEST(Properties, QuantizeMatchesRationalOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> wd(4, 32);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> ed(-20, 40);
  for (int k = 0; k < 20000; ++k) {
    const int w = wd(rng);
    std::uniform_int_distribution<int> id(1, w);
    const auto s = make_spec(w, id(rng), k % 2 ? Rounding::Truncate : Rounding::NearestEven,
                             k % 3 ? Overflow::Saturate : Overflow::Wrap);
    const double x = std::ldexp(u(rng), ed(rng));
    const auto got = quantize(x, s);
    const auto want = oracle::round_to(oracle::exact(x), fmt(s));
    ASSERT_EQ(got.value.code, want.code) << x << " " << to_string(s);
    ASSERT_EQ(got.overflowed, want.overflow);
  }
}

// Products and sums of random operands under random formats, checked bit for
// bit against exact rational arithmetic; flags must match exactly too.
TEST(Properties, WideArithmeticMatchesRationalOracle) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> wd(4, 32);
  for (int k = 0; k < 100000; ++k) {
    auto random_spec = [&](Rounding r, Overflow o) {
      const int w = wd(rng);
      return make_spec(w, std::uniform_int_distribution<int>(1, w)(rng), r, o);
    };
    auto random_value = [&](const FixedSpec& s) {
      return FixedValue{std::uniform_int_distribution<std::int64_t>(s.min_code(), s.max_code())(rng), s};
    };
    const auto sa = random_spec(Rounding::NearestEven, Overflow::Saturate);
    const auto sb = random_spec(Rounding::NearestEven, Overflow::Saturate);
    const auto out = random_spec(k % 2 ? Rounding::Truncate : Rounding::NearestEven,
                                 k % 4 == 0 ? Overflow::Wrap : Overflow::Saturate);
    const auto a = random_value(sa), b = random_value(sb);
    const auto ea = oracle::value_of(a.code, sa.frac_bits()), eb = oracle::value_of(b.code, sb.frac_bits());

    const auto m = fx_mul(a, b, out);
    const auto wm = oracle::round_to(ea * eb, fmt(out));
    ASSERT_EQ(m.value.code, wm.code);
    ASSERT_EQ(m.overflowed, wm.overflow);

    const auto s = fx_add(a, b, out);
    const auto ws = oracle::round_to(ea + eb, fmt(out));
    ASSERT_EQ(s.value.code, ws.code);
    ASSERT_EQ(s.overflowed, ws.overflow);
  }
}

TEST(Properties, OverflowFlagIffOutOfRange) {
  const auto s = make_spec(10, 4);
  for (std::int64_t a = -600; a <= 600; a += 7) {
    for (std::int64_t b = -600; b <= 600; b += 11) {
      const FixedValue x{a, make_spec(12, 4)}, y{b, make_spec(12, 4)};
      const double exact = to_real(x) * to_real(y);  // exact in double
      const auto r = fx_mul(x, y, s);
      const double rounded = std::nearbyint(std::ldexp(exact, s.frac_bits()));
      const bool outside = rounded > s.max_code() || rounded < s.min_code();
      ASSERT_EQ(r.overflowed, outside);
    }
  }
}

TEST(Requantize, FastPathAgreesWithWide) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> vd(-(std::int64_t{1} << 50), std::int64_t{1} << 50);
  for (int k = 0; k < 50000; ++k) {
    const auto s = make_spec(16, 1 + k % 16, k % 2 ? Rounding::Truncate : Rounding::NearestEven,
                             k % 3 ? Overflow::Saturate : Overflow::Wrap);
    const auto v = vd(rng) >> (k % 40);
    const int src = 10 + k % 30;
    const auto a = requantize64(v, src, s), b = requantize(wide_int{v}, src, s);
    ASSERT_EQ(a.value.code, b.value.code);
    ASSERT_EQ(a.overflowed, b.overflowed);
  }
}

TEST(OverflowLog, CountsPerSite) {
  OverflowLog log;
  log.record("dense_1");
  log.record("dense_1", 3);
  log.record("relu_1", 0);
  EXPECT_EQ(log.count("dense_1"), 4u);
  EXPECT_EQ(log.count("relu_1"), 0u);
  EXPECT_EQ(log.total(), 4u);
  OverflowLog other;
  other.record("conv", 2);
  log.merge(other);
  EXPECT_EQ(log.total(), 6u);
  EXPECT_EQ(log.counts().size(), 2u);
}
