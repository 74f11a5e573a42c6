#pragma once

// Datagram formats, all little-endian.
//
//   input  "BLM1" | seq u32 | send_timestamp_ns u64 | 260 x f32            = 1056 bytes
//   output "DBL1" | seq u32 | 520 x f32 | decision u8 | latency_ns u32    = 2093 bytes

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blm/nn/descriptor.hpp"
#include "blm/workbench/decision.hpp"

namespace blm::node {

inline constexpr std::array<std::uint8_t, 4> kInputMagic{'B', 'L', 'M', '1'};
inline constexpr std::array<std::uint8_t, 4> kOutputMagic{'D', 'B', 'L', '1'};
inline constexpr std::size_t kInputDatagramSize = 4 + 4 + 8 + nn::kFrameSize * 4;
inline constexpr std::size_t kOutputDatagramSize = 4 + 4 + nn::kOutputSize * 4 + 1 + 4;
static_assert(kInputDatagramSize == 1056);
static_assert(kOutputDatagramSize == 2093);

namespace detail {

template <class T>
void put_le(std::uint8_t* dst, T value) {
  static_assert(std::endian::native == std::endian::little);
  std::memcpy(dst, &value, sizeof(T));
}

template <class T>
T get_le(const std::uint8_t* src) {
  T value;
  std::memcpy(&value, src, sizeof(T));
  return value;
}

}  // namespace detail

struct InputDatagram {
  std::uint32_t sequence = 0;
  std::uint64_t send_timestamp_ns = 0;
  std::array<float, nn::kFrameSize> values{};
};

struct OutputDatagram {
  std::uint32_t sequence = 0;
  std::array<float, nn::kOutputSize> values{};
  workbench::Source decision = workbench::Source::MI;
  std::uint32_t latency_ns = 0;
};

inline std::vector<std::uint8_t> encode(const InputDatagram& d) {
  std::vector<std::uint8_t> buf(kInputDatagramSize);
  std::memcpy(buf.data(), kInputMagic.data(), 4);
  detail::put_le(buf.data() + 4, d.sequence);
  detail::put_le(buf.data() + 8, d.send_timestamp_ns);
  for (std::size_t i = 0; i < d.values.size(); ++i) detail::put_le(buf.data() + 16 + 4 * i, d.values[i]);
  return buf;
}

inline std::vector<std::uint8_t> encode(const OutputDatagram& d) {
  std::vector<std::uint8_t> buf(kOutputDatagramSize);
  std::memcpy(buf.data(), kOutputMagic.data(), 4);
  detail::put_le(buf.data() + 4, d.sequence);
  for (std::size_t i = 0; i < d.values.size(); ++i) detail::put_le(buf.data() + 8 + 4 * i, d.values[i]);
  buf[8 + 4 * nn::kOutputSize] = static_cast<std::uint8_t>(d.decision);
  detail::put_le(buf.data() + 8 + 4 * nn::kOutputSize + 1, d.latency_ns);
  return buf;
}

// Returns nullopt for wrong size, wrong magic or non-finite values.
inline std::optional<InputDatagram> decode_input(std::span<const std::uint8_t> buf) {
  if (buf.size() != kInputDatagramSize || std::memcmp(buf.data(), kInputMagic.data(), 4) != 0) return std::nullopt;
  InputDatagram d;
  d.sequence = detail::get_le<std::uint32_t>(buf.data() + 4);
  d.send_timestamp_ns = detail::get_le<std::uint64_t>(buf.data() + 8);
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    d.values[i] = detail::get_le<float>(buf.data() + 16 + 4 * i);
    if (!std::isfinite(d.values[i])) return std::nullopt;
  }
  return d;
}

inline std::optional<OutputDatagram> decode_output(std::span<const std::uint8_t> buf) {
  if (buf.size() != kOutputDatagramSize || std::memcmp(buf.data(), kOutputMagic.data(), 4) != 0) return std::nullopt;
  OutputDatagram d;
  d.sequence = detail::get_le<std::uint32_t>(buf.data() + 4);
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = detail::get_le<float>(buf.data() + 8 + 4 * i);
  const std::uint8_t decision = buf[8 + 4 * nn::kOutputSize];
  if (decision > 1) return std::nullopt;
  d.decision = static_cast<workbench::Source>(decision);
  d.latency_ns = detail::get_le<std::uint32_t>(buf.data() + 8 + 4 * nn::kOutputSize + 1);
  return d;
}

}  // namespace blm::node
