#pragma once

// Deterministic model of the host <-> accelerator data path.
//
// The host (32-bit port) writes the frame into an input RAM of 260 16-bit
// words, triggers the IP, the IP (16-bit port) reads its inputs, runs the
// quantized network and fills a 520-word output RAM, raises an interrupt, and
// the host reads the results back. Two 16-bit codes share one 32-bit host
// word: even index in the low half, little-endian bytes.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blm/error.hpp"
#include "blm/fxp.hpp"
#include "blm/nn/infer.hpp"
#include "blm/perf.hpp"
#include "blm/quant/quantized_model.hpp"

namespace blm::bridge {

inline constexpr std::size_t kInputHalfWords = nn::kFrameSize;      // 260
inline constexpr std::size_t kOutputHalfWords = nn::kOutputSize;    // 520
inline constexpr std::size_t kInputHostWords = kInputHalfWords / 2;   // 130
inline constexpr std::size_t kOutputHostWords = kOutputHalfWords / 2; // 260
inline constexpr int kPortBits = 16;

inline std::uint32_t pack_pair(std::uint16_t even, std::uint16_t odd) {
  return static_cast<std::uint32_t>(even) | (static_cast<std::uint32_t>(odd) << 16);
}

inline void require_port_width(const fxp::FixedSpec& spec) {
  if (spec.total_bits != kPortBits) {
    throw Error(ErrorKind::BadSpec, "bridge ports carry 16-bit words, format is " + fxp::to_string(spec));
  }
}

// Quantizes each value and packs code pairs into 32-bit host words.
inline std::vector<std::uint32_t> pack(std::span<const double> values, const fxp::FixedSpec& spec) {
  require_port_width(spec);
  if (values.size() % 2 != 0) throw Error(ErrorKind::SizeMismatch, "packing needs an even number of values");
  std::vector<std::uint32_t> words(values.size() / 2);
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto lo = static_cast<std::uint16_t>(fxp::quantize(values[2 * w], spec).value.code);
    const auto hi = static_cast<std::uint16_t>(fxp::quantize(values[2 * w + 1], spec).value.code);
    words[w] = pack_pair(lo, hi);
  }
  return words;
}

inline std::vector<double> unpack(std::span<const std::uint32_t> words, const fxp::FixedSpec& spec) {
  require_port_width(spec);
  std::vector<double> values(words.size() * 2);
  for (std::size_t w = 0; w < words.size(); ++w) {
    values[2 * w] = fxp::to_real({static_cast<std::int16_t>(words[w] & 0xFFFFu), spec});
    values[2 * w + 1] = fxp::to_real({static_cast<std::int16_t>(words[w] >> 16), spec});
  }
  return values;
}

inline std::array<std::uint32_t, kInputHostWords> pack_inputs(std::span<const double> values,
                                                              const fxp::FixedSpec& spec) {
  if (values.size() != nn::kFrameSize) {
    throw Error(ErrorKind::SizeMismatch, "input packing needs 260 values, got " + std::to_string(values.size()));
  }
  const auto v = pack(values, spec);
  std::array<std::uint32_t, kInputHostWords> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

inline std::vector<double> unpack_outputs(std::span<const std::uint32_t> words, const fxp::FixedSpec& spec) {
  if (words.size() != kOutputHostWords) {
    throw Error(ErrorKind::SizeMismatch, "output unpacking needs 260 words, got " + std::to_string(words.size()));
  }
  return unpack(words, spec);
}

// On-chip buffers as seen from both ports.
class BufferModel {
 public:
  void host_write_input(std::size_t word, std::uint32_t value) {
    input_.at(2 * word) = static_cast<std::uint16_t>(value & 0xFFFFu);
    input_.at(2 * word + 1) = static_cast<std::uint16_t>(value >> 16);
  }
  std::uint16_t ip_read_input(std::size_t index) const { return input_.at(index); }
  void ip_write_output(std::size_t index, std::uint16_t value) { output_.at(index) = value; }
  std::uint32_t host_read_output(std::size_t word) const { return pack_pair(output_.at(2 * word), output_.at(2 * word + 1)); }

 private:
  std::array<std::uint16_t, kInputHalfWords> input_{};
  std::array<std::uint16_t, kOutputHalfWords> output_{};
};

enum class IpLatencySource { Fixed, Estimate, Measured };

inline std::string_view to_string(IpLatencySource s) {
  switch (s) {
    case IpLatencySource::Fixed: return "fixed";
    case IpLatencySource::Estimate: return "estimate";
    case IpLatencySource::Measured: return "measured";
  }
  return "?";
}

// Per-step costs. The interrupt step also absorbs OS scheduling delay, drawn
// from a lognormal (median, sigma) clamped to [0, max]. The split of the
// non-IP overhead across steps is uncalibrated; only the aggregate is tuned.
struct TimingConfig {
  std::uint64_t host_write_ns_per_word = 20;
  std::uint64_t trigger_ns = 1'000;
  IpLatencySource ip_source = IpLatencySource::Fixed;
  std::uint64_t ip_latency_ns = 1'570'000;
  double ip_clock_hz = perf::kDefaultClockHz;  // Estimate mode
  std::uint64_t ip_write_ns_per_halfword = 10;
  std::uint64_t interrupt_ns = 0;              // fixed part of Step 7
  double jitter_median_ns = 120'000.0;
  double jitter_sigma = 0.5;
  double jitter_max_ns = 700'000.0;
  std::uint64_t host_read_ns_per_word = 20;
  std::uint64_t seed = 1;

  static TimingConfig zero_overhead(std::uint64_t ip_latency_ns) {
    TimingConfig t;
    t.host_write_ns_per_word = 0;
    t.trigger_ns = 0;
    t.ip_latency_ns = ip_latency_ns;
    t.ip_write_ns_per_halfword = 0;
    t.interrupt_ns = 0;
    t.jitter_median_ns = 0.0;
    t.jitter_max_ns = 0.0;
    t.host_read_ns_per_word = 0;
    return t;
  }
};

inline nlohmann::json to_json(const TimingConfig& t) {
  return {{"format", 1},
          {"host_write_ns_per_word", t.host_write_ns_per_word},
          {"trigger_ns", t.trigger_ns},
          {"ip_source", std::string(to_string(t.ip_source))},
          {"ip_latency_ns", t.ip_latency_ns},
          {"ip_clock_hz", t.ip_clock_hz},
          {"ip_write_ns_per_halfword", t.ip_write_ns_per_halfword},
          {"interrupt_ns", t.interrupt_ns},
          {"jitter_median_ns", t.jitter_median_ns},
          {"jitter_sigma", t.jitter_sigma},
          {"jitter_max_ns", t.jitter_max_ns},
          {"host_read_ns_per_word", t.host_read_ns_per_word},
          {"seed", t.seed}};
}

inline TimingConfig timing_from_json(const nlohmann::json& doc) {
  TimingConfig t;
  try {
    t.host_write_ns_per_word = doc.value("host_write_ns_per_word", t.host_write_ns_per_word);
    t.trigger_ns = doc.value("trigger_ns", t.trigger_ns);
    const auto src = doc.value("ip_source", std::string("fixed"));
    if (src == "fixed") {
      t.ip_source = IpLatencySource::Fixed;
    } else if (src == "estimate") {
      t.ip_source = IpLatencySource::Estimate;
    } else if (src == "measured") {
      t.ip_source = IpLatencySource::Measured;
    } else {
      throw Error(ErrorKind::ParseError, "unknown ip_source '" + src + "'");
    }
    t.ip_latency_ns = doc.value("ip_latency_ns", t.ip_latency_ns);
    t.ip_clock_hz = doc.value("ip_clock_hz", t.ip_clock_hz);
    t.ip_write_ns_per_halfword = doc.value("ip_write_ns_per_halfword", t.ip_write_ns_per_halfword);
    t.interrupt_ns = doc.value("interrupt_ns", t.interrupt_ns);
    t.jitter_median_ns = doc.value("jitter_median_ns", t.jitter_median_ns);
    t.jitter_sigma = doc.value("jitter_sigma", t.jitter_sigma);
    t.jitter_max_ns = doc.value("jitter_max_ns", t.jitter_max_ns);
    t.host_read_ns_per_word = doc.value("host_read_ns_per_word", t.host_read_ns_per_word);
    t.seed = doc.value("seed", t.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  if (t.jitter_median_ns < 0.0 || t.jitter_sigma < 0.0 || t.jitter_max_ns < 0.0) {
    throw Error(ErrorKind::BadParams, "jitter parameters must be non-negative");
  }
  return t;
}

struct TraceEvent {
  int step = 0;  // 1 write, 2 trigger, 3 IP execution (steps 3-5), 6 output fill, 7 interrupt, 8 read-back
  std::uint64_t t_start_ns = 0;
  std::uint64_t t_end_ns = 0;
  std::string summary;

  std::uint64_t duration_ns() const { return t_end_ns - t_start_ns; }
};

struct TransactionTrace {
  std::vector<TraceEvent> events;
  std::uint64_t total_latency_ns = 0;
};

inline void write_trace_csv(std::ostream& os, const TransactionTrace& trace, bool header = true) {
  if (header) os << "step,t_start_ns,t_end_ns\n";
  for (const auto& e : trace.events) os << e.step << ',' << e.t_start_ns << ',' << e.t_end_ns << '\n';
}

struct TransactionResult {
  nn::InferenceOutput output;
  TransactionTrace trace;
};

// Owns one buffer pair; at most one transaction may be in flight.
class BridgeSimulator {
 public:
  BridgeSimulator(std::shared_ptr<const quant::QuantizedModel> model, TimingConfig timing)
      : model_(std::move(model)), timing_(timing), rng_(timing.seed) {
    if (!model_) throw Error(ErrorKind::BadParams, "bridge needs a model");
    const auto& d = model_->descriptor;
    if (!(d.input_shape == nn::Shape{nn::kFrameSize, 1}) || d.output_size() != nn::kOutputSize) {
      throw Error(ErrorKind::ShapeError, "bridge buffers hold 260 inputs and 520 outputs");
    }
    require_port_width(model_->input_spec);
    require_port_width(model_->output_spec());
    if (timing_.ip_source == IpLatencySource::Estimate) {
      const auto est = perf::estimate_model(d, perf::deployed_reuse_map(), &model_->plan, timing_.ip_clock_hz,
                                            perf::Schedule::Sequential);
      timing_.ip_latency_ns = static_cast<std::uint64_t>(std::llround(est.latency_s * 1e9));
    }
  }

  const TimingConfig& timing() const { return timing_; }

  TransactionResult run_transaction(std::span<const double> frame) {
    bool expected = false;
    if (!busy_.compare_exchange_strong(expected, true)) {
      throw Error(ErrorKind::Busy, "a bridge transaction is already in flight");
    }
    struct Release {
      std::atomic<bool>& flag;
      ~Release() { flag.store(false); }
    } release{busy_};

    if (frame.size() != nn::kFrameSize) {
      throw Error(ErrorKind::SizeMismatch, "frame needs 260 values, got " + std::to_string(frame.size()));
    }

    TransactionResult result;
    auto& trace = result.trace;
    std::uint64_t now = 0;
    auto step = [&](int id, std::uint64_t duration, std::string summary) {
      trace.events.push_back({id, now, now + duration, std::move(summary)});
      now += duration;
    };

    // Step 1: host grids the frame and writes 130 packed words.
    fxp::OverflowLog log;
    const auto in_codes = nn::quantize_input(*model_, frame, log);
    for (std::size_t w = 0; w < kInputHostWords; ++w) {
      buffers_.host_write_input(w, pack_pair(static_cast<std::uint16_t>(in_codes[2 * w]),
                                             static_cast<std::uint16_t>(in_codes[2 * w + 1])));
    }
    step(1, kInputHostWords * timing_.host_write_ns_per_word, "host wrote 130 words");

    // Step 2: trigger.
    step(2, timing_.trigger_ns, "ip triggered");

    // Steps 3-5: IP reads the input RAM and runs the network.
    const auto wall_start = std::chrono::steady_clock::now();
    std::vector<std::int32_t> codes(kInputHalfWords);
    for (std::size_t i = 0; i < kInputHalfWords; ++i) {
      codes[i] = static_cast<std::int16_t>(buffers_.ip_read_input(i));
    }
    auto act = nn::forward_fixed_codes(*model_, codes, log);
    const auto& out_codes = act.codes[model_->descriptor.output_layer + 1];
    std::uint64_t ip_ns = timing_.ip_latency_ns;
    if (timing_.ip_source == IpLatencySource::Measured) {
      ip_ns = static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - wall_start).count());
    }
    step(3, ip_ns, "ip executed");

    // Step 6: IP fills the output RAM over its 16-bit port.
    for (std::size_t i = 0; i < kOutputHalfWords; ++i) {
      buffers_.ip_write_output(i, static_cast<std::uint16_t>(out_codes[i]));
    }
    step(6, kOutputHalfWords * timing_.ip_write_ns_per_halfword, "ip wrote 520 half-words");

    // Step 7: interrupt and scheduling delay.
    step(7, timing_.interrupt_ns + sample_jitter(), "interrupt serviced");

    // Step 8: host reads 260 words back.
    std::vector<std::uint32_t> read_back(kOutputHostWords);
    for (std::size_t w = 0; w < kOutputHostWords; ++w) read_back[w] = buffers_.host_read_output(w);
    step(8, kOutputHostWords * timing_.host_read_ns_per_word, "host read 260 words");

    result.output.values = unpack_outputs(read_back, model_->output_spec());
    result.output.decision = workbench::decide_pairs(result.output.values);
    result.output.overflow = std::move(log);
    trace.total_latency_ns = now;
    return result;
  }

  TransactionResult run_transaction(const nn::Frame& frame) { return run_transaction(frame.values()); }

 private:
  std::uint64_t sample_jitter() {
    if (timing_.jitter_median_ns <= 0.0 || timing_.jitter_max_ns <= 0.0) return 0;
    std::lognormal_distribution<double> dist(std::log(timing_.jitter_median_ns), timing_.jitter_sigma);
    return static_cast<std::uint64_t>(std::llround(std::clamp(dist(rng_), 0.0, timing_.jitter_max_ns)));
  }

  std::shared_ptr<const quant::QuantizedModel> model_;
  TimingConfig timing_;
  std::mt19937_64 rng_;
  BufferModel buffers_;
  std::atomic<bool> busy_{false};
};

}  // namespace blm::bridge
