#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "blm/error.hpp"
#include "blm/fxp.hpp"
#include "blm/nn/descriptor.hpp"
#include "blm/workbench/decision.hpp"

namespace blm::nn {

static_assert(std::endian::native == std::endian::little, "weight and wire formats assume a little-endian host");
static_assert(sizeof(float) == 4);

// Dense kernels are [in][out]; Conv1D kernels are [kernel][in_ch][out_ch].
struct LayerWeights {
  std::vector<float> kernel;
  std::vector<float> bias;
};

struct Model {
  ModelDescriptor descriptor;
  std::vector<LayerWeights> weights;  // one entry per layer, empty for weightless layers
};

// Binds a flat little-endian float32 buffer (per layer: kernel then bias, in
// descriptor order) to a descriptor.
inline Model load_weights(std::span<const std::uint8_t> bytes, const ModelDescriptor& descriptor) {
  const std::size_t expected = descriptor.param_count * sizeof(float);
  if (bytes.size() != expected) {
    throw Error(ErrorKind::SizeMismatch, "weight buffer has " + std::to_string(bytes.size()) + " bytes, expected " +
                                             std::to_string(expected));
  }
  Model m{descriptor, {}};
  m.weights.resize(descriptor.layers.size());
  std::size_t offset = 0;
  auto take = [&](std::size_t n) {
    std::vector<float> out(n);
    std::memcpy(out.data(), bytes.data() + offset, n * sizeof(float));
    offset += n * sizeof(float);
    return out;
  };
  for (std::size_t i = 0; i < descriptor.layers.size(); ++i) {
    const auto& l = descriptor.layers[i];
    m.weights[i].kernel = take(l.kernel_count());
    m.weights[i].bias = take(l.bias_count());
    for (float w : m.weights[i].kernel) {
      if (!std::isfinite(w)) throw Error(ErrorKind::NonFinite, "layer '" + l.name + "' has a non-finite weight");
    }
  }
  return m;
}

inline std::vector<std::uint8_t> serialize_weights(const Model& m) {
  std::vector<std::uint8_t> out;
  out.reserve(m.descriptor.param_count * sizeof(float));
  auto put = [&](const std::vector<float>& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    out.insert(out.end(), p, p + v.size() * sizeof(float));
  };
  for (const auto& w : m.weights) {
    put(w.kernel);
    put(w.bias);
  }
  return out;
}

inline Model zero_model(const ModelDescriptor& descriptor) {
  std::vector<std::uint8_t> zeros(descriptor.param_count * sizeof(float), 0);
  return load_weights(zeros, descriptor);
}

// One synchronized reading of the 260 beam-loss monitors.
class Frame {
 public:
  Frame() : values_(kFrameSize, 0.0) {}
  explicit Frame(std::vector<double> values, std::uint32_t sequence = 0, std::uint64_t arrival_ns = 0)
      : values_(std::move(values)), sequence_(sequence), arrival_ns_(arrival_ns) {
    if (values_.size() != kFrameSize) {
      throw Error(ErrorKind::SizeMismatch, "frame needs 260 values, got " + std::to_string(values_.size()));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "frame contains a non-finite value");
    }
  }

  std::span<const double> values() const { return values_; }
  std::uint32_t sequence() const { return sequence_; }
  std::uint64_t arrival_ns() const { return arrival_ns_; }
  void set_sequence(std::uint32_t seq) { sequence_ = seq; }
  void set_arrival_ns(std::uint64_t t) { arrival_ns_ = t; }

 private:
  std::vector<double> values_;
  std::uint32_t sequence_ = 0;
  std::uint64_t arrival_ns_ = 0;
};

struct InferenceOutput {
  std::vector<double> values;  // slot 2i = MI probability of monitor i, 2i+1 = RR
  workbench::Source decision = workbench::Source::MI;
  fxp::OverflowLog overflow;   // populated by the quantized path only
};

}  // namespace blm::nn
