#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "blm/error.hpp"
#include "blm/nn/descriptor.hpp"
#include "blm/nn/model.hpp"

namespace blm::workbench {

// Raw monitor readings fall in this band before standardization.
inline constexpr double kRawMin = 105'000.0;
inline constexpr double kRawMax = 120'000.0;

enum class FrameMode { Raw, Standardized };

struct StandardizationParams {
  double mean = 0.0;
  double std = 1.0;
};

// Mean and standard deviation of the uniform raw band.
inline StandardizationParams raw_band_standardization() {
  return {(kRawMin + kRawMax) / 2.0, (kRawMax - kRawMin) / std::sqrt(12.0)};
}

inline std::vector<nn::Frame> synth_frames(std::uint64_t seed, std::size_t n, FrameMode mode) {
  if (n == 0) throw Error(ErrorKind::BadParams, "need at least one frame");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> raw(kRawMin, kRawMax);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<nn::Frame> frames;
  frames.reserve(n);
  for (std::size_t f = 0; f < n; ++f) {
    std::vector<double> v(nn::kFrameSize);
    for (auto& x : v) x = mode == FrameMode::Raw ? raw(rng) : normal(rng);
    frames.emplace_back(std::move(v), static_cast<std::uint32_t>(f));
  }
  return frames;
}

inline std::vector<double> standardize(std::span<const double> values, const StandardizationParams& p) {
  if (!(p.std > 0.0) || !std::isfinite(p.std) || !std::isfinite(p.mean)) {
    throw Error(ErrorKind::BadParams, "standardization needs finite mean and std > 0");
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - p.mean) / p.std;
  return out;
}

inline nn::Frame standardize(const nn::Frame& frame, const StandardizationParams& p) {
  return nn::Frame(standardize(frame.values(), p), frame.sequence(), frame.arrival_ns());
}

// Per-layer standard deviation of generated weights; layers not listed use
// default_scale.
struct LayerScaleProfile {
  double default_scale = 0.1;
  std::map<std::string, double> scales;

  double scale_for(const std::string& layer) const {
    auto it = scales.find(layer);
    return it == scales.end() ? default_scale : it->second;
  }
};

// Kernel and bias of layer l are drawn from Normal(0, scale_l^2), in file order.
inline std::vector<std::uint8_t> synth_weights(std::uint64_t seed, const nn::ModelDescriptor& d,
                                               const LayerScaleProfile& profile) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<float> flat;
  flat.reserve(d.param_count);
  for (const auto& l : d.layers) {
    const double scale = profile.scale_for(l.name);
    if (scale < 0.0 || !std::isfinite(scale)) throw Error(ErrorKind::BadParams, "layer scale must be >= 0");
    for (std::size_t i = 0; i < l.param_count(); ++i) {
      const double w = scale * normal(rng);
      flat.push_back(w == 0.0 ? 0.0f : static_cast<float>(w));  // no negative zeros
    }
  }
  std::vector<std::uint8_t> bytes(flat.size() * sizeof(float));
  std::memcpy(bytes.data(), flat.data(), bytes.size());
  return bytes;
}

inline nn::Model synth_model(std::uint64_t seed, const nn::ModelDescriptor& d, const LayerScaleProfile& profile) {
  return nn::load_weights(synth_weights(seed, d, profile), d);
}

}  // namespace blm::workbench
