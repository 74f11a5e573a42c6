#pragma once

// The two deployable reference graphs: a two-level 1D U-Net and a one-hidden-
// layer MLP, both mapping a 260-monitor frame to 260 (MI, RR) pairs.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "blm/nn/descriptor.hpp"

namespace blm::nn {

namespace detail {

inline LayerDescriptor conv(std::string name, std::string input, std::size_t filters, std::size_t kernel) {
  LayerDescriptor l;
  l.name = std::move(name);
  l.kind = LayerKind::Conv1D;
  l.inputs = {std::move(input)};
  l.filters = filters;
  l.kernel_size = kernel;
  return l;
}

inline LayerDescriptor dense(std::string name, std::string input, std::size_t units) {
  LayerDescriptor l;
  l.name = std::move(name);
  l.kind = LayerKind::Dense;
  l.inputs = {std::move(input)};
  l.units = units;
  return l;
}

inline LayerDescriptor unary(std::string name, LayerKind kind, std::string input, std::size_t factor = 0) {
  LayerDescriptor l;
  l.name = std::move(name);
  l.kind = kind;
  l.inputs = {std::move(input)};
  l.factor = factor;
  return l;
}

inline LayerDescriptor concat(std::string name, std::string main, std::string skip) {
  LayerDescriptor l;
  l.name = std::move(name);
  l.kind = LayerKind::Concatenate;
  l.inputs = {std::move(main), std::move(skip)};
  return l;
}

}  // namespace detail

// 260 -> 130 -> 65 -> 130 -> 260 encoder/decoder with two skip connections
// and a 1x1 two-filter sigmoid head, flattened to interleaved (MI, RR) pairs.
inline ModelDescriptor reference_unet() {
  using detail::concat;
  using detail::conv;
  using detail::unary;
  ModelDescriptor d;
  d.name = "unet_ref";
  d.layers = {
      conv("conv1d_1", "input", 16, 3),
      unary("relu_1", LayerKind::ReLU, "conv1d_1"),
      unary("max_pooling1d_1", LayerKind::MaxPool1D, "relu_1", 2),
      conv("conv1d_2", "max_pooling1d_1", 32, 3),
      unary("relu_2", LayerKind::ReLU, "conv1d_2"),
      unary("max_pooling1d_2", LayerKind::MaxPool1D, "relu_2", 2),
      conv("conv1d_3", "max_pooling1d_2", 64, 3),
      unary("relu_3", LayerKind::ReLU, "conv1d_3"),
      unary("up_sampling1d_1", LayerKind::UpSample1D, "relu_3", 2),
      concat("concatenate_1", "up_sampling1d_1", "relu_2"),
      conv("conv1d_4", "concatenate_1", 32, 3),
      unary("relu_4", LayerKind::ReLU, "conv1d_4"),
      unary("up_sampling1d_2", LayerKind::UpSample1D, "relu_4", 2),
      concat("concatenate_2", "up_sampling1d_2", "relu_1"),
      conv("conv1d_5", "concatenate_2", 16, 3),
      unary("relu_5", LayerKind::ReLU, "conv1d_5"),
      conv("conv1d_6", "relu_5", 2, 1),
      unary("sigmoid", LayerKind::Sigmoid, "conv1d_6"),
      unary("flatten", LayerKind::Flatten, "sigmoid"),
  };
  validate(d);
  return d;
}

inline ModelDescriptor reference_mlp() {
  using detail::dense;
  using detail::unary;
  ModelDescriptor d;
  d.name = "mlp_ref";
  d.layers = {
      dense("dense_1", "input", 128),
      unary("relu_1", LayerKind::ReLU, "dense_1"),
      dense("dense_2", "relu_1", kOutputSize),
      unary("sigmoid", LayerKind::Sigmoid, "dense_2"),
  };
  validate(d);
  return d;
}

// Figures published for the deployed networks. The reference graphs above do
// not reproduce these parameter counts; they are kept for reporting only.
struct PublishedModelFacts {
  std::size_t trainable_params;
  double mean_latency_s;
};
inline constexpr PublishedModelFacts kPublishedUnet{134'434, 1.74e-3};
inline constexpr PublishedModelFacts kPublishedMlp{100'102, 0.31e-3};

}  // namespace blm::nn
