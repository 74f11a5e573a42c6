#pragma once

// Forward passes. The double-precision path is the reference the quantized
// path is measured against; the quantized path is bit-deterministic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "blm/error.hpp"
#include "blm/fxp.hpp"
#include "blm/nn/model.hpp"
#include "blm/quant/quantized_model.hpp"
#include "blm/workbench/decision.hpp"

namespace blm::nn {

namespace detail {

// Value-moving layers are shared by both paths; only the element type differs.
template <class T>
void max_pool(std::span<const T> in, Shape in_shape, std::size_t factor, std::vector<T>& out) {
  const std::size_t c = in_shape.channels;
  const std::size_t out_len = in_shape.length / factor;
  out.assign(out_len * c, T{});
  for (std::size_t p = 0; p < out_len; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      T best = in[(p * factor) * c + ch];
      for (std::size_t k = 1; k < factor; ++k) best = std::max(best, in[(p * factor + k) * c + ch]);
      out[p * c + ch] = best;
    }
  }
}

template <class T>
void upsample(std::span<const T> in, Shape in_shape, std::size_t factor, std::vector<T>& out) {
  const std::size_t c = in_shape.channels;
  out.resize(in_shape.length * factor * c);
  for (std::size_t p = 0; p < in_shape.length; ++p) {
    for (std::size_t k = 0; k < factor; ++k) {
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(p * c), c,
                  out.begin() + static_cast<std::ptrdiff_t>((p * factor + k) * c));
    }
  }
}

template <class T>
void concatenate(std::span<const T> a, Shape sa, std::span<const T> b, Shape sb, std::vector<T>& out) {
  const std::size_t c = sa.channels + sb.channels;
  out.resize(sa.length * c);
  for (std::size_t p = 0; p < sa.length; ++p) {
    std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(p * sa.channels), sa.channels,
                out.begin() + static_cast<std::ptrdiff_t>(p * c));
    std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(p * sb.channels), sb.channels,
                out.begin() + static_cast<std::ptrdiff_t>(p * c + sa.channels));
  }
}

inline std::size_t same_padding_left(std::size_t kernel) { return (kernel - 1) / 2; }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void check_input(const ModelDescriptor& d, std::size_t n) {
  if (n != d.input_shape.size()) {
    throw Error(ErrorKind::SizeMismatch, "model expects " + std::to_string(d.input_shape.size()) +
                                             " input values, got " + std::to_string(n));
  }
}

}  // namespace detail

// Activations of every node (index 0 is the input) for one forward pass.
inline std::vector<std::vector<double>> forward_float(const Model& model, std::span<const double> input) {
  const auto& d = model.descriptor;
  detail::check_input(d, input.size());
  std::vector<std::vector<double>> act(d.node_count());
  act[0].assign(input.begin(), input.end());

  for (std::size_t li = 0; li < d.layers.size(); ++li) {
    const auto& l = d.layers[li];
    const auto& w = model.weights[li];
    const std::span<const double> in = act[l.input_nodes[0]];
    const Shape ins = l.input_shapes[0];
    auto& out = act[li + 1];
    switch (l.kind) {
      case LayerKind::Dense: {
        const std::size_t n_in = ins.size(), n_out = l.units;
        out.assign(n_out, 0.0);
        if (l.use_bias) std::copy(w.bias.begin(), w.bias.end(), out.begin());
        for (std::size_t i = 0; i < n_in; ++i) {
          const double x = in[i];
          if (x == 0.0) continue;
          const float* row = w.kernel.data() + i * n_out;
          for (std::size_t o = 0; o < n_out; ++o) out[o] += x * row[o];
        }
        break;
      }
      case LayerKind::Conv1D: {
        const std::size_t len = ins.length, cin = ins.channels, cout = l.filters, k = l.kernel_size;
        const std::size_t pad = detail::same_padding_left(k);
        out.assign(len * cout, 0.0);
        for (std::size_t p = 0; p < len; ++p) {
          double* acc = out.data() + p * cout;
          if (l.use_bias) std::copy(w.bias.begin(), w.bias.end(), acc);
          for (std::size_t t = 0; t < k; ++t) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(p + t) - static_cast<std::ptrdiff_t>(pad);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
            for (std::size_t ic = 0; ic < cin; ++ic) {
              const double x = in[static_cast<std::size_t>(src) * cin + ic];
              if (x == 0.0) continue;
              const float* row = w.kernel.data() + (t * cin + ic) * cout;
              for (std::size_t oc = 0; oc < cout; ++oc) acc[oc] += x * row[oc];
            }
          }
        }
        break;
      }
      case LayerKind::MaxPool1D:
        detail::max_pool(in, ins, l.factor, out);
        break;
      case LayerKind::UpSample1D:
        detail::upsample(in, ins, l.factor, out);
        break;
      case LayerKind::Concatenate:
        detail::concatenate(in, ins, std::span<const double>(act[l.input_nodes[1]]), l.input_shapes[1], out);
        break;
      case LayerKind::ReLU:
        out.resize(in.size());
        std::transform(in.begin(), in.end(), out.begin(), [](double x) { return x > 0.0 ? x : 0.0; });
        break;
      case LayerKind::Sigmoid:
        out.resize(in.size());
        std::transform(in.begin(), in.end(), out.begin(), detail::sigmoid);
        break;
      case LayerKind::Flatten:
        out.assign(in.begin(), in.end());
        break;
    }
  }
  return act;
}

inline InferenceOutput infer_float(const Model& model, std::span<const double> input) {
  auto act = forward_float(model, input);
  InferenceOutput result;
  result.values = std::move(act[model.descriptor.output_layer + 1]);
  result.decision = workbench::decide_pairs(result.values);
  return result;
}

inline InferenceOutput infer_float(const Model& model, const Frame& frame) { return infer_float(model, frame.values()); }

// ---------------------------------------------------------------------------
// Quantized path

struct FixedActivations {
  std::vector<std::vector<std::int32_t>> codes;  // per node
};

namespace detail {

// Accumulation is exact: products carry in_frac + w_frac fraction bits and the
// bias is aligned to that grid before summation. Each output element is
// re-quantized exactly once.
template <class Acc>
void dense_fixed(std::span<const std::int32_t> in, int in_frac, const quant::QuantizedLayer& ql, std::size_t n_out,
                 bool use_bias, std::vector<std::int32_t>& out, std::uint64_t& overflows) {
  std::vector<Acc> acc(n_out, Acc{0});
  if (use_bias) {
    for (std::size_t o = 0; o < n_out; ++o) acc[o] = static_cast<Acc>(ql.bias[o]) * (Acc{1} << in_frac);
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    const Acc x = in[i];
    if (x == 0) continue;
    const std::int32_t* row = ql.kernel.data() + i * n_out;
    for (std::size_t o = 0; o < n_out; ++o) acc[o] += x * row[o];
  }
  out.resize(n_out);
  const int src_frac = in_frac + ql.spec.frac_bits();
  for (std::size_t o = 0; o < n_out; ++o) {
    fxp::QuantizeResult r;
    if constexpr (sizeof(Acc) == 8) {
      r = fxp::requantize64(acc[o], src_frac, ql.spec);
    } else {
      r = fxp::requantize(acc[o], src_frac, ql.spec);
    }
    overflows += r.overflowed ? 1 : 0;
    out[o] = static_cast<std::int32_t>(r.value.code);
  }
}

template <class Acc>
void conv_fixed(std::span<const std::int32_t> in, Shape ins, int in_frac, const quant::QuantizedLayer& ql,
                const LayerDescriptor& l, std::vector<std::int32_t>& out, std::uint64_t& overflows) {
  const std::size_t len = ins.length, cin = ins.channels, cout = l.filters, k = l.kernel_size;
  const std::size_t pad = same_padding_left(k);
  const int src_frac = in_frac + ql.spec.frac_bits();
  out.resize(len * cout);
  std::vector<Acc> acc(cout);
  for (std::size_t p = 0; p < len; ++p) {
    if (l.use_bias) {
      for (std::size_t oc = 0; oc < cout; ++oc) acc[oc] = static_cast<Acc>(ql.bias[oc]) * (Acc{1} << in_frac);
    } else {
      std::fill(acc.begin(), acc.end(), Acc{0});
    }
    for (std::size_t t = 0; t < k; ++t) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(p + t) - static_cast<std::ptrdiff_t>(pad);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      for (std::size_t ic = 0; ic < cin; ++ic) {
        const Acc x = in[static_cast<std::size_t>(src) * cin + ic];
        if (x == 0) continue;
        const std::int32_t* row = ql.kernel.data() + (t * cin + ic) * cout;
        for (std::size_t oc = 0; oc < cout; ++oc) acc[oc] += x * row[oc];
      }
    }
    for (std::size_t oc = 0; oc < cout; ++oc) {
      fxp::QuantizeResult r;
      if constexpr (sizeof(Acc) == 8) {
        r = fxp::requantize64(acc[oc], src_frac, ql.spec);
      } else {
        r = fxp::requantize(acc[oc], src_frac, ql.spec);
      }
      overflows += r.overflowed ? 1 : 0;
      out[p * cout + oc] = static_cast<std::int32_t>(r.value.code);
    }
  }
}

// True when the exact accumulator provably fits in 63 bits:
// (W_in - 1) + (W_w - 1) magnitude bits per product, plus carries for
// fan_in products and the aligned bias.
inline bool fits_int64(const fxp::FixedSpec& in, const fxp::FixedSpec& w, std::size_t fan_in) {
  int carry = 0;
  while ((std::size_t{1} << carry) < fan_in + 1) ++carry;
  return (in.total_bits - 1) + (w.total_bits - 1) + carry <= 62;
}

inline void requantize_all(std::span<const std::int32_t> in, const fxp::FixedSpec& from, const fxp::FixedSpec& to,
                           std::vector<std::int32_t>& out, std::uint64_t& overflows) {
  out.resize(in.size());
  if (from.frac_bits() == to.frac_bits() && from.total_bits <= to.total_bits) {
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto r = fxp::requantize64(in[i], from.frac_bits(), to);
    overflows += r.overflowed ? 1 : 0;
    out[i] = static_cast<std::int32_t>(r.value.code);
  }
}

}  // namespace detail

// Runs the quantized graph on input codes already on the input grid. Returns
// all node activations; overflow events are added to `log` per layer name.
inline FixedActivations forward_fixed_codes(const quant::QuantizedModel& q, std::span<const std::int32_t> input_codes,
                                            fxp::OverflowLog& log) {
  const auto& d = q.descriptor;
  detail::check_input(d, input_codes.size());
  FixedActivations act;
  act.codes.resize(d.node_count());
  act.codes[0].assign(input_codes.begin(), input_codes.end());
  std::vector<std::int32_t> scratch, scratch2;

  for (std::size_t li = 0; li < d.layers.size(); ++li) {
    const auto& l = d.layers[li];
    const auto& ql = q.layers[li];
    const std::size_t src = l.input_nodes[0];
    const std::span<const std::int32_t> in = act.codes[src];
    const auto& in_spec = q.node_spec(src);
    const int in_frac = in_spec.frac_bits();
    auto& out = act.codes[li + 1];
    std::uint64_t overflows = 0;

    switch (l.kind) {
      case LayerKind::Dense:
        if (detail::fits_int64(in_spec, ql.spec, l.fan_in())) {
          detail::dense_fixed<std::int64_t>(in, in_frac, ql, l.units, l.use_bias, out, overflows);
        } else {
          detail::dense_fixed<fxp::wide_int>(in, in_frac, ql, l.units, l.use_bias, out, overflows);
        }
        break;
      case LayerKind::Conv1D:
        if (detail::fits_int64(in_spec, ql.spec, l.fan_in())) {
          detail::conv_fixed<std::int64_t>(in, l.input_shapes[0], in_frac, ql, l, out, overflows);
        } else {
          detail::conv_fixed<fxp::wide_int>(in, l.input_shapes[0], in_frac, ql, l, out, overflows);
        }
        break;
      case LayerKind::MaxPool1D:
        // Re-quantization is monotone, so pooling before or after it agrees.
        detail::max_pool(in, l.input_shapes[0], l.factor, scratch);
        detail::requantize_all(scratch, in_spec, ql.spec, out, overflows);
        break;
      case LayerKind::UpSample1D:
        detail::upsample(in, l.input_shapes[0], l.factor, scratch);
        detail::requantize_all(scratch, in_spec, ql.spec, out, overflows);
        break;
      case LayerKind::Concatenate: {
        const std::size_t src_b = l.input_nodes[1];
        detail::requantize_all(in, in_spec, ql.spec, scratch, overflows);
        detail::requantize_all(act.codes[src_b], q.node_spec(src_b), ql.spec, scratch2, overflows);
        detail::concatenate<std::int32_t>(scratch, l.input_shapes[0], scratch2, l.input_shapes[1], out);
        break;
      }
      case LayerKind::ReLU:
        scratch.resize(in.size());
        std::transform(in.begin(), in.end(), scratch.begin(), [](std::int32_t x) { return x > 0 ? x : 0; });
        detail::requantize_all(scratch, in_spec, ql.spec, out, overflows);
        break;
      case LayerKind::Sigmoid:
        out.resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = ql.sigmoid->lookup(in[i], in_frac);
        break;
      case LayerKind::Flatten:
        detail::requantize_all(in, in_spec, ql.spec, out, overflows);
        break;
    }
    log.record(l.name, overflows);
  }
  return act;
}

// Quantizes real inputs onto the input node's grid, recording saturations.
inline std::vector<std::int32_t> quantize_input(const quant::QuantizedModel& q, std::span<const double> input,
                                                fxp::OverflowLog& log) {
  std::vector<std::int32_t> codes(input.size());
  std::uint64_t overflows = 0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const auto r = fxp::quantize(input[i], q.input_spec);
    overflows += r.overflowed ? 1 : 0;
    codes[i] = static_cast<std::int32_t>(r.value.code);
  }
  log.record(q.descriptor.input_name, overflows);
  return codes;
}

inline InferenceOutput output_from_codes(const quant::QuantizedModel& q, std::span<const std::int32_t> codes,
                                         fxp::OverflowLog log) {
  InferenceOutput result;
  const int frac = q.output_spec().frac_bits();
  result.values.resize(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) result.values[i] = std::ldexp(static_cast<double>(codes[i]), -frac);
  result.decision = workbench::decide_pairs(result.values);
  result.overflow = std::move(log);
  return result;
}

inline InferenceOutput infer_fixed(const quant::QuantizedModel& q, std::span<const double> input) {
  detail::check_input(q.descriptor, input.size());
  fxp::OverflowLog log;
  const auto codes = quantize_input(q, input, log);
  auto act = forward_fixed_codes(q, codes, log);
  return output_from_codes(q, act.codes[q.descriptor.output_layer + 1], std::move(log));
}

inline InferenceOutput infer_fixed(const quant::QuantizedModel& q, const Frame& frame) {
  return infer_fixed(q, frame.values());
}

inline InferenceOutput infer_fixed(const Model& model, std::span<const double> input, const quant::PrecisionPlan& plan) {
  return infer_fixed(quant::quantize_model(model, plan), input);
}

inline InferenceOutput infer_fixed(const Model& model, const Frame& frame, const quant::PrecisionPlan& plan) {
  return infer_fixed(model, frame.values(), plan);
}

}  // namespace blm::nn
