#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "blm/error.hpp"
#include "blm/nn/descriptor.hpp"

namespace blm::workbench {

// Quantized-vs-reference closeness threshold on outputs in [0, 1].
inline constexpr double kCloseThreshold = 0.20;

struct TargetAccuracy {
  double fraction_close = 0.0;
  double mean_abs_diff = 0.0;
  std::size_t outliers = 0;
  std::size_t total = 0;
};

struct AccuracyReport {
  double threshold = kCloseThreshold;
  TargetAccuracy mi;
  TargetAccuracy rr;
};

// A slot is close when |ref - test| <= threshold (inclusive). Even slots are
// MI, odd slots RR. Inputs are one or more concatenated 520-value outputs.
inline AccuracyReport accuracy(std::span<const double> ref, std::span<const double> test,
                               double threshold = kCloseThreshold) {
  if (ref.size() != test.size()) throw Error(ErrorKind::SizeMismatch, "reference and test lengths differ");
  if (ref.empty() || ref.size() % nn::kOutputSize != 0) {
    throw Error(ErrorKind::SizeMismatch, "output length must be a positive multiple of 520");
  }
  AccuracyReport r;
  r.threshold = threshold;
  std::size_t close[2] = {0, 0};
  double diff_sum[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double diff = std::fabs(ref[i] - test[i]);
    const std::size_t t = i % 2;
    close[t] += diff <= threshold ? 1 : 0;
    diff_sum[t] += diff;
  }
  const std::size_t per_target = ref.size() / 2;
  auto fill = [&](TargetAccuracy& a, std::size_t t) {
    a.total = per_target;
    a.fraction_close = static_cast<double>(close[t]) / static_cast<double>(per_target);
    a.mean_abs_diff = diff_sum[t] / static_cast<double>(per_target);
    a.outliers = per_target - close[t];
  };
  fill(r.mi, 0);
  fill(r.rr, 1);
  return r;
}

inline std::size_t count_outliers(std::span<const double> ref, std::span<const double> test,
                                  double threshold = kCloseThreshold) {
  if (ref.size() != test.size()) throw Error(ErrorKind::SizeMismatch, "reference and test lengths differ");
  std::size_t n = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) n += std::fabs(ref[i] - test[i]) > threshold ? 1 : 0;
  return n;
}

}  // namespace blm::workbench
