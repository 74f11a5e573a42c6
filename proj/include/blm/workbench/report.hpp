#pragma once

// Precision-strategy comparison and the accuracy/outlier sweeps behind it.

#include <cstdio>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "blm/nn/infer.hpp"
#include "blm/nn/reference_models.hpp"
#include "blm/perf.hpp"
#include "blm/quant.hpp"
#include "blm/workbench/metrics.hpp"
#include "blm/workbench/synth.hpp"

namespace blm::workbench {

struct Fixture {
  nn::Model model;
  std::vector<nn::Frame> calibration;
  std::vector<nn::Frame> evaluation;
};

// Weight scales for the reference U-Net chosen so inner activations reach the
// hundreds in the encoder and shrink back to a moderate logit range at the
// head: max-abs statistics span well over six octaves.
inline LayerScaleProfile heterogeneous_unet_profile() {
  LayerScaleProfile p;
  p.default_scale = 0.05;
  p.scales = {
      {"conv1d_1", 3.2}, {"conv1d_2", 1.6}, {"conv1d_3", 0.08},
      {"conv1d_4", 0.08}, {"conv1d_5", 0.15}, {"conv1d_6", 0.02},
  };
  return p;
}

inline Fixture heterogeneous_fixture(std::uint64_t seed = 7, std::size_t n_calibration = 1000,
                                     std::size_t n_evaluation = 1000) {
  const auto d = nn::reference_unet();
  return {synth_model(seed, d, heterogeneous_unet_profile()),
          synth_frames(seed + 1, n_calibration, FrameMode::Standardized),
          synth_frames(seed + 2, n_evaluation, FrameMode::Standardized)};
}

// A fixture whose evaluation frames exceed the calibration range: calibration
// sees a few nominal frames, evaluation sees frames with twice the spread.
// Weights are moderate so 16-bit words keep ample fraction bits and range
// overflow, not rounding, is the dominant error without headroom.
inline Fixture overflow_fixture(std::uint64_t seed = 11, std::size_t n_calibration = 20,
                                std::size_t n_evaluation = 400) {
  const auto d = nn::reference_unet();
  Fixture f{synth_model(seed, d, {0.2, {}}), synth_frames(seed + 1, n_calibration, FrameMode::Standardized), {}};
  for (const auto& frame : synth_frames(seed + 2, n_evaluation, FrameMode::Standardized)) {
    std::vector<double> v(frame.values().begin(), frame.values().end());
    for (auto& x : v) x *= 2.0;
    f.evaluation.emplace_back(std::move(v), frame.sequence());
  }
  return f;
}

// Concatenated float-path outputs, one 520-value block per frame.
inline std::vector<double> reference_outputs(const nn::Model& model, std::span<const nn::Frame> frames) {
  std::vector<double> out;
  out.reserve(frames.size() * model.descriptor.output_size());
  for (const auto& f : frames) {
    const auto r = nn::infer_float(model, f);
    out.insert(out.end(), r.values.begin(), r.values.end());
  }
  return out;
}

struct PlanEvaluation {
  AccuracyReport accuracy;
  std::size_t outliers = 0;
  std::uint64_t activation_overflows = 0;
  std::size_t saturated_weights = 0;
};

inline PlanEvaluation evaluate_plan(const nn::Model& model, const quant::PrecisionPlan& plan,
                                    std::span<const nn::Frame> frames, std::span<const double> reference) {
  const auto q = quant::quantize_model(model, plan);
  std::vector<double> test;
  test.reserve(reference.size());
  PlanEvaluation e;
  for (const auto& f : frames) {
    const auto r = nn::infer_fixed(q, f);
    e.activation_overflows += r.overflow.total();
    test.insert(test.end(), r.values.begin(), r.values.end());
  }
  e.accuracy = accuracy(reference, test);
  e.outliers = count_outliers(reference, test);
  e.saturated_weights = q.saturated_weights;
  return e;
}

struct StrategyRow {
  std::string label;
  quant::PrecisionPlan plan;
  PlanEvaluation evaluation;
  perf::ResourceEstimate resources;
};

struct StrategyReport {
  std::vector<StrategyRow> rows;  // uniform fx<18,10>, uniform fx<16,7>, layer-based fx<16,x>
  std::size_t calibration_frames = 0;
  std::size_t evaluation_frames = 0;
};

inline constexpr const char* kSyntheticDataNote =
    "Synthetic weights and frames: the ordering between strategies and the overflow mechanism are "
    "reproduced, absolute accuracies are not comparable to a trained deployment.";

inline StrategyReport compare_strategies(const nn::Model& model, std::span<const nn::Frame> calibration,
                                  std::span<const nn::Frame> evaluation, int guard_bits = 0) {
  const auto& d = model.descriptor;
  const auto prof = quant::profile(model, calibration);
  const auto reference = reference_outputs(model, evaluation);
  const auto reuse = perf::deployed_reuse_map();

  StrategyReport report;
  report.calibration_frames = calibration.size();
  report.evaluation_frames = evaluation.size();
  const std::vector<std::pair<std::string, quant::PrecisionPlan>> strategies = {
      {"Uniform fx<18,10>", quant::uniform_plan(d, 18, 10)},
      {"Uniform fx<16,7>", quant::uniform_plan(d, 16, 7)},
      {"Layer-based fx<16,x>", quant::plan_precision(prof, 16, guard_bits)},
  };
  for (const auto& [label, plan] : strategies) {
    report.rows.push_back({label, plan, evaluate_plan(model, plan, evaluation, reference),
                           perf::estimate_model(d, reuse, &plan, perf::kDefaultClockHz, perf::Schedule::Sequential)});
  }
  return report;
}

inline void write_text(std::ostream& os, const StrategyReport& r) {
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %9s %9s %12s %12s %10s %10s\n", "Strategy", "Acc MI", "Acc RR",
                "MeanDiff MI", "MeanDiff RR", "Outliers", "MemBits");
  os << line;
  for (const auto& row : r.rows) {
    const auto& a = row.evaluation.accuracy;
    std::snprintf(line, sizeof line, "%-22s %8.2f%% %8.2f%% %12.6f %12.6f %10zu %10llu\n", row.label.c_str(),
                  100.0 * a.mi.fraction_close, 100.0 * a.rr.fraction_close, a.mi.mean_abs_diff, a.rr.mean_abs_diff,
                  row.evaluation.outliers, static_cast<unsigned long long>(row.resources.memory_bits));
    os << line;
  }
  os << "calibration frames: " << r.calibration_frames << ", evaluation frames: " << r.evaluation_frames
     << ", threshold: " << kCloseThreshold << '\n';
  os << kSyntheticDataNote << '\n';
}

inline void write_csv(std::ostream& os, const StrategyReport& r) {
  os << "strategy,acc_mi,acc_rr,mean_diff_mi,mean_diff_rr,outliers,activation_overflows,memory_bits,logic_units\n";
  char line[256];
  for (const auto& row : r.rows) {
    const auto& a = row.evaluation.accuracy;
    std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.9f,%.9f,%zu,%llu,%llu,%llu\n", row.label.c_str(),
                  a.mi.fraction_close, a.rr.fraction_close, a.mi.mean_abs_diff, a.rr.mean_abs_diff,
                  row.evaluation.outliers, static_cast<unsigned long long>(row.evaluation.activation_overflows),
                  static_cast<unsigned long long>(row.resources.memory_bits),
                  static_cast<unsigned long long>(row.resources.logic_units));
    os << line;
  }
}

struct BitsSweepPoint {
  int total_bits = 0;
  double acc_mi = 0.0;
  double acc_rr = 0.0;
  std::size_t outliers = 0;
};

// Layer-based plans at each total width, evaluated against the float path.
inline std::vector<BitsSweepPoint> accuracy_vs_bits(const nn::Model& model, const quant::CalibrationProfile& prof,
                                                    std::span<const nn::Frame> evaluation, int min_bits, int max_bits,
                                                    int guard_bits = 0) {
  const auto reference = reference_outputs(model, evaluation);
  std::vector<BitsSweepPoint> points;
  for (int w = min_bits; w <= max_bits; ++w) {
    const auto e = evaluate_plan(model, quant::plan_precision(prof, w, guard_bits), evaluation, reference);
    points.push_back({w, e.accuracy.mi.fraction_close, e.accuracy.rr.fraction_close, e.outliers});
  }
  return points;
}

}  // namespace blm::workbench
