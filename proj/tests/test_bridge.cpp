#include <gtest/gtest.h>

#include <future>
#include <random>
#include <sstream>

#include "blm/bridge.hpp"
#include "blm/nn.hpp"
#include "blm/quant.hpp"
#include "blm/workbench/synth.hpp"

using namespace blm;
using namespace blm::bridge;

namespace {

const auto kFx16_7 = fxp::make_spec(16, 7);

std::shared_ptr<const quant::QuantizedModel> mlp_model(std::uint64_t seed = 1) {
  const auto d = nn::reference_mlp();
  const auto m = workbench::synth_model(seed, d, {0.1, {}});
  return std::make_shared<const quant::QuantizedModel>(quant::quantize_model(m, quant::uniform_plan(d, 16, 7)));
}

}  // namespace

TEST(Packing, Examples) {
  const auto w = pack(std::vector<double>{1.0, -1.0}, kFx16_7);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0], 0xFE000200u);
  EXPECT_EQ(pack(std::vector<double>{0.0, 0.0}, kFx16_7)[0], 0u);
  EXPECT_EQ(unpack(std::vector<std::uint32_t>{0xFE000200u}, kFx16_7), (std::vector<double>{1.0, -1.0}));
  EXPECT_EQ(pack_inputs(std::vector<double>(260, 0.5), kFx16_7).size(), 130u);
  const auto zeros = unpack_outputs(std::vector<std::uint32_t>(260, 0u), kFx16_7);
  EXPECT_EQ(zeros, std::vector<double>(520, 0.0));
}

TEST(Packing, RoundTripIsTheQuantizationGrid) {
  std::mt19937_64 rng(2);
  for (int i = 1; i <= 16; ++i) {
    const auto s = fxp::make_spec(16, i);
    std::uniform_real_distribution<double> u(1.2 * s.min_value(), 1.2 * s.max_value());
    std::vector<double> x(520);
    for (auto& v : x) v = u(rng);
    const auto back = unpack_outputs(pack(x, s), s);
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_EQ(back[k], fxp::to_real(fxp::quantize(x[k], s).value));
  }
}

TEST(Packing, RejectsBadShapes) {
  EXPECT_THROW(pack(std::vector<double>{1.0, 2.0}, fxp::make_spec(18, 10)), Error);
  EXPECT_THROW(pack(std::vector<double>{1.0}, kFx16_7), Error);
  EXPECT_THROW(pack_inputs(std::vector<double>(258, 0.0), kFx16_7), Error);
  EXPECT_THROW(unpack_outputs(std::vector<std::uint32_t>(259, 0u), kFx16_7), Error);
}

TEST(Buffers, EvenIndexInLowHalf) {
  BufferModel b;
  b.host_write_input(3, 0xBEEF1234u);
  EXPECT_EQ(b.ip_read_input(6), 0x1234u);
  EXPECT_EQ(b.ip_read_input(7), 0xBEEFu);
  b.ip_write_output(10, 0xAAAAu);
  b.ip_write_output(11, 0x5555u);
  EXPECT_EQ(b.host_read_output(5), 0x5555AAAAu);
}

TEST(Transaction, MatchesDirectInferenceBitExactly) {
  for (const auto& d : {nn::reference_mlp(), nn::reference_unet()}) {
    const auto m = workbench::synth_model(3, d, {0.2, {}});
    const auto cal = workbench::synth_frames(4, 8, workbench::FrameMode::Standardized);
    const auto q = std::make_shared<const quant::QuantizedModel>(
        quant::quantize_model(m, quant::plan_precision(quant::profile(m, cal), 16, 0)));
    BridgeSimulator sim(q, TimingConfig{});
    for (const auto& f : workbench::synth_frames(5, 25, workbench::FrameMode::Standardized)) {
      const auto a = sim.run_transaction(f);
      const auto b = nn::infer_fixed(*q, f);
      ASSERT_EQ(a.output.values, b.values);
      EXPECT_EQ(a.output.decision, b.decision);
      EXPECT_EQ(a.output.overflow, b.overflow);
    }
  }
}

TEST(Transaction, ZeroOverheadIsIpLatency) {
  BridgeSimulator sim(mlp_model(), TimingConfig::zero_overhead(1'570'000));
  const auto r = sim.run_transaction(nn::Frame{});
  EXPECT_EQ(r.trace.total_latency_ns, 1'570'000u);
}

TEST(Transaction, TraceIsOrderedAndAdditive) {
  BridgeSimulator sim(mlp_model(), TimingConfig{});
  for (const auto& f : workbench::synth_frames(6, 50, workbench::FrameMode::Standardized)) {
    const auto r = sim.run_transaction(f);
    const std::vector<int> order = {1, 2, 3, 6, 7, 8};
    ASSERT_EQ(r.trace.events.size(), order.size());
    std::uint64_t sum = 0, prev_end = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto& e = r.trace.events[i];
      EXPECT_EQ(e.step, order[i]);
      EXPECT_EQ(e.t_start_ns, prev_end);
      EXPECT_GE(e.t_end_ns, e.t_start_ns);
      sum += e.duration_ns();
      prev_end = e.t_end_ns;
    }
    EXPECT_EQ(r.trace.total_latency_ns, sum);
    EXPECT_GE(r.trace.total_latency_ns, 1'570'000u);
    EXPECT_LT(r.trace.total_latency_ns, 3'000'000u);
  }
}

TEST(Transaction, DeterministicPerSeed) {
  auto run = [](std::uint64_t seed) {
    TimingConfig t;
    t.seed = seed;
    BridgeSimulator sim(mlp_model(), t);
    std::vector<std::uint64_t> out;
    for (int i = 0; i < 20; ++i) out.push_back(sim.run_transaction(nn::Frame{}).trace.total_latency_ns);
    return out;
  };
  EXPECT_EQ(run(9), run(9));
  EXPECT_NE(run(9), run(10));
}

TEST(Transaction, SingleOutstanding) {
  // Two callers race on one simulator; each call either runs or is refused.
  const auto d = nn::reference_unet();
  const auto m = workbench::synth_model(7, d, {0.1, {}});
  auto q = std::make_shared<const quant::QuantizedModel>(quant::quantize_model(m, quant::uniform_plan(d, 16, 7)));
  BridgeSimulator sim(q, TimingConfig{});
  std::atomic<int> busy{0}, ok{0};
  auto worker = [&] {
    for (int i = 0; i < 20; ++i) {
      try {
        sim.run_transaction(nn::Frame{});
        ++ok;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Busy) ++busy;
      }
    }
  };
  std::thread a(worker), b(worker);
  a.join();
  b.join();
  EXPECT_EQ(busy + ok, 40);
  EXPECT_GT(ok, 0);
  // Never interleaved: results after contention still match direct inference.
  EXPECT_EQ(sim.run_transaction(nn::Frame{}).output.values, nn::infer_fixed(*q, nn::Frame{}).values);
}

TEST(Transaction, EstimateModeUsesPerfModel) {
  TimingConfig t = TimingConfig::zero_overhead(0);
  t.ip_source = IpLatencySource::Estimate;
  const auto q = mlp_model();
  BridgeSimulator sim(q, t);
  const auto est = perf::estimate_model(q->descriptor, perf::deployed_reuse_map(), &q->plan, 100e6,
                                        perf::Schedule::Sequential);
  EXPECT_EQ(sim.run_transaction(nn::Frame{}).trace.total_latency_ns,
            static_cast<std::uint64_t>(std::llround(est.latency_s * 1e9)));
}

TEST(Transaction, RejectsWrongFormats) {
  const auto d = nn::reference_mlp();
  auto q = std::make_shared<const quant::QuantizedModel>(
      quant::quantize_model(nn::zero_model(d), quant::uniform_plan(d, 18, 10)));
  EXPECT_THROW(BridgeSimulator(q, TimingConfig{}), Error);
  BridgeSimulator sim(mlp_model(), TimingConfig{});
  EXPECT_THROW(sim.run_transaction(std::vector<double>(10, 0.0)), Error);
}

TEST(Timing, JsonRoundTripAndCsv) {
  TimingConfig t;
  t.jitter_sigma = 0.25;
  t.ip_source = IpLatencySource::Measured;
  const auto back = timing_from_json(to_json(t));
  EXPECT_EQ(back.jitter_sigma, 0.25);
  EXPECT_EQ(back.ip_source, IpLatencySource::Measured);
  EXPECT_EQ(back.ip_latency_ns, 1'570'000u);
  EXPECT_THROW(timing_from_json(nlohmann::json{{"ip_source", "magic"}}), Error);

  BridgeSimulator sim(mlp_model(), TimingConfig::zero_overhead(100));
  std::ostringstream os;
  write_trace_csv(os, sim.run_transaction(nn::Frame{}).trace);
  EXPECT_EQ(os.str(), "step,t_start_ns,t_end_ns\n1,0,0\n2,0,0\n3,0,100\n6,100,100\n7,100,100\n8,100,100\n");
}
