#include <gtest/gtest.h>

#include <sstream>

#include "blm/nn.hpp"
#include "blm/perf.hpp"
#include "blm/quant.hpp"

using namespace blm;
using namespace blm::perf;

namespace {

const nn::LayerDescriptor& layer(const nn::ModelDescriptor& d, const char* name) { return d.layers[*d.find_layer(name)]; }

}  // namespace

TEST(MultCount, Examples) {
  const auto mlp = nn::reference_mlp();
  const auto unet = nn::reference_unet();
  EXPECT_EQ(mult_count(layer(mlp, "dense_1")), 260u * 128u);
  EXPECT_EQ(mult_count(layer(mlp, "dense_1")), 33280u);
  EXPECT_EQ(mult_count(layer(unet, "conv1d_1")), 260u * 3u * 1u * 16u);
  EXPECT_EQ(mult_count(layer(unet, "conv1d_1")), 12480u);
  EXPECT_EQ(mult_count(layer(unet, "max_pooling1d_1")), 0u);
}

TEST(EstimateLayer, Examples) {
  const auto mlp = nn::reference_mlp();
  const auto& dense = layer(mlp, "dense_1");
  EXPECT_EQ(estimate_layer(dense, 32, 100e6).multipliers, 1040u);
  EXPECT_EQ(estimate_layer(dense, 260, 100e6).multipliers, 128u);
  const auto full = estimate_layer(dense, 1, 100e6);
  EXPECT_EQ(full.multipliers, 33280u);
  EXPECT_EQ(full.cycles, 9u);
  EXPECT_EQ(full.logic_units, 33280u * 64u);
  EXPECT_EQ(full.memory_bits, (33280u + 128u) * 16u);
  EXPECT_DOUBLE_EQ(full.latency_s, 9 / 100e6);
  EXPECT_THROW(estimate_layer(dense, 0, 100e6), Error);
}

TEST(EstimateLayer, ConvStreamsOnePositionPerInvocation) {
  const auto unet = nn::reference_unet();
  const auto& conv = layer(unet, "conv1d_2");  // length 130
  const auto e = estimate_layer(conv, 4, 100e6);
  EXPECT_EQ(e.cycles, 130u * 4u + 8u);
  EXPECT_EQ(e.multipliers, (130u * 3u * 16u * 32u + 3u) / 4u);
}

TEST(EstimateModel, SingleLayerEqualsLayerEstimate) {
  nn::ModelDescriptor d;
  d.input_shape = {260, 1};
  d.layers = {nn::detail::dense("dense", "input", 128)};
  nn::validate(d, {.require_frame_io = false});
  const auto m = estimate_model(d, ReuseMap{32, {}}, nullptr, 100e6, Schedule::Sequential);
  const auto l = estimate_layer(d.layers[0], 32, 100e6);
  EXPECT_EQ(m.cycles, l.cycles);
  EXPECT_EQ(m.multipliers, l.multipliers);
  EXPECT_EQ(m.memory_bits, l.memory_bits);
  EXPECT_DOUBLE_EQ(m.latency_s, l.latency_s);
  const auto df = estimate_model(d, ReuseMap{32, {}}, nullptr, 100e6, Schedule::Dataflow);
  EXPECT_EQ(df.cycles, l.cycles);
}

TEST(EstimateModel, TotalsAreSumsOfLayers) {
  const auto d = nn::reference_unet();
  const auto e = estimate_model(d, deployed_reuse_map(), nullptr, 100e6, Schedule::Sequential);
  std::uint64_t mult = 0, logic = 0, mem = 0, cyc = 0;
  for (const auto& l : e.layers) {
    mult += l.multipliers;
    logic += l.logic_units;
    mem += l.memory_bits;
    cyc += l.cycles;
  }
  EXPECT_EQ(e.multipliers, mult);
  EXPECT_EQ(e.logic_units, logic);
  EXPECT_EQ(e.memory_bits, mem);
  EXPECT_EQ(e.cycles, cyc);
  EXPECT_EQ(e.memory_bits, d.param_count * 16);
}

TEST(EstimateModel, PlanWidthSetsMemory) {
  const auto d = nn::reference_mlp();
  const auto p18 = quant::uniform_plan(d, 18, 10), p16 = quant::uniform_plan(d, 16, 7);
  const auto a = estimate_model(d, deployed_reuse_map(), &p18, 100e6, Schedule::Sequential);
  const auto b = estimate_model(d, deployed_reuse_map(), &p16, 100e6, Schedule::Sequential);
  EXPECT_EQ(a.memory_bits, d.param_count * 18);
  EXPECT_GT(a.memory_bits, b.memory_bits);
}

TEST(ReuseMap, PatternsMatchNameOrKind) {
  const auto map = deployed_reuse_map();
  const auto mlp = nn::reference_mlp();
  const auto unet = nn::reference_unet();
  EXPECT_EQ(map.rf_for(layer(mlp, "dense_1")), 260u);
  EXPECT_EQ(map.rf_for(layer(mlp, "sigmoid")), 260u);
  EXPECT_EQ(map.rf_for(layer(unet, "conv1d_3")), 32u);
  EXPECT_EQ(parse_reuse_map(8, "conv1d_?:2").rf_for(layer(unet, "conv1d_3")), 2u);
  EXPECT_TRUE(glob_match("DENSE*", "dense_2"));
  EXPECT_FALSE(glob_match("dense", "dense_2"));
  EXPECT_THROW(parse_reuse_map(8, "dense*"), Error);
  EXPECT_THROW(parse_reuse_map(8, "dense*:0"), Error);
  EXPECT_THROW(parse_reuse_map(0, ""), Error);
}

TEST(Properties, MonotoneInReuseFactor) {
  for (const auto& d : {nn::reference_mlp(), nn::reference_unet()}) {
    for (const auto& l : d.layers) {
      LayerEstimate prev;
      for (std::uint64_t rf = 1; rf <= 1024; ++rf) {
        const auto e = estimate_layer(l, rf, 100e6);
        EXPECT_GE(e.multipliers * rf, e.mult_count);
        if (rf > 1) {
          EXPECT_GE(e.cycles, prev.cycles) << l.name << " rf " << rf;
          EXPECT_LE(e.multipliers, prev.multipliers) << l.name << " rf " << rf;
        }
        prev = e;
      }
    }
  }
}

TEST(Properties, DataflowNeverSlowerThanSequential) {
  for (const auto& d : {nn::reference_mlp(), nn::reference_unet()}) {
    for (std::uint64_t rf : {1u, 7u, 32u, 260u, 1000u}) {
      const ReuseMap map{rf, {}};
      const auto seq = estimate_model(d, map, nullptr, 100e6, Schedule::Sequential);
      const auto df = estimate_model(d, map, nullptr, 100e6, Schedule::Dataflow);
      EXPECT_LE(df.latency_s, seq.latency_s);
    }
  }
}

TEST(Budget, Examples) {
  auto r = check_budget(1.57e-3, 3e-3);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.slack_s, 1.43e-3, 1e-12);
  r = check_budget(3e-3, 3e-3);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.slack_s, 0.0);
  EXPECT_FALSE(check_budget(4e-3, 3e-3).pass);
  EXPECT_THROW(check_budget(1e-3, 0.0), Error);
}

TEST(Throughput, Identity) {
  EXPECT_NEAR(frames_per_second(1.74e-3), 574.7, 0.05);
  EXPECT_EQ(std::lround(frames_per_second(1.74e-3)), 575);
  EXPECT_NEAR(frames_per_second(3e-3), 333.33, 0.01);
}

TEST(Output, TableAndCsv) {
  const auto e = estimate_model(nn::reference_mlp(), deployed_reuse_map(), nullptr, 100e6, Schedule::Dataflow);
  std::ostringstream csv, txt;
  write_csv(csv, e);
  write_table(txt, e);
  EXPECT_NE(csv.str().find("dense_1,Dense,260,33280,128,8192,"), std::string::npos);
  EXPECT_NE(csv.str().find("TOTAL_dataflow"), std::string::npos);
  EXPECT_NE(txt.str().find("total (dataflow)"), std::string::npos);
}
