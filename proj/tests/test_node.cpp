#include <gtest/gtest.h>

#include <sstream>
#include <thread>

#include "blm/nn.hpp"
#include "blm/node.hpp"
#include "blm/quant.hpp"
#include "blm/workbench/synth.hpp"

using namespace blm;
using namespace blm::node;
using namespace std::chrono_literals;

namespace {

LatencyRecord rec(std::uint32_t seq, std::uint64_t ingress, std::uint64_t latency) {
  return {seq, ingress, latency, latency / 2, latency <= kDefaultDeadlineNs};
}

InputDatagram datagram(std::uint32_t seq, float fill = 0.25f) {
  InputDatagram d;
  d.sequence = seq;
  d.send_timestamp_ns = 42;
  d.values.fill(fill);
  return d;
}

quant::QuantizedModel quantized_mlp() {
  const auto d = nn::reference_mlp();
  const auto m = workbench::synth_model(1, d, {0.1, {}});
  return quant::quantize_model(m, quant::uniform_plan(d, 16, 7));
}

// Engine that sleeps before delegating, to build up a backlog.
class SlowEngine final : public Engine {
 public:
  SlowEngine(std::unique_ptr<Engine> inner, std::chrono::milliseconds delay) : inner_(std::move(inner)), delay_(delay) {}
  EngineResult run(const nn::Frame& frame) override {
    std::this_thread::sleep_for(delay_);
    return inner_->run(frame);
  }

 private:
  std::unique_ptr<Engine> inner_;
  std::chrono::milliseconds delay_;
};

struct Loopback {
  UdpSocket sink;
  NodeConfig config;

  Loopback() {
    sink.bind({"127.0.0.1", 0});
    sink.set_receive_timeout(200ms);
    sink.set_receive_buffer(1 << 22);
    config.listen = {"127.0.0.1", 0};
    config.emit = {"127.0.0.1", sink.local_port()};
  }

  std::vector<OutputDatagram> collect(std::size_t max) {
    std::vector<OutputDatagram> out;
    std::vector<std::uint8_t> buf(4096);
    while (out.size() < max) {
      const auto n = sink.receive(buf);
      if (!n) break;
      if (auto d = decode_output(std::span<const std::uint8_t>(buf.data(), *n))) out.push_back(*d);
    }
    return out;
  }
};

}  // namespace

TEST(Wire, SizesAndRoundTrip) {
  const auto in = encode(datagram(7, -1.5f));
  EXPECT_EQ(in.size(), 1056u);
  EXPECT_EQ(std::string(in.begin(), in.begin() + 4), "BLM1");
  const auto back = decode_input(in);
  ASSERT_TRUE(back);
  EXPECT_EQ(back->sequence, 7u);
  EXPECT_EQ(back->send_timestamp_ns, 42u);
  EXPECT_EQ(back->values[259], -1.5f);

  OutputDatagram o;
  o.sequence = 9;
  o.values[1] = 0.75f;
  o.decision = workbench::Source::RR;
  o.latency_ns = 123456;
  const auto ob = encode(o);
  EXPECT_EQ(ob.size(), 2093u);
  EXPECT_EQ(ob[2088], 1u);
  const auto od = decode_output(ob);
  ASSERT_TRUE(od);
  EXPECT_EQ(od->latency_ns, 123456u);
  EXPECT_EQ(od->values[1], 0.75f);
}

TEST(Wire, LittleEndianLayout) {
  const auto in = encode(datagram(0x01020304u));
  EXPECT_EQ(in[4], 0x04);
  EXPECT_EQ(in[7], 0x01);
  // 0.25f is 0x3E800000
  EXPECT_EQ(in[16 + 3], 0x3E);
  EXPECT_EQ(in[16 + 2], 0x80);
}

TEST(Wire, MalformedInputs) {
  auto in = encode(datagram(1));
  in[0] = 'X';
  EXPECT_FALSE(decode_input(in));
  in = encode(datagram(1));
  in.pop_back();
  EXPECT_FALSE(decode_input(in));
  auto d = datagram(1);
  d.values[3] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_FALSE(decode_input(encode(d)));
}

TEST(Queue, DropsOldestAndKeepsNewest) {
  DropOldestQueue<int> q(4);
  std::vector<int> dropped;
  for (int i = 0; i < 10; ++i) {
    if (auto e = q.push(i)) dropped.push_back(*e);
  }
  EXPECT_EQ(dropped, (std::vector<int>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(q.size(), 4u);
  q.close();
  std::vector<int> rest;
  while (auto v = q.pop()) rest.push_back(*v);
  EXPECT_EQ(rest, (std::vector<int>{6, 7, 8, 9}));
}

TEST(Queue, PopUnblocksOnClose) {
  DropOldestQueue<int> q(2);
  std::thread t([&] { EXPECT_FALSE(q.pop()); });
  std::this_thread::sleep_for(10ms);
  q.close();
  t.join();
}

TEST(Stats, EqualLatencies) {
  std::vector<LatencyRecord> r;
  for (std::uint32_t i = 0; i < 10; ++i) r.push_back(rec(i, i * 1000, 1'500'000));
  const auto s = stats_report(r);
  EXPECT_EQ(s.mean_ns, 1'500'000.0);
  EXPECT_EQ(s.p50_ns, 1'500'000u);
  EXPECT_EQ(s.p99_ns, 1'500'000u);
  EXPECT_EQ(s.min_ns, s.max_ns);
}

TEST(Stats, DeadlineBoundaryIsInclusive) {
  std::vector<LatencyRecord> r;
  for (std::uint32_t i = 1; i <= 4; ++i) r.push_back(rec(i, i, i * 1'000'000ull));
  const auto s = stats_report(r, 3'000'000);
  EXPECT_EQ(s.deadline_misses, 1u);
  EXPECT_EQ(s.miss_rate(), 0.25);
  EXPECT_EQ(s.p50_ns, 2'000'000u);  // nearest rank: ceil(0.5 * 4) = 2nd
  EXPECT_EQ(s.p99_ns, 4'000'000u);
  EXPECT_THROW(stats_report({}), Error);
}

TEST(Stats, HistogramAndOrderInvariants) {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> dist(std::log(1.7e6), 0.1);
  std::vector<LatencyRecord> r;
  for (std::uint32_t i = 0; i < 5000; ++i) r.push_back(rec(i, i * 3'125'000ull, static_cast<std::uint64_t>(dist(rng))));
  const auto s = stats_report(r);
  std::uint64_t mass = 0;
  for (auto c : s.histogram) mass += c;
  EXPECT_EQ(mass, s.frames);
  EXPECT_LE(s.min_ns, s.p50_ns);
  EXPECT_LE(s.p50_ns, s.p99_ns);
  EXPECT_LE(s.p99_ns, s.max_ns);
  EXPECT_NEAR(s.achieved_fps, 320.0, 1e-9);

  std::size_t below = 0;
  for (const auto& x : r) below += x.latency_ns < 2'000'000;
  EXPECT_DOUBLE_EQ(s.fraction_below(2'000'000), static_cast<double>(below) / r.size());
}

TEST(Stats, RecordsCsvRoundTrip) {
  std::vector<LatencyRecord> r = {rec(1, 10, 2'000'000), rec(2, 20, 3'500'000)};
  std::stringstream ss;
  write_records_csv(ss, r);
  const auto back = read_records_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].latency_ns, 3'500'000u);
  EXPECT_FALSE(back[1].deadline_met);
  std::stringstream bad("seq,ingress_ns\n1;2;3\n");
  EXPECT_THROW(read_records_csv(bad), Error);
}

TEST(Config, JsonParsing) {
  const auto c = node_config_from_json(nlohmann::json::parse(R"({
    "listen": "0.0.0.0:9100", "emit": "127.0.0.1:9101", "engine": "bridge",
    "model": "m.json", "weights": "w.bin", "plan": "p.json",
    "standardize": {"mean": 112500, "std": 4330.127}, "queue_capacity": 8})"));
  EXPECT_EQ(c.listen.port, 9100);
  EXPECT_EQ(c.engine, EngineKind::BridgeSim);
  EXPECT_EQ(c.queue_capacity, 8u);
  ASSERT_TRUE(c.standardize);
  EXPECT_EQ(c.standardize->mean, 112500.0);
  EXPECT_THROW(node_config_from_json(nlohmann::json{{"deadline_ns", 0}}), Error);
  EXPECT_THROW(node_config_from_json(nlohmann::json{{"queue_capacity", 0}}), Error);
  EXPECT_THROW(node_config_from_json(nlohmann::json{{"drop_policy", "drop_newest"}}), Error);
  EXPECT_THROW(node_config_from_json(nlohmann::json{{"engine", "gpu"}}), Error);
}

TEST(Config, MissingModelIsModelLoadError) {
  NodeConfig c;
  c.model_path = "/nonexistent/model.json";
  try {
    make_engine(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ModelLoadError);
  }
}

TEST(Service, BindErrorOnTakenPort) {
  UdpSocket taken;
  taken.bind({"127.0.0.1", 0});
  NodeConfig c;
  c.listen = {"127.0.0.1", taken.local_port()};
  c.emit = {"127.0.0.1", 9};
  try {
    NodeService s(c, std::make_unique<QuantizedEngine>(quantized_mlp()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BindError);
  }
}

TEST(Service, OneFrameInOneDecisionOut) {
  Loopback lb;
  const auto q = quantized_mlp();
  NodeService svc(lb.config, std::make_unique<QuantizedEngine>(q));
  svc.start();
  UdpSocket tx;
  const auto to = resolve({"127.0.0.1", svc.listen_port()});
  auto d = datagram(77, 0.5f);
  tx.send_to(encode(d), to);
  auto bad = encode(d);
  bad[1] = 'X';
  tx.send_to(bad, to);
  tx.send_to(std::vector<std::uint8_t>(10, 0), to);

  const auto out = lb.collect(1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].sequence, 77u);
  std::vector<double> values(out[0].values.begin(), out[0].values.end());
  EXPECT_EQ(out[0].decision, workbench::decide_source(values));
  const auto expected = nn::infer_fixed(q, std::vector<double>(260, 0.5));
  for (std::size_t i = 0; i < values.size(); ++i) EXPECT_EQ(values[i], static_cast<float>(expected.values[i]));
  EXPECT_GT(out[0].latency_ns, 0u);

  std::this_thread::sleep_for(100ms);
  svc.stop();
  const auto c = svc.counters();
  EXPECT_EQ(c.received, 3u);
  EXPECT_EQ(c.processed, 1u);
  EXPECT_EQ(c.malformed, 2u);
  EXPECT_EQ(c.dropped, 0u);
  ASSERT_EQ(svc.records().size(), 1u);
  EXPECT_EQ(svc.records()[0].sequence, 77u);
}

TEST(Service, FreshnessUnderOverload) {
  Loopback lb;
  NodeService svc(lb.config, std::make_unique<SlowEngine>(std::make_unique<QuantizedEngine>(quantized_mlp()), 20ms));
  svc.start();
  UdpSocket tx;
  const auto to = resolve({"127.0.0.1", svc.listen_port()});
  constexpr std::uint32_t kBurst = 40;
  for (std::uint32_t i = 0; i < kBurst; ++i) tx.send_to(encode(datagram(i)), to);
  std::this_thread::sleep_for(400ms);
  svc.stop();

  const auto c = svc.counters();
  EXPECT_EQ(c.received, kBurst);
  EXPECT_EQ(c.received, c.processed + c.dropped + c.malformed);
  EXPECT_GT(c.dropped, 0u);
  const auto r = svc.records();
  ASSERT_FALSE(r.empty());
  for (std::size_t i = 1; i < r.size(); ++i) EXPECT_GT(r[i].sequence, r[i - 1].sequence);
  EXPECT_EQ(r.back().sequence, kBurst - 1);  // newest frame survives
  const auto outputs = lb.collect(kBurst);
  EXPECT_EQ(outputs.size(), r.size());
}

TEST(Service, StandardizesBeforeInference) {
  Loopback lb;
  lb.config.standardize = workbench::StandardizationParams{112500.0, 7500.0};
  const auto q = quantized_mlp();
  NodeService svc(lb.config, std::make_unique<QuantizedEngine>(q));
  svc.start();
  UdpSocket tx;
  tx.send_to(encode(datagram(1, 120000.0f)), resolve({"127.0.0.1", svc.listen_port()}));
  const auto out = lb.collect(1);
  svc.stop();
  ASSERT_EQ(out.size(), 1u);
  const auto expected = nn::infer_fixed(q, std::vector<double>(260, 1.0));
  EXPECT_EQ(out[0].values[0], static_cast<float>(expected.values[0]));
}

TEST(Replay, SendsCountFramesWithIncreasingSequence) {
  UdpSocket rx;
  rx.bind({"127.0.0.1", 0});
  rx.set_receive_timeout(200ms);
  const auto frames = workbench::synth_frames(7, 3, workbench::FrameMode::Raw);
  const auto rep = replay(frames, {"127.0.0.1", rx.local_port()}, {.fps = 500.0, .count = 50, .first_sequence = 10});
  EXPECT_EQ(rep.sent, 50u);
  EXPECT_NEAR(rep.wall_time_s, 49.0 / 500.0, 0.02);
  std::vector<std::uint8_t> buf(2048);
  std::uint32_t expect = 10;
  std::size_t got = 0;
  while (auto n = rx.receive(buf)) {
    const auto d = decode_input(std::span<const std::uint8_t>(buf.data(), *n));
    ASSERT_TRUE(d);
    EXPECT_EQ(d->sequence, expect++);
    ++got;
  }
  EXPECT_EQ(got, 50u);

  const auto one = replay(frames, {"127.0.0.1", rx.local_port()}, {.fps = 320.0, .count = 1});
  EXPECT_EQ(one.sent, 1u);
  EXPECT_THROW(replay(frames, {"127.0.0.1", 9}, {.fps = 0.0}), Error);
}

TEST(Replay, AchievedRateArithmetic) {
  EXPECT_DOUBLE_EQ(achieved_rate(3200, 3199.0 / 320.0), 320.0);
  EXPECT_EQ(achieved_rate(1, 1.0), 0.0);
}
