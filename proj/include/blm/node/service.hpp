#pragma once

// Real-time de-blending service: UDP frames in, decisions out.
//
// Three single-threaded stages (receive, infer, emit) hand frames over through
// bounded drop-oldest queues. Counters obey
//   received == processed + dropped + malformed
// once the service has been stopped and drained.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "blm/bridge.hpp"
#include "blm/error.hpp"
#include "blm/nn/infer.hpp"
#include "blm/nn/model.hpp"
#include "blm/node/queue.hpp"
#include "blm/node/stats.hpp"
#include "blm/node/udp.hpp"
#include "blm/node/wire.hpp"
#include "blm/quant.hpp"
#include "blm/workbench/synth.hpp"

namespace blm::node {

enum class EngineKind { FloatOracle, Quantized, BridgeSim };

inline std::string_view to_string(EngineKind k) {
  switch (k) {
    case EngineKind::FloatOracle: return "float";
    case EngineKind::Quantized: return "quantized";
    case EngineKind::BridgeSim: return "bridge";
  }
  return "?";
}

inline EngineKind parse_engine(std::string_view text) {
  if (text == "float") return EngineKind::FloatOracle;
  if (text == "quantized") return EngineKind::Quantized;
  if (text == "bridge") return EngineKind::BridgeSim;
  throw Error(ErrorKind::ParseError, "unknown engine '" + std::string(text) + "'");
}

struct NodeConfig {
  Endpoint listen{"127.0.0.1", 0};
  Endpoint emit{"127.0.0.1", 0};
  std::uint64_t deadline_ns = kDefaultDeadlineNs;
  EngineKind engine = EngineKind::Quantized;
  std::string model_path;    // descriptor JSON
  std::string weights_path;  // raw float32
  std::string plan_path;
  std::string timing_path;
  std::size_t queue_capacity = 4;
  std::optional<workbench::StandardizationParams> standardize;
  std::string records_path;
  double duration_s = 0.0;  // 0 runs until signaled

  void validate() const {
    if (deadline_ns == 0) throw Error(ErrorKind::BadParams, "deadline must be positive");
    if (queue_capacity == 0) throw Error(ErrorKind::BadParams, "queue capacity must be at least 1");
  }
};

inline NodeConfig node_config_from_json(const nlohmann::json& doc) {
  NodeConfig c;
  try {
    c.listen = parse_endpoint(doc.value("listen", std::string("127.0.0.1:9000")));
    c.emit = parse_endpoint(doc.value("emit", std::string("127.0.0.1:9001")));
    c.deadline_ns = doc.value("deadline_ns", c.deadline_ns);
    c.engine = parse_engine(doc.value("engine", std::string("quantized")));
    c.model_path = doc.value("model", std::string());
    c.weights_path = doc.value("weights", std::string());
    c.plan_path = doc.value("plan", std::string());
    c.timing_path = doc.value("timing", std::string());
    c.queue_capacity = doc.value("queue_capacity", c.queue_capacity);
    if (doc.value("drop_policy", std::string("drop_oldest")) != "drop_oldest") {
      throw Error(ErrorKind::ParseError, "only drop_policy 'drop_oldest' is supported");
    }
    if (doc.contains("standardize")) {
      const auto& s = doc.at("standardize");
      c.standardize = workbench::StandardizationParams{s.at("mean").get<double>(), s.at("std").get<double>()};
      if (!(c.standardize->std > 0.0)) throw Error(ErrorKind::BadParams, "standardize.std must be positive");
    }
    c.records_path = doc.value("records", std::string());
    c.duration_s = doc.value("duration_s", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Engines

struct EngineResult {
  nn::InferenceOutput output;
  std::uint64_t engine_latency_ns = 0;
};

class Engine {
 public:
  virtual ~Engine() = default;
  virtual EngineResult run(const nn::Frame& frame) = 0;
};

class FloatEngine final : public Engine {
 public:
  explicit FloatEngine(nn::Model model) : model_(std::move(model)) {}
  EngineResult run(const nn::Frame& frame) override {
    const auto t0 = monotonic_ns();
    auto out = nn::infer_float(model_, frame);
    return {std::move(out), monotonic_ns() - t0};
  }

 private:
  nn::Model model_;
};

class QuantizedEngine final : public Engine {
 public:
  explicit QuantizedEngine(quant::QuantizedModel model) : model_(std::move(model)) {}
  EngineResult run(const nn::Frame& frame) override {
    const auto t0 = monotonic_ns();
    auto out = nn::infer_fixed(model_, frame);
    return {std::move(out), monotonic_ns() - t0};
  }

 private:
  quant::QuantizedModel model_;
};

// Engine latency is the simulated Step 1-8 transaction time.
class BridgeEngine final : public Engine {
 public:
  BridgeEngine(std::shared_ptr<const quant::QuantizedModel> model, bridge::TimingConfig timing)
      : sim_(std::move(model), timing) {}
  EngineResult run(const nn::Frame& frame) override {
    auto r = sim_.run_transaction(frame);
    return {std::move(r.output), r.trace.total_latency_ns};
  }

 private:
  bridge::BridgeSimulator sim_;
};

inline std::string read_file(const std::string& path, ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(kind, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Loads model, weights, plan and timing named by the config.
inline std::unique_ptr<Engine> make_engine(const NodeConfig& c) {
  try {
    const auto descriptor = nn::load_descriptor(read_file(c.model_path, ErrorKind::ModelLoadError));
    const auto bytes = read_file(c.weights_path, ErrorKind::ModelLoadError);
    auto model = nn::load_weights(
        std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()), descriptor);
    if (c.engine == EngineKind::FloatOracle) return std::make_unique<FloatEngine>(std::move(model));
    const auto plan = quant::plan_from_json(nlohmann::json::parse(read_file(c.plan_path, ErrorKind::ModelLoadError)));
    auto q = quant::quantize_model(model, plan);
    if (c.engine == EngineKind::Quantized) return std::make_unique<QuantizedEngine>(std::move(q));
    bridge::TimingConfig timing;
    if (!c.timing_path.empty()) {
      timing = bridge::timing_from_json(nlohmann::json::parse(read_file(c.timing_path, ErrorKind::ModelLoadError)));
    }
    return std::make_unique<BridgeEngine>(std::make_shared<const quant::QuantizedModel>(std::move(q)), timing);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ModelLoadError) throw;
    throw Error(ErrorKind::ModelLoadError, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ModelLoadError, e.what());
  }
}

// ---------------------------------------------------------------------------
// Service

struct NodeCounters {
  std::uint64_t received = 0;
  std::uint64_t processed = 0;
  std::uint64_t dropped = 0;
  std::uint64_t malformed = 0;
};

class NodeService {
 public:
  // Binds the listening socket immediately; BindError on failure.
  NodeService(NodeConfig config, std::unique_ptr<Engine> engine)
      : config_(std::move(config)),
        engine_(std::move(engine)),
        emit_addr_(resolve(config_.emit)),
        inbound_(config_.queue_capacity),
        outbound_(config_.queue_capacity) {
    config_.validate();
    if (!engine_) throw Error(ErrorKind::ModelLoadError, "no engine");
    rx_.set_receive_buffer(1 << 21);
    rx_.bind(config_.listen);
    rx_.set_receive_timeout(std::chrono::milliseconds(20));
  }

  ~NodeService() { stop(); }
  NodeService(const NodeService&) = delete;
  NodeService& operator=(const NodeService&) = delete;

  std::uint16_t listen_port() const { return rx_.local_port(); }

  void start() {
    if (started_.exchange(true)) return;
    receiver_ = std::thread([this] { receive_loop(); });
    worker_ = std::thread([this] { infer_loop(); });
    emitter_ = std::thread([this] { emit_loop(); });
  }

  // Stops receiving, then drains both queues in order.
  void stop() {
    if (!started_ || stopped_.exchange(true)) return;
    stop_rx_ = true;
    if (receiver_.joinable()) receiver_.join();
    inbound_.close();
    if (worker_.joinable()) worker_.join();
    outbound_.close();
    if (emitter_.joinable()) emitter_.join();
  }

  NodeCounters counters() const {
    std::lock_guard lock(mu_);
    return counters_;
  }

  std::vector<LatencyRecord> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }

  RunStats stats() const {
    std::lock_guard lock(mu_);
    RunStats s;
    if (!records_.empty()) s = stats_report(records_, config_.deadline_ns);
    s.deadline_ns = config_.deadline_ns;
    s.drops = counters_.dropped;
    s.malformed = counters_.malformed;
    return s;
  }

  const NodeConfig& config() const { return config_; }

 private:
  struct Pending {
    nn::Frame frame;
    std::uint64_t ingress_ns = 0;
  };
  struct Done {
    std::uint32_t sequence = 0;
    std::uint64_t ingress_ns = 0;
    EngineResult result;
  };

  void receive_loop() {
    std::vector<std::uint8_t> buf(kInputDatagramSize + 64);
    while (!stop_rx_) {
      const auto n = rx_.receive(buf);
      if (!n) continue;
      const std::uint64_t ingress = monotonic_ns();
      std::optional<InputDatagram> d;
      if (*n <= buf.size()) d = decode_input(std::span<const std::uint8_t>(buf.data(), *n));
      {
        std::lock_guard lock(mu_);
        ++counters_.received;
        if (!d) ++counters_.malformed;
      }
      if (!d) continue;
      nn::Frame frame(std::vector<double>(d->values.begin(), d->values.end()), d->sequence, ingress);
      if (inbound_.push(Pending{std::move(frame), ingress})) count_drop();
    }
  }

  void infer_loop() {
    while (auto item = inbound_.pop()) {
      const nn::Frame frame = config_.standardize ? workbench::standardize(item->frame, *config_.standardize)
                                                  : std::move(item->frame);
      Done done{frame.sequence(), item->ingress_ns, engine_->run(frame)};
      if (outbound_.push(std::move(done))) count_drop();
    }
  }

  void emit_loop() {
    while (auto item = outbound_.pop()) {
      OutputDatagram out;
      out.sequence = item->sequence;
      const auto& values = item->result.output.values;
      for (std::size_t i = 0; i < out.values.size() && i < values.size(); ++i) out.values[i] = static_cast<float>(values[i]);
      // The decision travels with the values actually sent.
      std::vector<double> sent(out.values.begin(), out.values.end());
      out.decision = workbench::decide_source(sent);
      const std::uint64_t pre_send = monotonic_ns();
      out.latency_ns = static_cast<std::uint32_t>(std::min<std::uint64_t>(pre_send - item->ingress_ns, UINT32_MAX));
      tx_.send_to(encode(out), emit_addr_);
      const std::uint64_t egress = monotonic_ns();

      LatencyRecord rec;
      rec.sequence = item->sequence;
      rec.ingress_ns = item->ingress_ns;
      rec.latency_ns = egress - item->ingress_ns;
      rec.engine_latency_ns = item->result.engine_latency_ns;
      rec.deadline_met = rec.latency_ns <= config_.deadline_ns;
      std::lock_guard lock(mu_);
      ++counters_.processed;
      records_.push_back(rec);
    }
  }

  void count_drop() {
    std::lock_guard lock(mu_);
    ++counters_.dropped;
  }

  NodeConfig config_;
  std::unique_ptr<Engine> engine_;
  sockaddr_in emit_addr_;
  UdpSocket rx_;
  UdpSocket tx_;
  DropOldestQueue<Pending> inbound_;
  DropOldestQueue<Done> outbound_;
  std::thread receiver_, worker_, emitter_;
  std::atomic<bool> started_{false}, stopped_{false}, stop_rx_{false};

  mutable std::mutex mu_;
  NodeCounters counters_;
  std::vector<LatencyRecord> records_;
};

}  // namespace blm::node
