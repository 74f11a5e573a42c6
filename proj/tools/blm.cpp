// blm: command-line front end for the fixed-point workbench, estimator,
// bridge simulator and UDP inference node.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "blm/blm.hpp"

using namespace blm;
namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

// "mlp" and "unet" name the built-in descriptors; anything else is a JSON file.
nn::ModelDescriptor load_model_descriptor(const std::string& arg) {
  if (arg == "mlp") return nn::reference_mlp();
  if (arg == "unet") return nn::reference_unet();
  return nn::load_descriptor(node::read_file(arg, ErrorKind::IoError));
}

nn::Model load_model(const std::string& model, const std::string& weights) {
  const auto d = load_model_descriptor(model);
  const auto bytes = node::read_file(weights, ErrorKind::IoError);
  return nn::load_weights(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()), d);
}

std::vector<nn::Frame> load_frames(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
  return workbench::read_frames_csv(in);
}

nlohmann::json load_json(const std::string& path) {
  try {
    return nlohmann::json::parse(node::read_file(path, ErrorKind::IoError));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
  return out;
}

// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    open_out(path) << text;
  }
}

workbench::FrameMode parse_mode(const std::string& s) {
  if (s == "raw") return workbench::FrameMode::Raw;
  if (s == "standardized") return workbench::FrameMode::Standardized;
  throw Error(ErrorKind::BadParams, "frame mode must be raw or standardized");
}

void cmd_describe(const std::string& model, bool json) {
  const auto d = load_model_descriptor(model);
  if (json) {
    std::cout << nn::to_json(d).dump(2) << '\n';
    return;
  }
  std::cout << std::left << std::setw(18) << "layer" << std::setw(14) << "kind" << std::setw(12) << "output"
            << std::right << std::setw(10) << "params" << std::setw(12) << "mults" << '\n';
  for (const auto& l : d.layers) {
    std::cout << std::left << std::setw(18) << l.name << std::setw(14) << nn::to_string(l.kind) << std::setw(12)
              << nn::to_string(l.output_shape) << std::right << std::setw(10) << l.param_count() << std::setw(12)
              << l.mult_count() << '\n';
  }
  std::cout << "total parameters: " << d.param_count << '\n';
}

void cmd_quantize(const std::string& spec_text, const std::string& rounding, const std::string& overflow,
                  const std::vector<double>& values) {
  const auto spec = fxp::parse_spec(spec_text, fxp::parse_rounding(rounding), fxp::parse_overflow(overflow));
  std::cout << fxp::to_string(spec) << " ulp=" << spec.ulp() << " range=[" << spec.min_value() << ", "
            << spec.max_value() << "]\n";
  std::cout << std::setprecision(17);
  for (double x : values) {
    const auto r = fxp::quantize(x, spec);
    std::cout << x << " -> code " << r.value.code << " value " << fxp::to_real(r.value)
              << (r.overflowed ? " overflow" : "") << '\n';
  }
}

void cmd_calibrate(const std::string& model, const std::string& weights, const std::string& frames,
                   const std::string& out) {
  const auto m = load_model(model, weights);
  const auto f = load_frames(frames);
  const auto prof = quant::profile(m, f);
  emit(out, quant::to_json(prof).dump(2) + "\n");
  if (!out.empty() && out != "-") std::cerr << "profiled " << prof.samples << " frames into " << out << '\n';
}

void cmd_plan(const std::string& profile, int bits, int guard, int uniform_integer_bits, const std::string& model,
              const std::string& out) {
  quant::PrecisionPlan plan;
  if (uniform_integer_bits > 0) {
    if (model.empty()) throw Error(ErrorKind::BadParams, "--uniform needs --model");
    plan = quant::uniform_plan(load_model_descriptor(model), bits, uniform_integer_bits);
  } else {
    if (profile.empty()) throw Error(ErrorKind::BadParams, "--profile is required");
    plan = quant::plan_precision(quant::profile_from_json(load_json(profile)), bits, guard);
  }
  emit(out, quant::to_json(plan).dump(2) + "\n");
}

int cmd_estimate(const std::string& model, const std::string& plan_path, std::uint64_t rf_default,
                 const std::string& rf, double clock, const std::string& schedule, double deadline,
                 const std::string& csv) {
  const auto d = load_model_descriptor(model);
  std::optional<quant::PrecisionPlan> plan;
  if (!plan_path.empty()) {
    plan = quant::plan_from_json(load_json(plan_path));
    quant::check_plan_covers(d, *plan);
  }
  const auto est = perf::estimate_model(d, perf::parse_reuse_map(rf_default, rf), plan ? &*plan : nullptr, clock,
                                        perf::parse_schedule(schedule));
  perf::write_table(std::cout, est);
  if (!csv.empty()) {
    auto out = open_out(csv);
    perf::write_csv(out, est);
  }
  if (deadline > 0.0) {
    const auto b = perf::check_budget(est, deadline);
    std::cout << "budget " << (b.pass ? "PASS" : "FAIL") << ": latency_ms=" << b.latency_s * 1e3
              << " deadline_ms=" << b.deadline_s * 1e3 << " slack_ms=" << b.slack_s * 1e3 << '\n';
    return b.pass ? 0 : 3;
  }
  return 0;
}

void cmd_synth_frames(std::size_t count, std::uint64_t seed, const std::string& mode, const std::string& out) {
  const auto frames = workbench::synth_frames(seed, count, parse_mode(mode));
  std::ostringstream ss;
  workbench::write_frames_csv(ss, frames);
  emit(out, ss.str());
}

void cmd_synth_weights(const std::string& model, std::uint64_t seed, double scale, bool heterogeneous,
                       const std::string& out) {
  const auto d = load_model_descriptor(model);
  const auto profile = heterogeneous ? workbench::heterogeneous_unet_profile() : workbench::LayerScaleProfile{scale, {}};
  const auto bytes = workbench::synth_weights(seed, d, profile);
  open_out(out).write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

struct CompareArgs {
  std::string model, weights, calibration, evaluation, csv;
  std::uint64_t seed = 7;
  std::size_t n_calibration = 1000, n_evaluation = 1000;
  int guard = 0;
};

void cmd_compare(const CompareArgs& a) {
  workbench::Fixture fx;
  if (a.model.empty()) {
    fx = workbench::heterogeneous_fixture(a.seed, a.n_calibration, a.n_evaluation);
  } else {
    if (a.weights.empty() || a.calibration.empty() || a.evaluation.empty()) {
      throw Error(ErrorKind::BadParams, "--model needs --weights, --calibration and --evaluation");
    }
    fx = {load_model(a.model, a.weights), load_frames(a.calibration), load_frames(a.evaluation)};
  }
  const auto report = workbench::compare_strategies(fx.model, fx.calibration, fx.evaluation, a.guard);
  workbench::write_text(std::cout, report);
  if (!a.csv.empty()) {
    auto out = open_out(a.csv);
    workbench::write_csv(out, report);
  }
}

struct SimulateArgs {
  std::string model, weights, plan, frames, timing, trace_csv, records;
};

void cmd_simulate(const SimulateArgs& a) {
  const auto m = load_model(a.model, a.weights);
  const auto plan = quant::plan_from_json(load_json(a.plan));
  const auto timing = a.timing.empty() ? bridge::TimingConfig{} : bridge::timing_from_json(load_json(a.timing));
  bridge::BridgeSimulator sim(std::make_shared<const quant::QuantizedModel>(quant::quantize_model(m, plan)), timing);
  const auto frames = load_frames(a.frames);
  std::ofstream trace;
  if (!a.trace_csv.empty()) trace = open_out(a.trace_csv);
  std::vector<node::LatencyRecord> records;
  std::size_t rr = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto r = sim.run_transaction(frames[i]);
    if (trace.is_open()) bridge::write_trace_csv(trace, r.trace, i == 0);
    const auto ns = r.trace.total_latency_ns;
    records.push_back({frames[i].sequence(), i * 3'125'000ull, ns, ns, ns <= node::kDefaultDeadlineNs});
    rr += r.output.decision == workbench::Source::RR ? 1 : 0;
  }
  if (!a.records.empty()) {
    auto out = open_out(a.records);
    node::write_records_csv(out, records);
  }
  node::write_stats(std::cout, node::stats_report(records, node::kDefaultDeadlineNs, node::LatencyField::Engine));
  std::cout << "decisions: MI=" << frames.size() - rr << " RR=" << rr << '\n';
}

int cmd_serve(const std::string& config_path) {
  const auto config = node::node_config_from_json(load_json(config_path));
  node::NodeService svc(config, node::make_engine(config));
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  svc.start();
  std::cerr << "listening on " << config.listen.host << ':' << svc.listen_port() << ", emitting to "
            << config.emit.host << ':' << config.emit.port << '\n';
  const auto t0 = std::chrono::steady_clock::now();
  while (!g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (config.duration_s > 0.0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= config.duration_s) {
      break;
    }
  }
  svc.stop();
  const auto c = svc.counters();
  std::cout << "received=" << c.received << " processed=" << c.processed << " dropped=" << c.dropped
            << " malformed=" << c.malformed << '\n';
  if (c.processed > 0) node::write_stats(std::cout, svc.stats());
  if (!config.records_path.empty()) {
    auto out = open_out(config.records_path);
    node::write_records_csv(out, svc.records());
  }
  return 0;
}

void cmd_replay(double fps, std::size_t count, std::uint64_t seed, const std::string& target,
                const std::string& frames_path, const std::string& mode) {
  const auto frames =
      frames_path.empty() ? workbench::synth_frames(seed, std::min<std::size_t>(count, 1000), parse_mode(mode))
                          : load_frames(frames_path);
  const auto r = node::replay(frames, node::parse_endpoint(target), {.fps = fps, .count = count});
  std::cout << "sent=" << r.sent << " send_failures=" << r.send_failures << " wall_s=" << r.wall_time_s
            << " target_fps=" << r.target_fps << " achieved_fps=" << r.achieved_fps
            << " rate_error=" << r.rate_error() << '\n';
}

struct ReportArgs {
  std::string records, plot, field = "e2e", model, weights, frames;
  double deadline = 3e-3;
  int min_bits = 8, max_bits = 20;
};

void write_accuracy_plots(const ReportArgs& a, const fs::path& dir) {
  workbench::Fixture fx;
  if (a.model.empty()) {
    fx = workbench::heterogeneous_fixture(7, 100, 100);
  } else {
    if (a.weights.empty() || a.frames.empty()) throw Error(ErrorKind::BadParams, "--model needs --weights and --frames");
    auto frames = load_frames(a.frames);
    if (frames.size() < 2) throw Error(ErrorKind::BadParams, "need at least two frames to split");
    const auto half = static_cast<std::ptrdiff_t>(frames.size() / 2);
    fx = {load_model(a.model, a.weights), {frames.begin(), frames.begin() + half}, {frames.begin() + half, frames.end()}};
  }
  const auto prof = quant::profile(fx.model, fx.calibration);
  const auto points = workbench::accuracy_vs_bits(fx.model, prof, fx.evaluation, a.min_bits, a.max_bits);
  auto mi = open_out(dir / "accuracy_mi_vs_bits.dat");
  auto rr = open_out(dir / "accuracy_rr_vs_bits.dat");
  auto outl = open_out(dir / "outliers_vs_bits.dat");
  mi << "# total_bits accuracy_mi\n";
  rr << "# total_bits accuracy_rr\n";
  outl << "# total_bits outliers\n";
  for (const auto& p : points) {
    mi << p.total_bits << ' ' << p.acc_mi << '\n';
    rr << p.total_bits << ' ' << p.acc_rr << '\n';
    outl << p.total_bits << ' ' << p.outliers << '\n';
  }
}

void cmd_report(const ReportArgs& a) {
  std::ifstream in(a.records);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + a.records + "'");
  const auto records = node::read_records_csv(in);
  if (a.field != "e2e" && a.field != "engine") throw Error(ErrorKind::BadParams, "--field must be e2e or engine");
  const auto field = a.field == "engine" ? node::LatencyField::Engine : node::LatencyField::EndToEnd;
  const auto stats = node::stats_report(records, static_cast<std::uint64_t>(a.deadline * 1e9), field);
  node::write_stats(std::cout, stats);
  if (!a.plot.empty()) {
    const fs::path dir(a.plot);
    fs::create_directories(dir);
    auto hist = open_out(dir / "latency_histogram.dat");
    node::write_histogram(hist, stats);
    write_accuracy_plots(a, dir);
    std::cerr << "plot data written to " << dir << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-point inference workbench and real-time UDP node"};
  app.require_subcommand(1);
  int status = 0;

  auto* describe = app.add_subcommand("describe", "Print a model's layers and sizes");
  std::string d_model;
  bool d_json = false;
  describe->add_option("--model", d_model, "Descriptor JSON, or mlp / unet")->required();
  describe->add_flag("--json", d_json, "Print the descriptor as JSON");
  describe->callback([&] { cmd_describe(d_model, d_json); });

  auto* quantize = app.add_subcommand("quantize", "Quantize values into a fixed-point format");
  std::string q_spec, q_round = "nearest_even", q_over = "saturate";
  std::vector<double> q_values;
  quantize->add_option("--spec", q_spec, "Format, e.g. fx<16,7>")->required();
  quantize->add_option("--rounding", q_round, "nearest_even or truncate")->capture_default_str();
  quantize->add_option("--overflow", q_over, "saturate or wrap")->capture_default_str();
  quantize->add_option("values", q_values)->required();
  quantize->callback([&] { cmd_quantize(q_spec, q_round, q_over, q_values); });

  auto* calibrate = app.add_subcommand("calibrate", "Profile per-layer max-abs activations");
  std::string c_model, c_weights, c_frames, c_out;
  calibrate->add_option("--model", c_model)->required();
  calibrate->add_option("--weights", c_weights)->required();
  calibrate->add_option("--frames", c_frames, "Frames CSV")->required();
  calibrate->add_option("--out", c_out, "Profile JSON (stdout if omitted)");
  calibrate->callback([&] { cmd_calibrate(c_model, c_weights, c_frames, c_out); });

  auto* plan = app.add_subcommand("plan", "Derive a precision plan");
  std::string p_profile, p_model, p_out;
  int p_bits = 16, p_guard = 0, p_uniform = 0;
  plan->add_option("--profile", p_profile, "Calibration profile JSON");
  plan->add_option("--bits", p_bits)->capture_default_str();
  plan->add_option("--guard", p_guard)->capture_default_str();
  plan->add_option("--uniform", p_uniform, "Integer bits for a uniform plan (needs --model)");
  plan->add_option("--model", p_model);
  plan->add_option("--out", p_out, "Plan JSON (stdout if omitted)");
  plan->callback([&] { cmd_plan(p_profile, p_bits, p_guard, p_uniform, p_model, p_out); });

  auto* estimate = app.add_subcommand("estimate", "Resource and latency estimate for a reuse configuration");
  std::string e_model, e_plan, e_rf, e_schedule = "sequential", e_csv;
  std::uint64_t e_rf_default = 1;
  double e_clock = perf::kDefaultClockHz, e_deadline = 0.0;
  estimate->add_option("--model", e_model)->required();
  estimate->add_option("--plan", e_plan, "Plan JSON for memory widths");
  estimate->add_option("--rf-default", e_rf_default)->capture_default_str();
  estimate->add_option("--rf", e_rf, "Overrides, pattern:rf[,pattern:rf]");
  estimate->add_option("--clock", e_clock, "Clock in Hz")->capture_default_str();
  estimate->add_option("--schedule", e_schedule, "sequential or dataflow")->capture_default_str();
  estimate->add_option("--deadline", e_deadline, "Budget in seconds; exit 3 when exceeded");
  estimate->add_option("--csv", e_csv, "Also write the table as CSV");
  estimate->callback([&] {
    status = cmd_estimate(e_model, e_plan, e_rf_default, e_rf, e_clock, e_schedule, e_deadline, e_csv);
  });

  auto* synth_frames = app.add_subcommand("synth-frames", "Generate synthetic frames as CSV");
  std::size_t sf_count = 100;
  std::uint64_t sf_seed = 1;
  std::string sf_mode = "standardized", sf_out;
  synth_frames->add_option("--count", sf_count)->capture_default_str();
  synth_frames->add_option("--seed", sf_seed)->capture_default_str();
  synth_frames->add_option("--mode", sf_mode, "raw or standardized")->capture_default_str();
  synth_frames->add_option("--out", sf_out);
  synth_frames->callback([&] { cmd_synth_frames(sf_count, sf_seed, sf_mode, sf_out); });

  auto* synth_weights = app.add_subcommand("synth-weights", "Generate a synthetic weight file");
  std::string sw_model, sw_out;
  std::uint64_t sw_seed = 1;
  double sw_scale = 0.1;
  bool sw_hetero = false;
  synth_weights->add_option("--model", sw_model)->required();
  synth_weights->add_option("--seed", sw_seed)->capture_default_str();
  synth_weights->add_option("--scale", sw_scale, "Standard deviation for every layer")->capture_default_str();
  synth_weights->add_flag("--heterogeneous", sw_hetero, "Per-layer scales spanning a wide range (U-Net)");
  synth_weights->add_option("--out", sw_out)->required();
  synth_weights->callback([&] { cmd_synth_weights(sw_model, sw_seed, sw_scale, sw_hetero, sw_out); });

  auto* compare = app.add_subcommand("compare", "Compare uniform and layer-based precision strategies");
  CompareArgs cmp;
  compare->add_option("--model", cmp.model, "Omit to use the synthetic heterogeneous fixture");
  compare->add_option("--weights", cmp.weights);
  compare->add_option("--calibration", cmp.calibration, "Calibration frames CSV");
  compare->add_option("--evaluation", cmp.evaluation, "Evaluation frames CSV");
  compare->add_option("--seed", cmp.seed)->capture_default_str();
  compare->add_option("--n-calibration", cmp.n_calibration)->capture_default_str();
  compare->add_option("--n-evaluation", cmp.n_evaluation)->capture_default_str();
  compare->add_option("--guard", cmp.guard)->capture_default_str();
  compare->add_option("--csv", cmp.csv);
  compare->callback([&] { cmd_compare(cmp); });

  auto* simulate = app.add_subcommand("simulate", "Run frames through the host/accelerator bridge model");
  SimulateArgs sim;
  simulate->add_option("--model", sim.model)->required();
  simulate->add_option("--weights", sim.weights)->required();
  simulate->add_option("--plan", sim.plan)->required();
  simulate->add_option("--frames", sim.frames)->required();
  simulate->add_option("--timing", sim.timing, "Timing JSON (defaults otherwise)");
  simulate->add_option("--trace-csv", sim.trace_csv, "Per-step trace of every transaction");
  simulate->add_option("--records", sim.records, "Latency records CSV");
  simulate->callback([&] { cmd_simulate(sim); });

  auto* serve = app.add_subcommand("serve", "Run the UDP inference node");
  std::string s_config;
  serve->add_option("--config", s_config, "Node JSON config")->required();
  serve->callback([&] { status = cmd_serve(s_config); });

  auto* replay = app.add_subcommand("replay", "Send frames to a node at a fixed rate");
  double r_fps = 320.0;
  std::size_t r_count = 3200;
  std::uint64_t r_seed = 7;
  std::string r_target, r_frames, r_mode = "raw";
  replay->add_option("--fps", r_fps)->capture_default_str();
  replay->add_option("--count", r_count)->capture_default_str();
  replay->add_option("--seed", r_seed)->capture_default_str();
  replay->add_option("--target", r_target, "host:port")->required();
  replay->add_option("--frames", r_frames, "Frames CSV, cycled (synthetic otherwise)");
  replay->add_option("--mode", r_mode, "Synthetic frame mode: raw or standardized")->capture_default_str();
  replay->callback([&] { cmd_replay(r_fps, r_count, r_seed, r_target, r_frames, r_mode); });

  auto* report = app.add_subcommand("report", "Summarize latency records");
  ReportArgs rep;
  report->add_option("--records", rep.records, "Records CSV")->required();
  report->add_option("--deadline", rep.deadline, "Seconds")->capture_default_str();
  report->add_option("--field", rep.field, "e2e or engine")->capture_default_str();
  report->add_option("--plot", rep.plot, "Directory for two-column plot data");
  report->add_option("--model", rep.model, "Model for the accuracy-vs-bits data (synthetic otherwise)");
  report->add_option("--weights", rep.weights);
  report->add_option("--frames", rep.frames, "Frames CSV, split into calibration and evaluation halves");
  report->add_option("--min-bits", rep.min_bits)->capture_default_str();
  report->add_option("--max-bits", rep.max_bits)->capture_default_str();
  report->callback([&] { cmd_report(rep); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}
