#pragma once

// Fixed-rate frame sender. Send times follow an absolute schedule
// t0 + i / fps so per-frame jitter never accumulates into rate drift.

#include <chrono>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "blm/error.hpp"
#include "blm/nn/model.hpp"
#include "blm/node/udp.hpp"
#include "blm/node/wire.hpp"

namespace blm::node {

struct ReplayOptions {
  double fps = 320.0;
  std::uint64_t count = 3200;
  std::uint32_t first_sequence = 0;
};

struct ReplayReport {
  std::uint64_t sent = 0;
  std::uint64_t send_failures = 0;
  double target_fps = 0.0;
  double wall_time_s = 0.0;  // first send to last send
  double achieved_fps = 0.0;

  // Relative deviation of the achieved rate from the target.
  double rate_error() const { return target_fps > 0.0 ? (achieved_fps - target_fps) / target_fps : 0.0; }
};

// Rate over a run of n sends spanning `wall_time_s`: (n - 1) intervals.
inline double achieved_rate(std::uint64_t sent, double wall_time_s) {
  if (sent < 2 || !(wall_time_s > 0.0)) return 0.0;
  return static_cast<double>(sent - 1) / wall_time_s;
}

// Frames are cycled if `count` exceeds their number; sequence numbers increase
// monotonically from `first_sequence`.
inline ReplayReport replay(std::span<const nn::Frame> frames, const Endpoint& target, const ReplayOptions& opt) {
  if (frames.empty()) throw Error(ErrorKind::BadParams, "replay needs at least one frame");
  if (!(opt.fps > 0.0)) throw Error(ErrorKind::BadParams, "fps must be positive");
  UdpSocket socket;
  const sockaddr_in to = resolve(target);
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration<double>(1.0 / opt.fps);

  ReplayReport r;
  r.target_fps = opt.fps;
  InputDatagram d;
  const auto t0 = clock::now();
  auto last = t0;
  for (std::uint64_t i = 0; i < opt.count; ++i) {
    std::this_thread::sleep_until(t0 + std::chrono::duration_cast<clock::duration>(period * static_cast<double>(i)));
    const auto& frame = frames[i % frames.size()];
    d.sequence = opt.first_sequence + static_cast<std::uint32_t>(i);
    for (std::size_t k = 0; k < d.values.size(); ++k) d.values[k] = static_cast<float>(frame.values()[k]);
    d.send_timestamp_ns = monotonic_ns();
    if (socket.send_to(encode(d), to)) {
      ++r.sent;
    } else {
      ++r.send_failures;
    }
    last = clock::now();
  }
  r.wall_time_s = std::chrono::duration<double>(last - t0).count();
  r.achieved_fps = achieved_rate(opt.count, r.wall_time_s);
  return r;
}

}  // namespace blm::node
