#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "blm/error.hpp"

namespace blm::node {

inline constexpr std::uint64_t kDefaultDeadlineNs = 3'000'000;
inline constexpr std::uint64_t kHistogramBinNs = 50'000;

struct LatencyRecord {
  std::uint32_t sequence = 0;
  std::uint64_t ingress_ns = 0;         // monotonic clock at receipt
  std::uint64_t latency_ns = 0;         // receipt -> send completion
  std::uint64_t engine_latency_ns = 0;  // inference (or simulated transaction) time
  bool deadline_met = true;
};

struct RunStats {
  std::uint64_t frames = 0;
  std::uint64_t drops = 0;
  std::uint64_t malformed = 0;
  std::uint64_t deadline_ns = kDefaultDeadlineNs;
  double mean_ns = 0.0;
  std::uint64_t min_ns = 0;
  std::uint64_t max_ns = 0;
  std::uint64_t p50_ns = 0;
  std::uint64_t p99_ns = 0;
  std::uint64_t deadline_misses = 0;
  double achieved_fps = 0.0;
  std::vector<std::uint64_t> histogram;  // bin i covers [i, i+1) x 50 us

  double miss_rate() const { return frames ? static_cast<double>(deadline_misses) / static_cast<double>(frames) : 0.0; }
  double fraction_below(std::uint64_t threshold_ns) const;
};

// Which latency column the statistics summarize.
enum class LatencyField { EndToEnd, Engine };

namespace detail {

// Nearest-rank percentile over sorted data: element ceil(p/100 * n), 1-based.
inline std::uint64_t nearest_rank(const std::vector<std::uint64_t>& sorted, double p) {
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

}  // namespace detail

inline RunStats stats_report(const std::vector<LatencyRecord>& records, std::uint64_t deadline_ns = kDefaultDeadlineNs,
                             LatencyField field = LatencyField::EndToEnd) {
  if (records.empty()) throw Error(ErrorKind::BadParams, "stats need at least one record");
  RunStats s;
  s.frames = records.size();
  s.deadline_ns = deadline_ns;
  std::vector<std::uint64_t> lat;
  lat.reserve(records.size());
  long double sum = 0.0L;
  for (const auto& r : records) {
    const std::uint64_t v = field == LatencyField::EndToEnd ? r.latency_ns : r.engine_latency_ns;
    lat.push_back(v);
    sum += v;
    s.deadline_misses += v > deadline_ns ? 1 : 0;
  }
  s.mean_ns = static_cast<double>(sum / static_cast<long double>(lat.size()));
  std::sort(lat.begin(), lat.end());
  s.min_ns = lat.front();
  s.max_ns = lat.back();
  s.p50_ns = detail::nearest_rank(lat, 50.0);
  s.p99_ns = detail::nearest_rank(lat, 99.0);
  s.histogram.assign(s.max_ns / kHistogramBinNs + 1, 0);
  for (auto v : lat) ++s.histogram[v / kHistogramBinNs];

  // Arrival rate over the ingress span.
  auto [first, last] = std::minmax_element(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.ingress_ns < b.ingress_ns;
  });
  if (records.size() > 1 && last->ingress_ns > first->ingress_ns) {
    s.achieved_fps = static_cast<double>(records.size() - 1) / (static_cast<double>(last->ingress_ns - first->ingress_ns) * 1e-9);
  }
  return s;
}

inline double RunStats::fraction_below(std::uint64_t threshold_ns) const {
  std::uint64_t below = 0, total = 0;
  for (std::size_t i = 0; i < histogram.size(); ++i) {
    total += histogram[i];
    if ((i + 1) * kHistogramBinNs <= threshold_ns) below += histogram[i];
  }
  return total ? static_cast<double>(below) / static_cast<double>(total) : 0.0;
}

inline void write_records_csv(std::ostream& os, const std::vector<LatencyRecord>& records) {
  os << "seq,ingress_ns,latency_ns,engine_latency_ns,deadline_met\n";
  for (const auto& r : records) {
    os << r.sequence << ',' << r.ingress_ns << ',' << r.latency_ns << ',' << r.engine_latency_ns << ','
       << (r.deadline_met ? 1 : 0) << '\n';
  }
}

inline std::vector<LatencyRecord> read_records_csv(std::istream& is) {
  std::vector<LatencyRecord> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line.rfind("seq", 0) == 0) continue;
    std::stringstream ss(line);
    LatencyRecord r;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    int met = 0;
    if (!(ss >> r.sequence >> c1 >> r.ingress_ns >> c2 >> r.latency_ns >> c3 >> r.engine_latency_ns >> c4 >> met) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw Error(ErrorKind::ParseError, "records row " + std::to_string(row) + " is malformed");
    }
    r.deadline_met = met != 0;
    out.push_back(r);
  }
  return out;
}

inline void write_stats(std::ostream& os, const RunStats& s) {
  os << "frames=" << s.frames << " drops=" << s.drops << " malformed=" << s.malformed << '\n'
     << "latency_ms mean=" << s.mean_ns * 1e-6 << " min=" << s.min_ns * 1e-6 << " p50=" << s.p50_ns * 1e-6
     << " p99=" << s.p99_ns * 1e-6 << " max=" << s.max_ns * 1e-6 << '\n'
     << "deadline_ms=" << s.deadline_ns * 1e-6 << " misses=" << s.deadline_misses << " miss_rate=" << s.miss_rate()
     << " p99_meets_deadline=" << (s.p99_ns <= s.deadline_ns ? "yes" : "no") << '\n'
     << "achieved_fps=" << s.achieved_fps << '\n';
}

// Two columns: bin start in ms, count.
inline void write_histogram(std::ostream& os, const RunStats& s) {
  os << "# latency_ms count\n";
  for (std::size_t i = 0; i < s.histogram.size(); ++i) {
    os << static_cast<double>(i * kHistogramBinNs) * 1e-6 << ' ' << s.histogram[i] << '\n';
  }
}

}  // namespace blm::node
