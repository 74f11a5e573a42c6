#pragma once

#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "blm/error.hpp"
#include "blm/nn/model.hpp"

namespace blm::workbench {

// One frame per row, 260 comma-separated values, no header.
inline void write_frames_csv(std::ostream& os, std::span<const nn::Frame> frames) {
  os.precision(17);
  for (const auto& f : frames) {
    const auto v = f.values();
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << '\n';
  }
}

inline std::vector<nn::Frame> read_frames_csv(std::istream& is) {
  std::vector<nn::Frame> frames;
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> values;
    values.reserve(nn::kFrameSize);
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw Error(ErrorKind::ParseError, "frames row " + std::to_string(row) + ": bad value");
      values.push_back(v);
    }
    try {
      frames.emplace_back(std::move(values), static_cast<std::uint32_t>(frames.size()));
    } catch (const Error& e) {
      throw Error(e.kind(), "frames row " + std::to_string(row) + ": " + e.what());
    }
  }
  return frames;
}

}  // namespace blm::workbench
