#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pgait/gps.hpp"

namespace pgait::testing {

inline ParsingFrame random_frame(std::mt19937_64& rng, int h, int w, int num_labels = kNumLabels) {
  std::uniform_int_distribution<int> label(0, num_labels - 1);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (auto& x : v) x = static_cast<std::uint8_t>(label(rng));
  return ParsingFrame(h, w, std::move(v), num_labels);
}

/// Frames made of a few solid blocks, closer to real masks than noise.
inline ParsingFrame blocky_frame(std::mt19937_64& rng, int h, int w) {
  ParsingFrame f(h, w);
  std::uniform_int_distribution<int> label(1, kNumParts);
  std::uniform_int_distribution<int> ys(0, h - 1), xs(0, w - 1);
  for (int b = 0; b < 6; ++b) {
    int y0 = ys(rng), y1 = ys(rng), x0 = xs(rng), x1 = xs(rng);
    if (y0 > y1) std::swap(y0, y1);
    if (x0 > x1) std::swap(x0, x1);
    const auto l = static_cast<std::uint8_t>(label(rng));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) f.set(y, x, l);
    }
  }
  return f;
}

inline GaitParsingSequence random_sequence(std::mt19937_64& rng, int n, int h, int w, bool blocky = true) {
  GaitParsingSequence s;
  for (int i = 0; i < n; ++i) s.frames.push_back(blocky ? blocky_frame(rng, h, w) : random_frame(rng, h, w));
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pgait_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace pgait::testing
