#pragma once

#include <random>

#include "rectnet/architecture.hpp"
#include "rectnet/sampler.hpp"

namespace tiny {

inline rectnet::ArchitectureConfig rectnet_config() {
  rectnet::ArchitectureConfig c;
  c.kind = rectnet::ArchKind::rectnet;
  c.features = "I(1), C(3,3), P, FC(6)";
  c.patch_size = 8;
  c.k = 1;
  c.lstm_layers = 2;
  c.hidden = 3;
  c.mlp = {5};
  return c;
}

inline rectnet::ArchitectureConfig cnn_config() {
  rectnet::ArchitectureConfig c;
  c.kind = rectnet::ArchKind::cnn;
  c.features = "I(3), C(3,3), P, FC(6)";
  c.patch_size = 8;
  c.k = 1;
  c.lstm_layers = 0;
  c.hidden = 0;
  return c;
}

/// Positives hold a bright blob in the middle slice, negatives only noise.
inline std::vector<rectnet::PatchStack> blob_stacks(std::size_t count, std::uint64_t seed, int k = 1, int m = 8) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.3f, 0.08f);
  std::vector<rectnet::PatchStack> out;
  for (std::size_t n = 0; n < count; ++n) {
    rectnet::PatchStack s;
    s.k = k;
    s.size = m;
    s.source_size = m;
    s.label = static_cast<std::uint8_t>(n % 2);
    s.values.resize(static_cast<std::size_t>((2 * k + 1) * m * m));
    for (auto& v : s.values) v = noise(rng);
    if (s.label) {
      const int cx = m / 2 - 1 + static_cast<int>(rng() % 2), cy = m / 2 - 1 + static_cast<int>(rng() % 2);
      for (int d = 0; d < 2 * k + 1; ++d)
        for (int y = 0; y < m; ++y)
          for (int x = 0; x < m; ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= (d == k ? 4 : 1))
              s.values[static_cast<std::size_t>((d * m + y) * m + x)] = 0.9f;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace tiny
