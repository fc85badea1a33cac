#pragma once

// Deliberately naive reference implementations used to cross-check the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "rectnet/annotation.hpp"
#include "rectnet/detector.hpp"
#include "rectnet/volume.hpp"

namespace oracle {

using rectnet::Voxel;

/// Connected components by union-find over all O(n^2) pairs.
inline std::set<std::vector<std::size_t>> union_find_clusters(const std::vector<rectnet::GridPoint>& pts) {
  std::vector<std::size_t> parent(pts.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (std::abs(pts[i].gx - pts[j].gx) <= 1 && std::abs(pts[i].gy - pts[j].gy) <= 1 &&
          std::abs(pts[i].j - pts[j].j) <= 1) {
        parent[find(i)] = find(j);
      }
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pts.size(); ++i) groups[find(i)].push_back(i);
  std::set<std::vector<std::size_t>> out;
  for (auto& [root, g] : groups) out.insert(g);
  return out;
}

/// Pixel offsets of a disk, by enumerating the bounding square.
inline std::vector<std::pair<int, int>> disk_offsets(int r) {
  std::vector<std::pair<int, int>> out;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy <= r * r) out.emplace_back(dx, dy);
    }
  }
  return out;
}

inline double iou(const rectnet::BinaryMask& a, const rectnet::BinaryMask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const bool x = a.data()[i] != 0, y = b.data()[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Matching by explicit voxel sets: every member grown into its full dilation box.
struct Match {
  std::vector<bool> hit;
  std::vector<int> assigned;
  std::size_t fps = 0;
};

inline Match brute_match(const std::vector<rectnet::CandidateNodule>& cands,
                         const std::vector<rectnet::NoduleAnnotation>& nodules, int step) {
  Match m;
  m.hit.assign(nodules.size(), false);
  for (const auto& c : cands) {
    std::set<Voxel> grown;
    for (const auto& e : c.members) {
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -step; dy <= step; ++dy)
          for (int dx = -step; dx <= step; ++dx) grown.insert({e.voxel.x + dx, e.voxel.y + dy, e.voxel.z + dz});
    }
    int best = -1;
    std::size_t best_n = 0;
    for (std::size_t n = 0; n < nodules.size(); ++n) {
      std::size_t count = 0;
      for (const auto& v : nodules[n].voxels) count += grown.count(v);
      const bool better = count > best_n || (count > 0 && count == best_n && best >= 0 &&
                                             nodules[n].id < nodules[static_cast<std::size_t>(best)].id);
      if (better) {
        best = static_cast<int>(n);
        best_n = count;
      }
    }
    m.assigned.push_back(best);
    if (best < 0) {
      ++m.fps;
    } else {
      m.hit[static_cast<std::size_t>(best)] = true;
    }
  }
  return m;
}

/// LSTM step written gate by gate from the cell equations, with separate matrices.
struct LstmOracle {
  // w_x[gate][unit][input], w_h[gate][unit][unit], b[gate][unit]; gates i, f, o, g.
  std::vector<std::vector<std::vector<double>>> w_x, w_h;
  std::vector<std::vector<double>> b;

  void step(const std::vector<double>& v, std::vector<double>& h, std::vector<double>& c) const {
    const std::size_t units = h.size();
    std::vector<std::vector<double>> pre(4, std::vector<double>(units));
    for (int gate = 0; gate < 4; ++gate) {
      for (std::size_t u = 0; u < units; ++u) {
        double s = b[gate][u];
        for (std::size_t q = 0; q < v.size(); ++q) s += w_x[gate][u][q] * v[q];
        for (std::size_t r = 0; r < units; ++r) s += w_h[gate][u][r] * h[r];
        pre[gate][u] = s;
      }
    }
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    for (std::size_t u = 0; u < units; ++u) {
      const double i = sig(pre[0][u]), f = sig(pre[1][u]), o = sig(pre[2][u]), g = std::tanh(pre[3][u]);
      c[u] = f * c[u] + i * g;
      h[u] = o * std::tanh(c[u]);
    }
  }
};

/// Arg-max of the Gaussian kernel density on a fine lattice around `near`.
inline std::array<double, 3> density_peak(const std::vector<std::array<double, 3>>& pts, double h,
                                          const std::array<double, 3>& near, double radius, double res) {
  std::array<double, 3> best = near;
  double best_d = -1.0;
  for (double x = near[0] - radius; x <= near[0] + radius; x += res)
    for (double y = near[1] - radius; y <= near[1] + radius; y += res)
      for (double z = near[2] - radius; z <= near[2] + radius; z += res) {
        double d = 0.0;
        for (const auto& p : pts) {
          const double r2 = (x - p[0]) * (x - p[0]) + (y - p[1]) * (y - p[1]) + (z - p[2]) * (z - p[2]);
          d += std::exp(-r2 / (2 * h * h));
        }
        if (d > best_d) {
          best_d = d;
          best = {x, y, z};
        }
      }
  return best;
}

inline constexpr double kFdEpsilon = 1e-5;

/// Largest relative difference between an analytic gradient and central differences.
inline double gradient_error(std::vector<double>& values, const std::vector<double>& analytic,
                             const std::function<double()>& loss) {
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + kFdEpsilon;
    const double up = loss();
    values[i] = keep - kFdEpsilon;
    const double down = loss();
    values[i] = keep;
    const double numeric = (up - down) / (2 * kFdEpsilon);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  return worst;
}

}  // namespace oracle
