#include "rectnet/meanshift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rectnet/error.hpp"

namespace rectnet {

namespace {

double distance2(const Point3d& a, const Point3d& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

Point3d mean_shift_step(const Point3d& x, std::span<const Point3d> points, double bandwidth) {
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  Point3d num{};
  double den = 0.0;
  for (const auto& p : points) {
    const double w = std::exp(-distance2(x, p) * inv);
    for (int i = 0; i < 3; ++i) num[i] += w * p[i];
    den += w;
  }
  // Far from every point all weights underflow; stay put.
  if (!(den > 0.0)) return x;
  for (auto& v : num) v /= den;
  return num;
}

MeanShiftResult mean_shift(std::span<const Point3d> points, std::span<const double> probabilities,
                           const MeanShiftOptions& options) {
  if (points.size() != probabilities.size()) throw InvalidArgument("mean shift needs one probability per point");
  if (!(options.bandwidth > 0.0)) throw InvalidArgument("mean shift bandwidth must be positive");
  if (options.max_iterations <= 0) throw InvalidArgument("mean shift needs at least one iteration");

  const double h = options.bandwidth;
  const double stop2 = (options.tolerance * h) * (options.tolerance * h);
  const double merge2 = (h / 2.0) * (h / 2.0);

  MeanShiftResult result;
  std::vector<Point3d> ends(points.size());
  std::vector<bool> converged(points.size(), false);
  for (std::size_t i = 0; i < points.size(); ++i) {
    Point3d x = points[i];
    for (int it = 0; it < options.max_iterations; ++it) {
      const Point3d next = mean_shift_step(x, points, h);
      const double moved = distance2(next, x);
      x = next;
      if (moved < stop2) {
        converged[i] = true;
        break;
      }
    }
    ends[i] = x;
  }

  std::vector<std::size_t> owner(points.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!converged[i]) continue;
    std::size_t best = result.modes.size();
    double best_d = merge2;
    for (std::size_t m = 0; m < result.modes.size(); ++m) {
      const double d = distance2(ends[i], result.modes[m].position);
      if (d < best_d) {
        best = m;
        best_d = d;
      }
    }
    if (best == result.modes.size()) result.modes.push_back(Mode{ends[i], {}, 0.0});
    owner[i] = best;
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (converged[i]) continue;
    ++result.unconverged;
    if (result.modes.empty()) {
      result.modes.push_back(Mode{ends[i], {}, 0.0});
      owner[i] = 0;
      continue;
    }
    std::size_t best = 0;
    for (std::size_t m = 1; m < result.modes.size(); ++m) {
      if (distance2(ends[i], result.modes[m].position) < distance2(ends[i], result.modes[best].position)) best = m;
    }
    owner[i] = best;
  }

  for (std::size_t i = 0; i < points.size(); ++i) result.modes[owner[i]].members.push_back(i);
  for (auto& m : result.modes) {
    double s = 0.0;
    for (const auto i : m.members) s += probabilities[i];
    m.mean_probability = m.members.empty() ? 0.0 : s / static_cast<double>(m.members.size());
  }
  std::erase_if(result.modes, [](const Mode& m) { return m.members.empty(); });
  return result;
}

std::vector<std::size_t> accepted_members(const std::vector<Mode>& modes, double accept_p) {
  std::vector<std::size_t> out;
  for (const auto& m : modes) {
    if (m.mean_probability > accept_p) out.insert(out.end(), m.members.begin(), m.members.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rectnet
