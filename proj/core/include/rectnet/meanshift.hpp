#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace rectnet {

using Point3d = std::array<double, 3>;

struct MeanShiftOptions {
  double bandwidth = 1.5;
  int max_iterations = 500;
  /// Convergence when the update moves less than tolerance * bandwidth.
  double tolerance = 1e-3;
};

struct Mode {
  Point3d position{};
  std::vector<std::size_t> members;  // indices into the input points, ascending
  double mean_probability = 0.0;
};

struct MeanShiftResult {
  std::vector<Mode> modes;
  /// Points that had not converged after max_iterations; they join the nearest mode.
  std::size_t unconverged = 0;
};

/// One Gaussian-kernel mean-shift update of `x` over `points`.
[[nodiscard]] Point3d mean_shift_step(const Point3d& x, std::span<const Point3d> points, double bandwidth);

/// Runs mean shift from every point, groups points by converged mode (modes
/// closer than h/2 are one mode) and averages their probabilities.
[[nodiscard]] MeanShiftResult mean_shift(std::span<const Point3d> points, std::span<const double> probabilities,
                                         const MeanShiftOptions& options = {});

/// Union of the members of every mode whose mean probability exceeds accept_p.
/// Empty when none does.
[[nodiscard]] std::vector<std::size_t> accepted_members(const std::vector<Mode>& modes, double accept_p);

}  // namespace rectnet
