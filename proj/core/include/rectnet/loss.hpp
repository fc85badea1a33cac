#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rectnet {

/// Max-subtracted softmax.
template <typename T>
[[nodiscard]] std::vector<T> softmax(std::span<const T> logits);

/// Probability floor applied before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

struct NllResult {
  double loss = 0.0;  // mean over the batch
  /// Count of examples whose true-class probability fell below the floor.
  std::size_t clamped = 0;
};

/// Mean negative log-likelihood of the true class. `probabilities` holds one
/// row of class probabilities per example.
template <typename T>
[[nodiscard]] NllResult nll_loss(const std::vector<std::vector<T>>& probabilities, std::span<const int> labels);

/// d(mean NLL)/d(logits) for one example of a batch of `batch` examples.
template <typename T>
[[nodiscard]] std::vector<T> nll_softmax_grad(std::span<const T> probabilities, int label, std::size_t batch);

}  // namespace rectnet
