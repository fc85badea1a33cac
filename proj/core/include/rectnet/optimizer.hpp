#pragma once

#include <vector>

#include "rectnet/tensor.hpp"

namespace rectnet {

/// Minibatch SGD with classical momentum:
///   velocity = momentum * velocity - lr * grad;  param += velocity
/// The learning rate is halved at each milestone epoch.
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate = 0.05, double momentum = 0.7, std::vector<int> halve_at_epochs = {});

  /// Applies one update to every parameter from its accumulated gradient.
  void step(const std::vector<Parameter<T>*>& params);

  /// Call at the start of each epoch (0-based); halves the rate at milestones.
  void on_epoch(int epoch);

  [[nodiscard]] double learning_rate() const { return lr_; }
  [[nodiscard]] double momentum() const { return momentum_; }
  [[nodiscard]] const std::vector<std::vector<T>>& velocities() const { return velocity_; }

 private:
  double lr_;
  double momentum_;
  std::vector<int> milestones_;
  std::vector<std::vector<T>> velocity_;
};

/// Milestones at the given fractions of the run, e.g. {0.5, 0.75} of 20 epochs -> {10, 15}.
[[nodiscard]] std::vector<int> milestones_from_fractions(int epochs, const std::vector<double>& fractions);

}  // namespace rectnet
