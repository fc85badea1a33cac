#include "rectnet/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace rectnet {

template <typename T>
SgdMomentum<T>::SgdMomentum(double learning_rate, double momentum, std::vector<int> halve_at_epochs)
    : lr_(learning_rate), momentum_(momentum), milestones_(std::move(halve_at_epochs)) {
  if (!(learning_rate > 0)) throw InvalidArgument("learning rate must be positive");
  if (momentum < 0 || momentum >= 1) throw InvalidArgument("momentum must be in [0, 1)");
}

template <typename T>
void SgdMomentum<T>::step(const std::vector<Parameter<T>*>& params) {
  if (velocity_.empty()) {
    for (const auto* p : params) velocity_.emplace_back(p->size(), T{});
  }
  if (velocity_.size() != params.size()) throw ShapeError("optimizer saw a different parameter list");
  const T mu = static_cast<T>(momentum_);
  const T lr = static_cast<T>(lr_);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& v = velocity_[k];
    if (v.size() != p.size() || p.grad.size() != p.size()) throw ShapeError("velocity shape mismatch for " + p.name);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = mu * v[i] - lr * p.grad[i];
      p.value[i] += v[i];
    }
  }
}

template <typename T>
void SgdMomentum<T>::on_epoch(int epoch) {
  lr_ *= std::pow(0.5, static_cast<double>(std::count(milestones_.begin(), milestones_.end(), epoch)));
}

std::vector<int> milestones_from_fractions(int epochs, const std::vector<double>& fractions) {
  std::vector<int> out;
  for (const double f : fractions) {
    const int e = static_cast<int>(std::floor(f * epochs));
    if (e > 0 && e < epochs) out.push_back(e);
  }
  return out;
}

template class SgdMomentum<float>;
template class SgdMomentum<double>;

}  // namespace rectnet
