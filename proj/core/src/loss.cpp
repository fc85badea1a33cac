#include "rectnet/loss.hpp"

#include <algorithm>
#include <cmath>

#include "rectnet/error.hpp"

namespace rectnet {

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  const T mx = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T sum{};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T>
NllResult nll_loss(const std::vector<std::vector<T>>& probabilities, std::span<const int> labels) {
  if (probabilities.size() != labels.size()) throw ShapeError("prediction and label counts differ");
  if (probabilities.empty()) throw InvalidArgument("empty batch");
  NllResult r;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto& row = probabilities[n];
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= row.size()) throw InvalidArgument("label out of range");
    double p = static_cast<double>(row[static_cast<std::size_t>(labels[n])]);
    if (p < kProbabilityFloor) {
      p = kProbabilityFloor;
      ++r.clamped;
    }
    r.loss -= std::log(p);
  }
  r.loss /= static_cast<double>(labels.size());
  return r;
}

template <typename T>
std::vector<T> nll_softmax_grad(std::span<const T> probabilities, int label, std::size_t batch) {
  std::vector<T> g(probabilities.begin(), probabilities.end());
  g.at(static_cast<std::size_t>(label)) -= T{1};
  const T scale = T{1} / static_cast<T>(batch);
  for (auto& v : g) v *= scale;
  return g;
}

template std::vector<float> softmax(std::span<const float>);
template std::vector<double> softmax(std::span<const double>);
template NllResult nll_loss(const std::vector<std::vector<float>>&, std::span<const int>);
template NllResult nll_loss(const std::vector<std::vector<double>>&, std::span<const int>);
template std::vector<float> nll_softmax_grad(std::span<const float>, int, std::size_t);
template std::vector<double> nll_softmax_grad(std::span<const double>, int, std::size_t);

}  // namespace rectnet
