#pragma once

#include <random>
#include <string>
#include <vector>

#include "rectnet/tensor.hpp"

namespace rectnet {

/// LSTM layer without peepholes:
///   i = sig(W_iv v + W_ih h + b_i), f, o likewise, g = tanh(W_gv v + W_gh h + b_g)
///   c = f*c_prev + i*g,  h = o*tanh(c)
/// Gate weights are stacked row-wise in the order i, f, o, g.
template <typename T>
class Lstm {
 public:
  struct State {
    std::vector<T> h;
    std::vector<T> c;
  };

  /// Everything one step needs for backpropagation.
  struct Step {
    std::vector<T> input;
    std::vector<T> h_prev;
    std::vector<T> c_prev;
    std::vector<T> gates;  // activated i, f, o, g (4B)
    std::vector<T> c;
    std::vector<T> tanh_c;
    std::vector<T> h;
  };

  struct Cache {
    std::vector<Step> steps;
  };

  Lstm() = default;
  Lstm(std::string name, int inputs, int hidden);

  [[nodiscard]] State zero_state() const;

  /// One recurrence step. Records intermediates into `record` when non-null.
  [[nodiscard]] State step(const std::vector<T>& input, const State& prev, Step* record = nullptr) const;

  /// Runs the whole sequence from a zero state; returns h for every step.
  [[nodiscard]] std::vector<std::vector<T>> forward(const std::vector<std::vector<T>>& inputs, Cache& cache) const;

  /// Backpropagation through time. `dh[t]` is d(loss)/d(h_t) from above; the
  /// cross-step h and c paths are added internally. Returns d(loss)/d(input_t).
  std::vector<std::vector<T>> backward(const std::vector<std::vector<T>>& dh, const Cache& cache, bool input_grad = true);

  void init_uniform(std::mt19937_64& rng, double limit = 0.1);
  [[nodiscard]] int inputs() const { return inputs_; }
  [[nodiscard]] int hidden() const { return hidden_; }

  Parameter<T> w_input;   // (4B, Q)
  Parameter<T> w_hidden;  // (4B, B)
  Parameter<T> bias;      // (4B)

 private:
  int inputs_ = 0;
  int hidden_ = 0;
};

template <typename T>
[[nodiscard]] T sigmoid(T x) {
  return T{1} / (T{1} + std::exp(-x));
}

}  // namespace rectnet
