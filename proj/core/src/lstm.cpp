#include "rectnet/lstm.hpp"

#include <cmath>

#include "kernels.hpp"

namespace rectnet {

using detail::axpy;
using detail::dot;

template <typename T>
Lstm<T>::Lstm(std::string name, int inputs, int hidden)
    : w_input(name + ".w_input", {4 * static_cast<std::size_t>(hidden), static_cast<std::size_t>(inputs)}),
      w_hidden(name + ".w_hidden", {4 * static_cast<std::size_t>(hidden), static_cast<std::size_t>(hidden)}),
      bias(name + ".bias", {4 * static_cast<std::size_t>(hidden)}),
      inputs_(inputs),
      hidden_(hidden) {
  if (inputs <= 0 || hidden <= 0) throw InvalidArgument("LSTM sizes must be positive");
}

template <typename T>
void Lstm<T>::init_uniform(std::mt19937_64& rng, double limit) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto* p : {&w_input, &w_hidden, &bias}) {
    for (auto& v : p->value) v = static_cast<T>(dist(rng));
  }
}

template <typename T>
typename Lstm<T>::State Lstm<T>::zero_state() const {
  const auto b = static_cast<std::size_t>(hidden_);
  return {std::vector<T>(b), std::vector<T>(b)};
}

template <typename T>
typename Lstm<T>::State Lstm<T>::step(const std::vector<T>& input, const State& prev, Step* record) const {
  const auto q = static_cast<std::size_t>(inputs_);
  const auto b = static_cast<std::size_t>(hidden_);
  if (input.size() != q) throw ShapeError(w_input.name + ": input length " + std::to_string(input.size()) + " != " + std::to_string(q));
  if (prev.h.size() != b || prev.c.size() != b) throw ShapeError(w_input.name + ": state length mismatch");

  std::vector<T> gates(4 * b);
  for (std::size_t r = 0; r < 4 * b; ++r) {
    gates[r] = bias.value[r] + dot(w_input.value.data() + r * q, input.data(), q) +
               dot(w_hidden.value.data() + r * b, prev.h.data(), b);
  }
  for (std::size_t r = 0; r < 3 * b; ++r) gates[r] = sigmoid(gates[r]);
  for (std::size_t r = 3 * b; r < 4 * b; ++r) gates[r] = std::tanh(gates[r]);

  State next{std::vector<T>(b), std::vector<T>(b)};
  std::vector<T> tanh_c(b);
  for (std::size_t u = 0; u < b; ++u) {
    const T i = gates[u];
    const T f = gates[b + u];
    const T o = gates[2 * b + u];
    const T g = gates[3 * b + u];
    next.c[u] = f * prev.c[u] + i * g;
    tanh_c[u] = std::tanh(next.c[u]);
    next.h[u] = o * tanh_c[u];
  }
  if (record) {
    record->input = input;
    record->h_prev = prev.h;
    record->c_prev = prev.c;
    record->gates = std::move(gates);
    record->c = next.c;
    record->tanh_c = std::move(tanh_c);
    record->h = next.h;
  }
  return next;
}

template <typename T>
std::vector<std::vector<T>> Lstm<T>::forward(const std::vector<std::vector<T>>& inputs, Cache& cache) const {
  cache.steps.assign(inputs.size(), Step{});
  std::vector<std::vector<T>> out;
  out.reserve(inputs.size());
  State state = zero_state();
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    state = step(inputs[t], state, &cache.steps[t]);
    out.push_back(state.h);
  }
  return out;
}

template <typename T>
std::vector<std::vector<T>> Lstm<T>::backward(const std::vector<std::vector<T>>& dh, const Cache& cache, bool input_grad) {
  if (cache.steps.empty()) throw Error(w_input.name + ": backward called before forward");
  if (dh.size() != cache.steps.size()) throw ShapeError(w_input.name + ": gradient sequence length mismatch");
  const auto q = static_cast<std::size_t>(inputs_);
  const auto b = static_cast<std::size_t>(hidden_);
  std::vector<std::vector<T>> dx(cache.steps.size());
  std::vector<T> dh_next(b);
  std::vector<T> dc_next(b);
  std::vector<T> da(4 * b);
  for (std::size_t t = cache.steps.size(); t-- > 0;) {
    const auto& s = cache.steps[t];
    if (dh[t].size() != b) throw ShapeError(w_input.name + ": gradient length mismatch");
    for (std::size_t u = 0; u < b; ++u) {
      const T i = s.gates[u];
      const T f = s.gates[b + u];
      const T o = s.gates[2 * b + u];
      const T g = s.gates[3 * b + u];
      const T dhu = dh[t][u] + dh_next[u];
      const T d_o = dhu * s.tanh_c[u];
      const T dc = dhu * o * (T{1} - s.tanh_c[u] * s.tanh_c[u]) + dc_next[u];
      const T d_i = dc * g;
      const T d_g = dc * i;
      const T d_f = dc * s.c_prev[u];
      dc_next[u] = dc * f;
      da[u] = d_i * i * (T{1} - i);
      da[b + u] = d_f * f * (T{1} - f);
      da[2 * b + u] = d_o * o * (T{1} - o);
      da[3 * b + u] = d_g * (T{1} - g * g);
    }
    std::fill(dh_next.begin(), dh_next.end(), T{});
    if (input_grad) dx[t].assign(q, T{});
    for (std::size_t r = 0; r < 4 * b; ++r) {
      const T a = da[r];
      bias.grad[r] += a;
      if (a == T{}) continue;
      axpy(a, s.input.data(), w_input.grad.data() + r * q, q);
      axpy(a, s.h_prev.data(), w_hidden.grad.data() + r * b, b);
      axpy(a, w_hidden.value.data() + r * b, dh_next.data(), b);
      if (input_grad) axpy(a, w_input.value.data() + r * q, dx[t].data(), q);
    }
  }
  return dx;
}

template class Lstm<float>;
template class Lstm<double>;

}  // namespace rectnet
