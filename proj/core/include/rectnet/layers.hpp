#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "rectnet/tensor.hpp"

namespace rectnet {

enum class Activation { identity, relu };

/// Valid (unpadded) 2D cross-correlation over (maps, height, width) inputs,
/// summed over input maps, plus one bias per output map.
template <typename T>
class Conv2d {
 public:
  struct Cache {
    Tensor<T> input;
    Tensor<T> output;
  };

  Conv2d() = default;
  Conv2d(std::string name, int in_maps, int out_maps, int kernel, Activation act = Activation::relu);

  [[nodiscard]] Tensor<T> forward(const Tensor<T>& x, Cache& cache) const;
  /// Accumulates weight/bias gradients; returns d(loss)/d(input) when asked.
  Tensor<T> backward(const Tensor<T>& dy, const Cache& cache, bool input_grad = true);

  void init_he_uniform(std::mt19937_64& rng);
  [[nodiscard]] int in_maps() const { return in_maps_; }
  [[nodiscard]] int out_maps() const { return out_maps_; }
  [[nodiscard]] int kernel() const { return kernel_; }
  [[nodiscard]] Activation activation() const { return act_; }

  Parameter<T> weight;  // (out, in, kernel, kernel)
  Parameter<T> bias;    // (out)

 private:
  int in_maps_ = 0;
  int out_maps_ = 0;
  int kernel_ = 0;
  Activation act_ = Activation::relu;
};

/// Non-overlapping a x a max pooling; trailing rows/columns that do not fill a
/// window are dropped.
template <typename T>
class MaxPool2d {
 public:
  struct Cache {
    Shape input_shape;
    std::vector<std::uint32_t> argmax;
  };

  explicit MaxPool2d(int window = 2) : window_(window) {}

  [[nodiscard]] Tensor<T> forward(const Tensor<T>& x, Cache& cache) const;
  [[nodiscard]] Tensor<T> backward(const Tensor<T>& dy, const Cache& cache) const;
  [[nodiscard]] int window() const { return window_; }

 private:
  int window_ = 2;
};

/// Fully connected layer; any input is flattened first. Weights are stored
/// (inputs x units) so unit m reads column m.
template <typename T>
class Dense {
 public:
  struct Cache {
    Tensor<T> input;
    Tensor<T> output;
  };

  Dense() = default;
  Dense(std::string name, int inputs, int units, Activation act = Activation::relu);

  [[nodiscard]] Tensor<T> forward(const Tensor<T>& x, Cache& cache) const;
  Tensor<T> backward(const Tensor<T>& dy, const Cache& cache, bool input_grad = true);

  void init_he_uniform(std::mt19937_64& rng);
  [[nodiscard]] int inputs() const { return inputs_; }
  [[nodiscard]] int units() const { return units_; }
  [[nodiscard]] Activation activation() const { return act_; }

  Parameter<T> weight;  // (inputs, units)
  Parameter<T> bias;    // (units)

 private:
  int inputs_ = 0;
  int units_ = 0;
  Activation act_ = Activation::relu;
};

/// Ordered stack of convolution, pooling and dense layers.
template <typename T>
class Sequential {
 public:
  using Layer = std::variant<Conv2d<T>, MaxPool2d<T>, Dense<T>>;
  using LayerCache = std::variant<typename Conv2d<T>::Cache, typename MaxPool2d<T>::Cache, typename Dense<T>::Cache>;
  using Cache = std::vector<LayerCache>;

  Sequential() = default;

  void add(Layer layer) { layers_.push_back(std::move(layer)); }
  [[nodiscard]] Tensor<T> forward(const Tensor<T>& x, Cache& cache) const;
  /// Backpropagates through every layer; the input gradient of the first layer
  /// is only computed when `input_grad` is set.
  Tensor<T> backward(const Tensor<T>& dy, const Cache& cache, bool input_grad = false);

  void init(std::mt19937_64& rng);
  [[nodiscard]] std::vector<Parameter<T>*> parameters();
  [[nodiscard]] std::vector<const Parameter<T>*> parameters() const;
  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }
  [[nodiscard]] bool empty() const { return layers_.empty(); }

 private:
  std::vector<Layer> layers_;
};

template <typename T>
[[nodiscard]] T relu(T v) {
  return v > T{} ? v : T{};
}

}  // namespace rectnet
