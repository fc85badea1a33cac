#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rectnet/architecture.hpp"
#include "rectnet/layers.hpp"
#include "rectnet/lstm.hpp"
#include "rectnet/sampler.hpp"

namespace rectnet {

/// Read-only view of a patch stack, slices ordered bottom to top.
struct StackInput {
  int depth = 0;
  int size = 0;
  std::span<const float> values;
};

[[nodiscard]] StackInput as_input(const PatchStack& stack);

/// Class probabilities; index 1 is "nodule".
template <typename T>
using Probabilities = std::array<T, 2>;

/// A classifier over patch stacks. forward() caches what backward() needs, so an
/// instance is single-threaded; use clone() for per-thread copies.
template <typename T>
class Network {
 public:
  explicit Network(ArchitectureConfig config) : config_(std::move(config)) {}
  virtual ~Network() = default;
  Network(const Network&) = default;
  Network& operator=(const Network&) = default;

  [[nodiscard]] const ArchitectureConfig& config() const { return config_; }

  virtual Probabilities<T> forward(const StackInput& input) = 0;
  /// Accumulates parameter gradients given d(loss)/d(logits) of the last forward().
  virtual void backward(std::span<const T> dlogits) = 0;
  [[nodiscard]] virtual std::vector<Parameter<T>*> parameters() = 0;
  [[nodiscard]] virtual std::unique_ptr<Network> clone() const = 0;
  virtual void init(std::uint64_t seed) = 0;

  [[nodiscard]] std::vector<const Parameter<T>*> parameters() const;
  [[nodiscard]] const std::array<T, 2>& logits() const { return logits_; }
  void zero_grad();

 protected:
  std::array<T, 2> logits_{};
  bool has_forward_ = false;

 private:
  ArchitectureConfig config_;
};

/// Builds the convolution/pooling/FC stack described by `notation`, all ReLU.
template <typename T>
[[nodiscard]] Sequential<T> build_features(const std::string& notation, int patch_size, const std::string& prefix);

/// Per-slice shared CNN, stacked LSTM over the slice sequence, concatenation of
/// every top-layer output, MLP, two-way softmax.
template <typename T>
class RectNet final : public Network<T> {
 public:
  explicit RectNet(const ArchitectureConfig& config);

  Probabilities<T> forward(const StackInput& input) override;
  void backward(std::span<const T> dlogits) override;
  [[nodiscard]] std::vector<Parameter<T>*> parameters() override;
  using Network<T>::parameters;
  [[nodiscard]] std::unique_ptr<Network<T>> clone() const override { return std::make_unique<RectNet>(*this); }
  void init(std::uint64_t seed) override;

  /// Runs the shared CNN on one patch (size x size).
  [[nodiscard]] std::vector<T> embed(std::span<const float> patch) const;
  /// Inference from precomputed per-slice embeddings; same result as forward().
  [[nodiscard]] Probabilities<T> classify_embeddings(const std::vector<std::vector<T>>& sequence) const;

  /// When set, backward() stops at the LSTM input and CNN weights get no gradient.
  void set_freeze_cnn(bool freeze) { freeze_cnn_ = freeze; }
  [[nodiscard]] bool freeze_cnn() const { return freeze_cnn_; }

  Sequential<T> cnn;
  std::vector<Lstm<T>> lstm;
  Sequential<T> mlp;
  Dense<T> head;

 private:
  bool freeze_cnn_ = false;
  std::vector<typename Sequential<T>::Cache> cnn_cache_;
  std::vector<typename Lstm<T>::Cache> lstm_cache_;
  typename Sequential<T>::Cache mlp_cache_;
  typename Dense<T>::Cache head_cache_;
};

/// Multi-channel baseline: the 2k+1 patches are the input channels of the first convolution.
template <typename T>
class CnnBaseline final : public Network<T> {
 public:
  explicit CnnBaseline(const ArchitectureConfig& config);

  Probabilities<T> forward(const StackInput& input) override;
  void backward(std::span<const T> dlogits) override;
  [[nodiscard]] std::vector<Parameter<T>*> parameters() override;
  using Network<T>::parameters;
  [[nodiscard]] std::unique_ptr<Network<T>> clone() const override { return std::make_unique<CnnBaseline>(*this); }
  void init(std::uint64_t seed) override;

  Sequential<T> features;
  Dense<T> head;

 private:
  typename Sequential<T>::Cache features_cache_;
  typename Dense<T>::Cache head_cache_;
};

/// The rectnet CNN submodule plus a temporary softmax, fed the centre patch only.
template <typename T>
class PatchCnn final : public Network<T> {
 public:
  explicit PatchCnn(const ArchitectureConfig& config);

  Probabilities<T> forward(const StackInput& input) override;
  void backward(std::span<const T> dlogits) override;
  [[nodiscard]] std::vector<Parameter<T>*> parameters() override;
  using Network<T>::parameters;
  [[nodiscard]] std::unique_ptr<Network<T>> clone() const override { return std::make_unique<PatchCnn>(*this); }
  void init(std::uint64_t seed) override;

  Sequential<T> cnn;
  Dense<T> head;

 private:
  typename Sequential<T>::Cache cnn_cache_;
  typename Dense<T>::Cache head_cache_;
};

/// Constructs and initialises the network for `config`.
template <typename T>
[[nodiscard]] std::unique_ptr<Network<T>> make_network(const ArchitectureConfig& config, std::uint64_t seed);

/// Sum of all weight and bias element counts.
template <typename T>
[[nodiscard]] std::size_t count_parameters(const Network<T>& network);

/// Copies every parameter whose name starts with `prefix` from `src` to `dst`.
/// Returns the number of tensors copied; throws on shape mismatch.
template <typename T, typename U>
std::size_t copy_parameters(const Network<T>& src, Network<U>& dst, std::string_view prefix = "");

/// Convenience: nodule probability for a stack.
template <typename T>
[[nodiscard]] double nodule_probability(Network<T>& network, const PatchStack& stack) {
  return static_cast<double>(network.forward(as_input(stack))[1]);
}

}  // namespace rectnet
