#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rectnet/checkpoint.hpp"
#include "rectnet/networks.hpp"
#include "rectnet/sampler.hpp"

namespace rectnet {

/// Random-access labelled stacks. stack() must be safe to call concurrently.
class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  [[nodiscard]] virtual std::size_t size() const = 0;
  [[nodiscard]] virtual int label(std::size_t i) const = 0;
  [[nodiscard]] virtual PatchStack stack(std::size_t i) const = 0;
};

class InMemorySource final : public ExampleSource {
 public:
  explicit InMemorySource(std::vector<PatchStack> stacks) : stacks_(std::move(stacks)) {}
  [[nodiscard]] std::size_t size() const override { return stacks_.size(); }
  [[nodiscard]] int label(std::size_t i) const override { return stacks_.at(i).label; }
  [[nodiscard]] PatchStack stack(std::size_t i) const override { return stacks_.at(i); }

 private:
  std::vector<PatchStack> stacks_;
};

/// Extracts stacks lazily from the manifest's volumes.
class ManifestSource final : public ExampleSource {
 public:
  /// Keeps only entries whose volume id is in `volumes`.
  ManifestSource(const DatasetManifest& manifest, std::map<std::string, const Volume*> volumes);
  [[nodiscard]] std::size_t size() const override { return entries_.size(); }
  [[nodiscard]] int label(std::size_t i) const override { return entries_.at(i).label; }
  [[nodiscard]] PatchStack stack(std::size_t i) const override;

 private:
  int k_;
  int patch_size_;
  std::vector<ManifestEntry> entries_;
  std::map<std::string, const Volume*> volumes_;
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  /// Caps the minibatches per epoch; 0 means ceil(examples / batch_size).
  int max_batches_per_epoch = 0;
  double learning_rate = 0.05;
  double momentum = 0.7;
  /// Learning rate halves at these fractions of the run.
  std::vector<double> halve_at = {0.5, 0.75};
  /// Early stop after this many epochs without validation improvement; 0 disables.
  int patience = 5;
  /// Restore the parameters of the epoch with the lowest validation loss.
  bool restore_best = true;
  /// Keep CNN submodule weights fixed (rectnet only).
  bool freeze_cnn = false;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_loss = 0.0;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Class-balanced minibatch SGD with momentum on the mean NLL. Deterministic for
/// a fixed seed and thread count; gradients from worker threads are summed in
/// a fixed order.
TrainReport train_network(Network<float>& network, const ExampleSource& train, const ExampleSource* validation,
                          const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Mean NLL and accuracy at the 0.5 threshold.
[[nodiscard]] EvalResult evaluate(Network<float>& network, const ExampleSource& data, int threads = 1);

/// First phase: train the CNN submodule plus a temporary softmax on single
/// centre patches. The returned checkpoint holds only the `cnn.*` tensors.
[[nodiscard]] Checkpoint pretrain_cnn(const ExampleSource& train, const ExampleSource* validation,
                                      const ArchitectureConfig& rectnet, const TrainConfig& config,
                                      TrainReport* report = nullptr, const EpochCallback& on_epoch = {});

/// Second phase: attach LSTM, MLP and softmax above the (optionally pretrained)
/// CNN and optimise everything jointly, or with the CNN frozen when requested.
[[nodiscard]] std::unique_ptr<Network<float>> train_rectnet(const ExampleSource& train, const ExampleSource* validation,
                                                            const Checkpoint* pretrained,
                                                            const ArchitectureConfig& rectnet,
                                                            const TrainConfig& config, TrainReport* report = nullptr,
                                                            const EpochCallback& on_epoch = {});

/// Worker count from RECTNET_THREADS (default: hardware concurrency), capped at `requested` when positive.
[[nodiscard]] int resolve_threads(int requested = 0);

}  // namespace rectnet
