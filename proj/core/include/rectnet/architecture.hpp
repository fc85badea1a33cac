#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace rectnet {

/// One token of the compact layer notation: I(channels), C(kernel, maps), P, FC(units).
struct LayerSpec {
  enum class Kind { input, conv, pool, fc };
  Kind kind = Kind::input;
  int a = 0;  // channels / kernel size / units
  int b = 0;  // feature maps for conv
  bool operator==(const LayerSpec&) const = default;
};

/// Parses e.g. "I(1), C(5,16), P, FC(412)". The first token must be I(.).
[[nodiscard]] std::vector<LayerSpec> parse_layer_notation(std::string_view text);
[[nodiscard]] std::string format_layer_notation(const std::vector<LayerSpec>& layers);

enum class ArchKind {
  rectnet,    // shared per-slice CNN -> stacked LSTM -> MLP -> softmax
  cnn,        // slices fused as input channels
  patch_cnn,  // the rectnet CNN submodule on the centre patch, with a temporary softmax
};

enum class Preset { desk, paper };

[[nodiscard]] std::string_view arch_name(ArchKind k);
[[nodiscard]] ArchKind parse_arch(std::string_view s);
[[nodiscard]] std::string_view preset_name(Preset p);
[[nodiscard]] Preset parse_preset(std::string_view s);

struct ArchitectureConfig {
  ArchKind kind = ArchKind::rectnet;
  /// Convolutional feature extractor, ending in one or more FC layers.
  std::string features;
  int patch_size = 50;
  int k = 3;
  /// Recurrent part (rectnet only).
  int lstm_layers = 2;
  int hidden = 612;
  std::vector<int> mlp;

  [[nodiscard]] int sequence_length() const { return 2 * k + 1; }
  bool operator==(const ArchitectureConfig&) const = default;
};

[[nodiscard]] ArchitectureConfig preset_config(ArchKind kind, Preset preset);

/// The pretraining network that matches a rectnet config's CNN submodule.
[[nodiscard]] ArchitectureConfig pretraining_config(const ArchitectureConfig& rectnet);

/// Throws InvalidArgument when the layer trace collapses or sizes disagree.
void validate(const ArchitectureConfig& config);

struct LayerRow {
  std::string name;
  std::string type;
  std::string output;
  std::size_t parameters = 0;
};

/// Layer-by-layer shape and parameter audit computed from the config alone.
[[nodiscard]] std::vector<LayerRow> describe(const ArchitectureConfig& config);
[[nodiscard]] std::size_t parameter_count(const ArchitectureConfig& config);

/// Width of the CNN submodule's output vector.
[[nodiscard]] int feature_width(const ArchitectureConfig& config);

[[nodiscard]] std::string to_json(const ArchitectureConfig& config);
[[nodiscard]] ArchitectureConfig architecture_from_json(std::string_view text);

}  // namespace rectnet
