#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rectnet/architecture.hpp"
#include "rectnet/networks.hpp"

namespace rectnet {

// Binary layout, all integers little-endian uint32:
//   "RCTNCKPT" | version | len + architecture JSON |
//   tensor count | per tensor: len + name, rank, dims... |
//   float32 payload of every tensor in table order.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
  bool operator==(const NamedTensor&) const = default;
};

struct Checkpoint {
  ArchitectureConfig config;
  std::vector<NamedTensor> tensors;
  bool operator==(const Checkpoint&) const = default;
};

[[nodiscard]] std::string serialize_checkpoint(const Checkpoint& ckpt);
[[nodiscard]] Checkpoint deserialize_checkpoint(const std::string& bytes);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
[[nodiscard]] Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename T>
[[nodiscard]] Checkpoint to_checkpoint(const Network<T>& network);

/// Copies tensors whose names start with `prefix` into the network; every such
/// network parameter must be present with a matching shape. Returns the count.
template <typename T>
std::size_t load_parameters(Network<T>& network, const Checkpoint& ckpt, std::string_view prefix = "");

template <typename T>
[[nodiscard]] std::unique_ptr<Network<T>> network_from_checkpoint(const Checkpoint& ckpt);

}  // namespace rectnet
