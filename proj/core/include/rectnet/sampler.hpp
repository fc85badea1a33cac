#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rectnet/annotation.hpp"
#include "rectnet/volume.hpp"

namespace rectnet {

struct GridSpec {
  /// Grid step in units of the in-plane pixel length; rounded to whole pixels.
  double step_multiplier = 25.0;
  int phase_x = 0;
  int phase_y = 0;

  [[nodiscard]] int step() const;
};

/// Every grid point on every slice that falls inside the mask.
[[nodiscard]] std::vector<Voxel> sample_grid(const BinaryMask& lung_mask, const GridSpec& grid);

/// Seeded uniform subset of each nodule's voxels, round(rate * |nodule|) per nodule.
[[nodiscard]] std::vector<Voxel> sample_nodule_voxels(const std::vector<NoduleAnnotation>& annotations, double rate,
                                                      std::uint64_t seed);

/// Normalisation window: [-1000, 400] HU mapped linearly onto [0, 1].
inline constexpr int kWindowLowHu = -1000;
inline constexpr int kWindowHighHu = 400;
[[nodiscard]] float normalize_hu(int hu);

enum class Augmentation { none, flip_h, flip_v, rot90, rot180, rot270 };
inline constexpr std::array<Augmentation, 5> kAllAugmentations{Augmentation::flip_h, Augmentation::flip_v,
                                                               Augmentation::rot90, Augmentation::rot180,
                                                               Augmentation::rot270};
[[nodiscard]] std::string_view augmentation_name(Augmentation a);
[[nodiscard]] Augmentation parse_augmentation(std::string_view name);

/// 2k+1 co-registered size x size patches around one voxel, bottom slice first.
struct PatchStack {
  Voxel center{};
  int k = 3;
  int size = 50;
  /// Side length the patches were cut at before resampling to `size`.
  int source_size = 50;
  std::uint8_t label = 0;
  std::vector<float> values;  // (2k+1) * size * size

  [[nodiscard]] int depth() const { return 2 * k + 1; }
  [[nodiscard]] std::span<const float> patch(int s) const {
    const auto n = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
    return std::span<const float>(values).subspan(static_cast<std::size_t>(s) * n, n);
  }
  bool operator==(const PatchStack&) const = default;
};

/// Cuts patches of `source_size` around `center` on slices z-k..z+k and resamples
/// them bilinearly to `size` when the two differ. Pixels outside the slice read as
/// air (-1000 HU); slices outside the volume repeat the nearest valid slice.
[[nodiscard]] PatchStack extract_stack(const Volume& volume, const Voxel& center, int k, int size, int source_size);

/// Applies the same flip/rotation to every patch of the stack.
[[nodiscard]] PatchStack augment(const PatchStack& stack, Augmentation op);

struct DatasetConfig {
  int k = 3;
  int patch_size = 50;
  /// Second, larger cut that is scaled down to `patch_size`; 0 disables.
  int large_patch_size = 80;
  double grid_multiplier = 25.0;
  double positive_rate = 0.5;
  std::vector<Augmentation> augmentations{kAllAugmentations.begin(), kAllAugmentations.end()};
  std::uint64_t seed = 0;
};

struct ManifestEntry {
  std::string volume_id;
  Voxel center{};
  std::uint8_t label = 0;
  Augmentation augmentation = Augmentation::none;
  int source_size = 50;
  auto operator<=>(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  int k = 3;
  int patch_size = 50;
  std::vector<ManifestEntry> entries;

  [[nodiscard]] std::size_t positives() const;
  [[nodiscard]] std::size_t negatives() const;
  bool operator==(const DatasetManifest&) const = default;
};

/// Inputs for one scan: the volume, its lung mask and ground truth.
struct LabelledScan {
  std::string id;
  const Volume* volume = nullptr;
  const BinaryMask* lung_mask = nullptr;
  const std::vector<NoduleAnnotation>* nodules = nullptr;
};

/// Grid negatives plus densely sampled, augmented positives at every configured
/// scale. Entries are sorted by volume id, then center.
[[nodiscard]] DatasetManifest build_dataset(const std::vector<LabelledScan>& scans, const DatasetConfig& config);

/// JSON-lines: a header line followed by one entry per line.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
[[nodiscard]] DatasetManifest read_manifest(const std::filesystem::path& path);

/// Turns a manifest entry back into the (augmented, resampled) stack.
[[nodiscard]] PatchStack materialize(const ManifestEntry& entry, const Volume& volume, int k, int patch_size);

}  // namespace rectnet
