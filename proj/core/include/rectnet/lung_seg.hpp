#pragma once

#include <cstddef>
#include <vector>

#include "rectnet/volume.hpp"

namespace rectnet {

struct SegmentationConfig {
  /// Voxels strictly below this level are candidate lung/air.
  int threshold_hu = -480;
  /// Disk radius, in pixels, of the per-slice dilation that adds the pleural band.
  int dilate_radius = 3;
};

/// Row-major 2D binary image, x fastest.
struct MaskSlice {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<std::uint8_t> pixels;

  [[nodiscard]] std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * nx + x]; }
  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * nx + x]; }
  bool operator==(const MaskSlice&) const = default;
};

[[nodiscard]] BinaryMask threshold_mask(const Volume& volume, int threshold_hu = -480);

/// Removes 4-connected foreground touching the slice border (outside air) and
/// fills 4-connected background holes enclosed by what remains.
[[nodiscard]] MaskSlice remove_background_fill(const MaskSlice& slice);

/// Per-slice dilation with the disk {dx^2 + dy^2 <= r^2}.
[[nodiscard]] MaskSlice dilate(const MaskSlice& slice, int radius_px);
[[nodiscard]] BinaryMask dilate(const BinaryMask& mask, int radius_px);

[[nodiscard]] MaskSlice extract_slice(const BinaryMask& mask, std::size_t z);
void store_slice(BinaryMask& mask, std::size_t z, const MaskSlice& slice);

/// Threshold, per-slice background removal and hole fill, then dilation.
[[nodiscard]] BinaryMask segment_lungs(const Volume& volume, const SegmentationConfig& config = {});

}  // namespace rectnet
