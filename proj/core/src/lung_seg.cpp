#include "rectnet/lung_seg.hpp"

#include <algorithm>
#include <cstdint>

namespace rectnet {

namespace {

/// Marks every pixel with value `target` that is 4-connected to the border.
std::vector<std::uint8_t> border_connected(const MaskSlice& s, std::uint8_t target) {
  std::vector<std::uint8_t> seen(s.pixels.size(), 0);
  std::vector<std::size_t> stack;
  auto push = [&](std::size_t x, std::size_t y) {
    const auto i = y * s.nx + x;
    if (!seen[i] && s.pixels[i] == target) {
      seen[i] = 1;
      stack.push_back(i);
    }
  };
  for (std::size_t x = 0; x < s.nx; ++x) {
    push(x, 0);
    push(x, s.ny - 1);
  }
  for (std::size_t y = 0; y < s.ny; ++y) {
    push(0, y);
    push(s.nx - 1, y);
  }
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    const auto x = i % s.nx;
    const auto y = i / s.nx;
    if (x > 0) push(x - 1, y);
    if (x + 1 < s.nx) push(x + 1, y);
    if (y > 0) push(x, y - 1);
    if (y + 1 < s.ny) push(x, y + 1);
  }
  return seen;
}

}  // namespace

BinaryMask threshold_mask(const Volume& volume, int threshold_hu) {
  BinaryMask mask(volume.dims(), volume.spacing(), 0);
  const auto src = volume.data();
  auto dst = mask.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] < threshold_hu ? 1 : 0;
  return mask;
}

MaskSlice remove_background_fill(const MaskSlice& slice) {
  if (slice.nx == 0 || slice.ny == 0) return slice;
  MaskSlice out = slice;
  const auto outside_air = border_connected(slice, 1);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = (slice.pixels[i] && !outside_air[i]) ? 1 : 0;
  }
  const auto open_background = border_connected(out, 0);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    if (!out.pixels[i] && !open_background[i]) out.pixels[i] = 1;
  }
  return out;
}

MaskSlice dilate(const MaskSlice& slice, int radius_px) {
  if (radius_px < 0) throw InvalidArgument("dilation radius must be non-negative");
  if (radius_px == 0) return slice;
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -radius_px; dy <= radius_px; ++dy) {
    for (int dx = -radius_px; dx <= radius_px; ++dx) {
      if (dx * dx + dy * dy <= radius_px * radius_px) offsets.emplace_back(dx, dy);
    }
  }
  MaskSlice out{slice.nx, slice.ny, std::vector<std::uint8_t>(slice.pixels.size(), 0)};
  const auto nx = static_cast<int>(slice.nx);
  const auto ny = static_cast<int>(slice.ny);
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      if (!slice.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y))) continue;
      for (const auto& [dx, dy] : offsets) {
        const int xx = x + dx;
        const int yy = y + dy;
        if (xx >= 0 && yy >= 0 && xx < nx && yy < ny) out.at(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy)) = 1;
      }
    }
  }
  return out;
}

MaskSlice extract_slice(const BinaryMask& mask, std::size_t z) {
  const auto s = mask.slice(z);
  return {mask.dims().nx, mask.dims().ny, std::vector<std::uint8_t>(s.begin(), s.end())};
}

void store_slice(BinaryMask& mask, std::size_t z, const MaskSlice& slice) {
  if (slice.nx != mask.dims().nx || slice.ny != mask.dims().ny) throw ShapeError("slice does not match mask");
  std::copy(slice.pixels.begin(), slice.pixels.end(), mask.slice(z).begin());
}

BinaryMask dilate(const BinaryMask& mask, int radius_px) {
  BinaryMask out = mask;
  for (std::size_t z = 0; z < mask.dims().nz; ++z) store_slice(out, z, dilate(extract_slice(mask, z), radius_px));
  return out;
}

BinaryMask segment_lungs(const Volume& volume, const SegmentationConfig& config) {
  auto mask = threshold_mask(volume, config.threshold_hu);
  for (std::size_t z = 0; z < mask.dims().nz; ++z) {
    const auto filled = remove_background_fill(extract_slice(mask, z));
    store_slice(mask, z, dilate(filled, config.dilate_radius));
  }
  return mask;
}

}  // namespace rectnet
