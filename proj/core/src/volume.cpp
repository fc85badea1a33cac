#include "rectnet/volume.hpp"

#include <algorithm>

namespace rectnet {

namespace {

void check_hu(std::span<const std::int16_t> data) {
  const bool ok = std::all_of(data.begin(), data.end(), [](std::int16_t v) { return v >= kMinHu && v <= kMaxHu; });
  if (!ok) throw InvalidArgument("volume contains HU values outside [-1024, 3071]");
}

}  // namespace

Volume::Volume(Dims dims, Spacing spacing, std::int16_t fill) : Grid3(dims, spacing, fill) { check_hu(data()); }

Volume::Volume(Dims dims, Spacing spacing, std::vector<std::int16_t> data)
    : Grid3(dims, spacing, std::move(data)) {
  check_hu(Grid3::data());
}

double intersection_over_union(const BinaryMask& a, const BinaryMask& b) {
  if (a.dims() != b.dims()) throw ShapeError("IoU of masks with different dims");
  std::size_t inter = 0;
  std::size_t uni = 0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const bool x = da[i] != 0;
    const bool y = db[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::size_t count_set(const BinaryMask& mask) {
  const auto d = mask.data();
  return static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace rectnet
