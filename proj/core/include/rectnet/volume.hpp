#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rectnet/error.hpp"

namespace rectnet {

inline constexpr int kMinHu = -1024;
inline constexpr int kMaxHu = 3071;

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  [[nodiscard]] std::size_t count() const { return nx * ny * nz; }
  [[nodiscard]] std::size_t slice_count() const { return nx * ny; }
  [[nodiscard]] bool empty() const { return nx == 0 || ny == 0 || nz == 0; }
  bool operator==(const Dims&) const = default;
};

/// Millimetres per voxel along x, y and z.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;
  bool operator==(const Spacing&) const = default;
};

struct Voxel {
  int x = 0;
  int y = 0;
  int z = 0;
  auto operator<=>(const Voxel&) const = default;
};

/// Dense 3D grid, x fastest, then y, then z.
template <typename T>
class Grid3 {
 public:
  Grid3() = default;
  Grid3(Dims dims, Spacing spacing, T fill = T{}) : dims_(dims), spacing_(spacing), data_(dims.count(), fill) {
    validate();
  }
  Grid3(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate();
    if (data_.size() != dims_.count()) throw ShapeError("grid data length does not match dims");
  }

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] const Spacing& spacing() const { return spacing_; }
  [[nodiscard]] std::span<const T> data() const { return data_; }
  [[nodiscard]] std::span<T> data() { return data_; }

  [[nodiscard]] std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return (z * dims_.ny + y) * dims_.nx + x;
  }
  [[nodiscard]] std::size_t index(const Voxel& v) const {
    return index(static_cast<std::size_t>(v.x), static_cast<std::size_t>(v.y), static_cast<std::size_t>(v.z));
  }
  [[nodiscard]] Voxel voxel_at(std::size_t idx) const {
    const auto x = idx % dims_.nx;
    const auto y = (idx / dims_.nx) % dims_.ny;
    const auto z = idx / dims_.slice_count();
    return {static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)};
  }
  [[nodiscard]] bool contains(const Voxel& v) const {
    return v.x >= 0 && v.y >= 0 && v.z >= 0 && static_cast<std::size_t>(v.x) < dims_.nx &&
           static_cast<std::size_t>(v.y) < dims_.ny && static_cast<std::size_t>(v.z) < dims_.nz;
  }

  [[nodiscard]] T at(std::size_t x, std::size_t y, std::size_t z) const { return data_[index(x, y, z)]; }
  [[nodiscard]] T at(const Voxel& v) const { return data_[index(v)]; }
  T& at(std::size_t x, std::size_t y, std::size_t z) { return data_[index(x, y, z)]; }
  T& at(const Voxel& v) { return data_[index(v)]; }

  [[nodiscard]] std::span<const T> slice(std::size_t z) const {
    return std::span<const T>(data_).subspan(z * dims_.slice_count(), dims_.slice_count());
  }
  [[nodiscard]] std::span<T> slice(std::size_t z) {
    return std::span<T>(data_).subspan(z * dims_.slice_count(), dims_.slice_count());
  }

  bool operator==(const Grid3&) const = default;

 private:
  void validate() const {
    if (dims_.empty()) throw InvalidArgument("grid dims must be positive");
    if (!(spacing_.sx > 0.0) || !(spacing_.sy > 0.0) || !(spacing_.sz > 0.0)) {
      throw InvalidArgument("grid spacing must be positive");
    }
  }

  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> data_;
};

/// CT volume of Hounsfield-unit samples in [-1024, 3071].
class Volume : public Grid3<std::int16_t> {
 public:
  Volume() = default;
  Volume(Dims dims, Spacing spacing, std::int16_t fill = -1000);
  Volume(Dims dims, Spacing spacing, std::vector<std::int16_t> data);
};

/// One byte per voxel, values 0 or 1.
using BinaryMask = Grid3<std::uint8_t>;

[[nodiscard]] inline bool same_geometry(const Dims& a, const Dims& b) { return a == b; }

/// Fraction of overlap |a & b| / |a | b|; 1 for two empty masks.
[[nodiscard]] double intersection_over_union(const BinaryMask& a, const BinaryMask& b);

/// Number of set voxels.
[[nodiscard]] std::size_t count_set(const BinaryMask& mask);

}  // namespace rectnet
