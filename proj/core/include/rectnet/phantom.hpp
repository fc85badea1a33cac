#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rectnet/annotation.hpp"
#include "rectnet/volume.hpp"

namespace rectnet {

/// Coordinates in millimetres; voxel (i, j, k) sits at (i*sx, j*sy, k*sz).
using Point3 = std::array<double, 3>;

struct EllipsoidSpec {
  Point3 center{};
  Point3 radii{};
};

struct NoduleSpec {
  Point3 center{};
  Point3 radii{};
  double hu = 0.0;
  /// Reader scores attached to the generated annotation; empty means derive
  /// subtlety from contrast-to-noise and leave malignancy empty.
  std::vector<double> subtlety;
  std::vector<double> malignancy;
  int agreement = 4;
};

struct VesselSpec {
  std::vector<Point3> polyline;
  double radius = 1.0;
  double hu = 40.0;
};

struct PhantomSpec {
  Dims dims{};
  Spacing spacing{};
  /// Elliptic cylinder (infinite along z) holding the chest wall.
  std::array<double, 2> body_center{};
  std::array<double, 2> body_radii{};
  std::vector<EllipsoidSpec> lungs;
  std::vector<NoduleSpec> nodules;
  std::vector<VesselSpec> vessels;
  double air_hu = -1000.0;
  double lung_hu = -580.0;
  double body_hu = 40.0;
  double noise_sd = 25.0;
  std::uint64_t seed = 0;
};

struct Phantom {
  Volume volume;
  BinaryMask lung_truth;
  std::vector<NoduleAnnotation> nodules;
};

/// Throws InvalidArgument when the HU levels or geometry break the phantom invariants.
void validate_phantom_spec(const PhantomSpec& spec);

/// Renders body, lungs, vessels and nodules, then adds clamped Gaussian noise.
/// Nodules must sit inside a lung and must not overlap each other.
[[nodiscard]] Phantom generate_phantom(const PhantomSpec& spec);

/// Maps a nodule's contrast-to-noise ratio onto a 1-5 subtlety score
/// (low contrast = low score = difficult).
[[nodiscard]] double subtlety_from_contrast(double nodule_hu, double lung_hu, double noise_sd);

struct PhantomSuiteOptions {
  Dims dims{96, 96, 32};
  Spacing spacing{1.0, 1.0, 1.0};
  int min_nodules = 1;
  int max_nodules = 3;
  double min_nodule_radius = 3.0;
  double max_nodule_radius = 5.0;
  int vessels = 4;
  double noise_sd = 30.0;
};

/// Random but seed-deterministic phantom layout used for desk-scale experiments.
[[nodiscard]] PhantomSpec random_phantom_spec(std::uint64_t seed, const PhantomSuiteOptions& options = {});

}  // namespace rectnet
