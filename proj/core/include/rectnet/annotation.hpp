#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "rectnet/volume.hpp"

namespace rectnet {

/// Three-way binning of a mean 1-5 reader score. The medium band is closed:
/// 2.5 and 3.5 both land in `medium`.
enum class ScoreClass { low, medium, high };

[[nodiscard]] ScoreClass classify_score(double mean_score);

/// Subtlety uses difficult/medium/easy for low/medium/high.
[[nodiscard]] std::string_view subtlety_name(ScoreClass c);
[[nodiscard]] std::string_view malignancy_name(ScoreClass c);

struct NoduleAnnotation {
  int id = 0;
  std::vector<Voxel> voxels;  // sorted, unique
  std::vector<double> subtlety;
  std::vector<double> malignancy;
  int agreement = 1;

  [[nodiscard]] std::optional<double> mean_subtlety() const;
  [[nodiscard]] std::optional<double> mean_malignancy() const;
  [[nodiscard]] std::optional<ScoreClass> subtlety_class() const;
  [[nodiscard]] std::optional<ScoreClass> malignancy_class() const;
  [[nodiscard]] bool contains(const Voxel& v) const;

  bool operator==(const NoduleAnnotation&) const = default;
};

/// Checks the annotation invariants against volume bounds; throws InvalidArgument.
void validate_annotation(const NoduleAnnotation& a, const Dims& dims);

}  // namespace rectnet
