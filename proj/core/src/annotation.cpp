#include "rectnet/annotation.hpp"

#include <algorithm>
#include <numeric>

namespace rectnet {

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ScoreClass classify_score(double mean_score) {
  if (mean_score < 2.5) return ScoreClass::low;
  if (mean_score > 3.5) return ScoreClass::high;
  return ScoreClass::medium;
}

std::string_view subtlety_name(ScoreClass c) {
  switch (c) {
    case ScoreClass::low: return "difficult";
    case ScoreClass::medium: return "medium";
    case ScoreClass::high: return "easy";
  }
  return "?";
}

std::string_view malignancy_name(ScoreClass c) {
  switch (c) {
    case ScoreClass::low: return "low";
    case ScoreClass::medium: return "medium";
    case ScoreClass::high: return "high";
  }
  return "?";
}

std::optional<double> NoduleAnnotation::mean_subtlety() const { return mean_of(subtlety); }
std::optional<double> NoduleAnnotation::mean_malignancy() const { return mean_of(malignancy); }

std::optional<ScoreClass> NoduleAnnotation::subtlety_class() const {
  const auto m = mean_subtlety();
  if (!m) return std::nullopt;
  return classify_score(*m);
}

std::optional<ScoreClass> NoduleAnnotation::malignancy_class() const {
  const auto m = mean_malignancy();
  if (!m) return std::nullopt;
  return classify_score(*m);
}

bool NoduleAnnotation::contains(const Voxel& v) const { return std::binary_search(voxels.begin(), voxels.end(), v); }

void validate_annotation(const NoduleAnnotation& a, const Dims& dims) {
  if (a.voxels.empty()) throw InvalidArgument("nodule annotation has no voxels");
  if (!std::is_sorted(a.voxels.begin(), a.voxels.end()) ||
      std::adjacent_find(a.voxels.begin(), a.voxels.end()) != a.voxels.end()) {
    throw InvalidArgument("nodule voxels must be sorted and unique");
  }
  for (const auto& v : a.voxels) {
    if (v.x < 0 || v.y < 0 || v.z < 0 || static_cast<std::size_t>(v.x) >= dims.nx ||
        static_cast<std::size_t>(v.y) >= dims.ny || static_cast<std::size_t>(v.z) >= dims.nz) {
      throw InvalidArgument("nodule voxel outside volume bounds");
    }
  }
  if (a.agreement < 1 || a.agreement > 4) throw InvalidArgument("agreement level must be in 1..4");
  auto score_ok = [](const std::vector<double>& s) {
    return s.size() <= 4 && std::all_of(s.begin(), s.end(), [](double x) { return x >= 1.0 && x <= 5.0; });
  };
  if (!score_ok(a.subtlety) || !score_ok(a.malignancy)) {
    throw InvalidArgument("reader scores must be in [1, 5] with at most 4 readers");
  }
}

}  // namespace rectnet
