#pragma once

#include <compare>
#include <filesystem>
#include <string>
#include <vector>

#include "rectnet/lung_seg.hpp"
#include "rectnet/meanshift.hpp"
#include "rectnet/networks.hpp"
#include "rectnet/volume.hpp"

namespace rectnet {

/// Position on the sampling grid: column gx, row gy, slice j.
struct GridPoint {
  int gx = 0;
  int gy = 0;
  int j = 0;
  auto operator<=>(const GridPoint&) const = default;
};

struct MapEntry {
  GridPoint grid{};
  Voxel voxel{};
  double probability = 0.0;
  bool operator==(const MapEntry&) const = default;
};

struct ProbabilityMap {
  std::string volume_id;
  Dims dims{};
  Spacing spacing{};
  int step = 1;
  std::vector<MapEntry> entries;
};

struct InferenceOptions {
  double grid_multiplier = 4.0;
  /// Cut size before resampling to the model's patch size; 0 means the patch size.
  int source_size = 0;
  int threads = 1;
};

/// Classifies the stack around every grid point inside the lung mask.
[[nodiscard]] ProbabilityMap infer_map(const Network<float>& model, const Volume& volume, const BinaryMask& lung_mask,
                                       const InferenceOptions& options = {}, std::string volume_id = {});

/// Drops entries with probability below `cutoff`; a probability equal to the cutoff is kept.
[[nodiscard]] ProbabilityMap threshold_map(const ProbabilityMap& map, double cutoff = 0.5);

/// Connected components under 26-connectivity on grid coordinates. Each cluster
/// lists entry indices in ascending order; clusters are ordered by their first index.
[[nodiscard]] std::vector<std::vector<std::size_t>> grow_clusters(const ProbabilityMap& map);

struct BoundingBox {
  Voxel min{};
  Voxel max{};
};

struct CandidateNodule {
  std::vector<MapEntry> members;
  Point3d centroid_mm{};
  double mean_probability = 0.0;
  BoundingBox box{};

  [[nodiscard]] std::size_t voxel_count() const { return members.size(); }
};

/// Builds a candidate from cluster members (centroid in mm from the volume origin).
[[nodiscard]] CandidateNodule make_candidate(std::vector<MapEntry> members, const Spacing& spacing);

/// Mean-shift modes of one cluster, computed in grid-index space.
struct ClusterModes {
  std::vector<MapEntry> members;
  std::vector<Mode> modes;
  std::size_t unconverged = 0;
};

[[nodiscard]] ClusterModes cluster_modes(const ProbabilityMap& map, const std::vector<std::size_t>& cluster,
                                         double bandwidth);

/// Candidate from the modes of one cluster whose mean exceeds accept_p, if any.
[[nodiscard]] std::vector<CandidateNodule> accept_modes(const ClusterModes& cluster, double accept_p,
                                                        const Spacing& spacing);

/// Mean shift over one cluster followed by the mode-average filter.
[[nodiscard]] std::vector<CandidateNodule> meanshift_filter(const ProbabilityMap& map,
                                                            const std::vector<std::size_t>& cluster, double bandwidth,
                                                            double accept_p);

struct DetectorConfig {
  SegmentationConfig segmentation{};
  InferenceOptions inference{};
  double cutoff = 0.5;
  double bandwidth = 1.5;
  double accept_p = 0.75;
};

/// Everything after inference, kept so candidate lists can be recomputed for any accept_p.
struct Detection {
  std::string volume_id;
  Dims dims{};
  Spacing spacing{};
  int step = 1;
  std::size_t sampled = 0;
  std::size_t retained = 0;
  std::vector<ClusterModes> clusters;

  [[nodiscard]] std::vector<CandidateNodule> candidates(double accept_p) const;
};

/// Mean-shift stage on an already thresholded map.
[[nodiscard]] Detection detect_from_map(const ProbabilityMap& thresholded, std::size_t sampled, double bandwidth);

/// segment_lungs -> infer_map -> threshold_map -> grow_clusters -> mean shift.
[[nodiscard]] Detection detect(const Network<float>& model, const Volume& volume, const DetectorConfig& config,
                               std::string volume_id = {});

/// JSON document with the candidates at accept_p and the per-cluster modes.
[[nodiscard]] std::string detection_to_json(const Detection& detection, double accept_p);
[[nodiscard]] Detection detection_from_json(const std::string& text);
void write_detection(const Detection& detection, double accept_p, const std::filesystem::path& path);
[[nodiscard]] Detection read_detection(const std::filesystem::path& path);

/// Per-slice 8-bit PGM images of the probability map (grid points drawn as step x step blocks).
void write_probability_images(const ProbabilityMap& map, const std::filesystem::path& directory);

}  // namespace rectnet
