#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rectnet/annotation.hpp"
#include "rectnet/detector.hpp"

namespace rectnet {

/// Scoring of one volume's candidates. A candidate is a true positive when its
/// member voxels, each grown by one grid step in-plane and one slice, overlap a
/// nodule; it is assigned to the nodule with the largest overlap (ties go to the
/// smaller id).
struct DetectionOutcome {
  std::vector<bool> nodule_hit;       // parallel to the annotations
  std::vector<int> candidate_nodule;  // annotation index, or -1 for a false positive
  std::size_t false_positives = 0;
  /// Candidates assigned to nodules excluded from scoring; neither hit nor FP.
  std::size_t ignored = 0;

  [[nodiscard]] std::size_t hits() const;
};

/// Number of nodule voxels covered by the dilated candidate members.
[[nodiscard]] std::size_t overlap(const CandidateNodule& candidate, const NoduleAnnotation& nodule, int grid_step);

/// `scored[i] == false` excludes nodule i from hits and ignores candidates assigned to it.
[[nodiscard]] DetectionOutcome match_candidates(const std::vector<CandidateNodule>& candidates,
                                                const std::vector<NoduleAnnotation>& nodules, int grid_step,
                                                const std::vector<bool>& scored = {});

/// Detections and truth for one test volume.
struct ScoredVolume {
  const Detection* detection = nullptr;
  const std::vector<NoduleAnnotation>* nodules = nullptr;
};

struct FrocPoint {
  double accept_p = 0.0;
  double fps_per_scan = 0.0;
  double sensitivity = 0.0;
  std::size_t hits = 0;
  std::size_t nodules = 0;
  std::size_t candidates = 0;
  std::size_t false_positives = 0;
};

struct EvalOptions {
  /// Only nodules with at least this many readers count; 0 scores every nodule.
  int min_agreement = 0;
};

[[nodiscard]] FrocPoint operating_point(const std::vector<ScoredVolume>& volumes, double accept_p,
                                        const EvalOptions& options = {});

/// One point per accept_p, ordered by accept_p descending (fewest candidates first).
[[nodiscard]] std::vector<FrocPoint> froc(const std::vector<ScoredVolume>& volumes,
                                          const std::vector<double>& accept_grid, const EvalOptions& options = {});

/// Inclusive sweep start, start+step, ... up to stop.
[[nodiscard]] std::vector<double> sweep_values(double start, double stop, double step);

/// Best sensitivity among points with fps_per_scan <= max_fps (0 when none qualifies).
[[nodiscard]] double sensitivity_at(const std::vector<FrocPoint>& curve, double max_fps);

enum class Stratum { subtlety, malignancy, agreement };
[[nodiscard]] std::string_view stratum_name(Stratum s);
[[nodiscard]] Stratum parse_stratum(std::string_view name);

struct StratumRow {
  std::string stratum;
  std::string label;
  std::size_t nodules = 0;
  std::size_t hits = 0;
  /// Empty when the class has no nodules.
  std::optional<double> sensitivity;
};

/// Per-class sensitivity at one operating point.
[[nodiscard]] std::vector<StratumRow> stratified_sensitivity(const std::vector<ScoredVolume>& volumes,
                                                             double accept_p, Stratum stratum,
                                                             const EvalOptions& options = {});

void write_froc_csv(const std::vector<FrocPoint>& curve, const std::filesystem::path& path);
void write_strata_csv(const std::vector<StratumRow>& rows, const std::filesystem::path& path);

}  // namespace rectnet
