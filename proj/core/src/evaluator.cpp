#include "rectnet/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace rectnet {

std::size_t DetectionOutcome::hits() const {
  return static_cast<std::size_t>(std::count(nodule_hit.begin(), nodule_hit.end(), true));
}

std::size_t overlap(const CandidateNodule& candidate, const NoduleAnnotation& nodule, int grid_step) {
  const auto& b = candidate.box;
  std::size_t count = 0;
  for (const auto& v : nodule.voxels) {
    if (v.x < b.min.x - grid_step || v.x > b.max.x + grid_step || v.y < b.min.y - grid_step ||
        v.y > b.max.y + grid_step || v.z < b.min.z - 1 || v.z > b.max.z + 1) {
      continue;
    }
    for (const auto& m : candidate.members) {
      if (std::abs(v.x - m.voxel.x) <= grid_step && std::abs(v.y - m.voxel.y) <= grid_step &&
          std::abs(v.z - m.voxel.z) <= 1) {
        ++count;
        break;
      }
    }
  }
  return count;
}

DetectionOutcome match_candidates(const std::vector<CandidateNodule>& candidates,
                                  const std::vector<NoduleAnnotation>& nodules, int grid_step,
                                  const std::vector<bool>& scored) {
  if (!scored.empty() && scored.size() != nodules.size()) throw InvalidArgument("scored flags must match nodules");
  DetectionOutcome out;
  out.nodule_hit.assign(nodules.size(), false);
  for (const auto& c : candidates) {
    int best = -1;
    std::size_t best_overlap = 0;
    for (std::size_t n = 0; n < nodules.size(); ++n) {
      const auto o = overlap(c, nodules[n], grid_step);
      if (o == 0) continue;
      if (o > best_overlap || (o == best_overlap && nodules[n].id < nodules[static_cast<std::size_t>(best)].id)) {
        best = static_cast<int>(n);
        best_overlap = o;
      }
    }
    out.candidate_nodule.push_back(best);
    if (best < 0) {
      ++out.false_positives;
    } else if (!scored.empty() && !scored[static_cast<std::size_t>(best)]) {
      ++out.ignored;
    } else {
      out.nodule_hit[static_cast<std::size_t>(best)] = true;
    }
  }
  return out;
}

namespace {

std::vector<bool> scored_flags(const std::vector<NoduleAnnotation>& nodules, const EvalOptions& options) {
  std::vector<bool> flags;
  for (const auto& n : nodules) flags.push_back(n.agreement >= options.min_agreement);
  return flags;
}

struct VolumeResult {
  DetectionOutcome outcome;
  std::vector<bool> scored;
  std::size_t candidates = 0;
};

std::vector<VolumeResult> score_all(const std::vector<ScoredVolume>& volumes, double accept_p,
                                    const EvalOptions& options) {
  if (volumes.empty()) throw InvalidArgument("evaluation needs at least one volume");
  std::vector<VolumeResult> out;
  for (const auto& v : volumes) {
    if (!v.detection || !v.nodules) throw InvalidArgument("scored volume is missing its detection or truth");
    VolumeResult r;
    r.scored = scored_flags(*v.nodules, options);
    const auto cands = v.detection->candidates(accept_p);
    r.candidates = cands.size();
    r.outcome = match_candidates(cands, *v.nodules, v.detection->step, r.scored);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

FrocPoint operating_point(const std::vector<ScoredVolume>& volumes, double accept_p, const EvalOptions& options) {
  FrocPoint p;
  p.accept_p = accept_p;
  for (const auto& r : score_all(volumes, accept_p, options)) {
    p.nodules += static_cast<std::size_t>(std::count(r.scored.begin(), r.scored.end(), true));
    p.hits += r.outcome.hits();
    p.candidates += r.candidates;
    p.false_positives += r.outcome.false_positives;
  }
  if (p.nodules == 0) throw InvalidArgument("no annotated nodules to evaluate against");
  p.sensitivity = static_cast<double>(p.hits) / static_cast<double>(p.nodules);
  p.fps_per_scan = static_cast<double>(p.false_positives) / static_cast<double>(volumes.size());
  return p;
}

std::vector<FrocPoint> froc(const std::vector<ScoredVolume>& volumes, const std::vector<double>& accept_grid,
                            const EvalOptions& options) {
  auto grid = accept_grid;
  std::sort(grid.begin(), grid.end(), std::greater<>());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<FrocPoint> curve;
  for (const double p : grid) curve.push_back(operating_point(volumes, p, options));
  return curve;
}

std::vector<double> sweep_values(double start, double stop, double step) {
  if (!(step > 0.0) || stop < start) throw InvalidArgument("sweep needs start <= stop and a positive step");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

double sensitivity_at(const std::vector<FrocPoint>& curve, double max_fps) {
  double best = 0.0;
  for (const auto& p : curve) {
    if (p.fps_per_scan <= max_fps) best = std::max(best, p.sensitivity);
  }
  return best;
}

std::string_view stratum_name(Stratum s) {
  switch (s) {
    case Stratum::subtlety: return "subtlety";
    case Stratum::malignancy: return "malignancy";
    case Stratum::agreement: return "agreement";
  }
  return "?";
}

Stratum parse_stratum(std::string_view name) {
  for (const auto s : {Stratum::subtlety, Stratum::malignancy, Stratum::agreement}) {
    if (stratum_name(s) == name) return s;
  }
  throw InvalidArgument("unknown stratum: " + std::string(name));
}

std::vector<StratumRow> stratified_sensitivity(const std::vector<ScoredVolume>& volumes, double accept_p,
                                               Stratum stratum, const EvalOptions& options) {
  std::vector<std::string> labels;
  if (stratum == Stratum::agreement) {
    labels = {"1", "2", "3", "4"};
  } else {
    for (const auto c : {ScoreClass::low, ScoreClass::medium, ScoreClass::high}) {
      labels.emplace_back(stratum == Stratum::subtlety ? subtlety_name(c) : malignancy_name(c));
    }
  }
  std::map<std::string, StratumRow> rows;
  for (const auto& l : labels) rows[l] = StratumRow{std::string(stratum_name(stratum)), l, 0, 0, std::nullopt};

  const auto results = score_all(volumes, accept_p, options);
  for (std::size_t v = 0; v < volumes.size(); ++v) {
    const auto& nodules = *volumes[v].nodules;
    for (std::size_t n = 0; n < nodules.size(); ++n) {
      if (!results[v].scored[n]) continue;
      std::optional<std::string> label;
      if (stratum == Stratum::agreement) {
        label = std::to_string(nodules[n].agreement);
      } else if (stratum == Stratum::subtlety) {
        if (const auto c = nodules[n].subtlety_class()) label = std::string(subtlety_name(*c));
      } else if (const auto c = nodules[n].malignancy_class()) {
        label = std::string(malignancy_name(*c));
      }
      if (!label || !rows.count(*label)) continue;
      auto& row = rows[*label];
      ++row.nodules;
      if (results[v].outcome.nodule_hit[n]) ++row.hits;
    }
  }
  std::vector<StratumRow> out;
  for (const auto& l : labels) {
    auto row = rows[l];
    if (row.nodules > 0) row.sensitivity = static_cast<double>(row.hits) / static_cast<double>(row.nodules);
    out.push_back(row);
  }
  return out;
}

void write_froc_csv(const std::vector<FrocPoint>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "accept_p,fps_per_scan,sensitivity,hits,nodules,candidates\n";
  char line[160];
  for (const auto& p : curve) {
    std::snprintf(line, sizeof line, "%.4f,%.4f,%.4f,%zu,%zu,%zu\n", p.accept_p, p.fps_per_scan, p.sensitivity,
                  p.hits, p.nodules, p.candidates);
    out << line;
  }
}

void write_strata_csv(const std::vector<StratumRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "stratum,class,nodules,hits,sensitivity\n";
  for (const auto& r : rows) {
    out << r.stratum << ',' << r.label << ',' << r.nodules << ',' << r.hits << ',';
    if (r.sensitivity) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", *r.sensitivity);
      out << buf;
    } else {
      out << "N/A";
    }
    out << '\n';
  }
}

}  // namespace rectnet
