#include "rectnet/detector.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "rectnet/sampler.hpp"

namespace rectnet {

using nlohmann::json;

namespace {

template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  const auto parts = static_cast<std::size_t>(std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(n, 1)))));
  if (parts == 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 1; w < parts; ++w) pool.emplace_back([&, w] { fn(w, n * w / parts, n * (w + 1) / parts); });
  fn(std::size_t{0}, std::size_t{0}, n / parts);
}

}  // namespace

ProbabilityMap infer_map(const Network<float>& model, const Volume& volume, const BinaryMask& lung_mask,
                         const InferenceOptions& options, std::string volume_id) {
  if (lung_mask.dims() != volume.dims()) throw ShapeError("lung mask and volume dimensions differ");
  const auto& cfg = model.config();
  const int m = cfg.patch_size;
  const int k = cfg.k;
  const int source = options.source_size > 0 ? options.source_size : m;

  ProbabilityMap map;
  map.volume_id = std::move(volume_id);
  map.dims = volume.dims();
  map.spacing = volume.spacing();
  GridSpec grid{options.grid_multiplier};
  map.step = grid.step();
  const auto points = sample_grid(lung_mask, grid);
  map.entries.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& v = points[i];
    map.entries[i] = {GridPoint{v.x / map.step, v.y / map.step, v.z}, v, 0.0};
  }
  if (points.empty()) return map;

  if (const auto* rect = dynamic_cast<const RectNet<float>*>(&model)) {
    // Neighbouring stacks in a column share slices, so embed each slice once.
    std::map<std::pair<int, int>, std::vector<std::size_t>> columns;
    for (std::size_t i = 0; i < points.size(); ++i) columns[{points[i].x, points[i].y}].push_back(i);
    std::vector<const std::vector<std::size_t>*> work;
    for (const auto& [xy, ids] : columns) work.push_back(&ids);
    const int nz = static_cast<int>(volume.dims().nz);
    parallel_chunks(work.size(), options.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t c = begin; c < end; ++c) {
        std::map<int, std::vector<float>> cache;
        for (const auto i : *work[c]) {
          const auto& v = points[i];
          std::vector<std::vector<float>> seq;
          for (int dz = -k; dz <= k; ++dz) {
            const int z = std::clamp(v.z + dz, 0, nz - 1);
            auto it = cache.find(z);
            if (it == cache.end()) {
              const auto patch = extract_stack(volume, Voxel{v.x, v.y, z}, 0, m, source);
              it = cache.emplace(z, rect->embed(patch.patch(0))).first;
            }
            seq.push_back(it->second);
          }
          map.entries[i].probability = static_cast<double>(rect->classify_embeddings(seq)[1]);
        }
      }
    });
    return map;
  }

  parallel_chunks(points.size(), options.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    auto net = model.clone();
    for (std::size_t i = begin; i < end; ++i) {
      const auto stack = extract_stack(volume, points[i], k, m, source);
      map.entries[i].probability = static_cast<double>(net->forward(as_input(stack))[1]);
    }
  });
  return map;
}

ProbabilityMap threshold_map(const ProbabilityMap& map, double cutoff) {
  ProbabilityMap out = map;
  out.entries.clear();
  for (const auto& e : map.entries) {
    if (!(e.probability < cutoff)) out.entries.push_back(e);
  }
  return out;
}

std::vector<std::vector<std::size_t>> grow_clusters(const ProbabilityMap& map) {
  std::map<GridPoint, std::size_t> lookup;
  for (std::size_t i = 0; i < map.entries.size(); ++i) lookup.emplace(map.entries[i].grid, i);

  std::vector<bool> taken(map.entries.size(), false);
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t seed = 0; seed < map.entries.size(); ++seed) {
    if (taken[seed]) continue;
    std::vector<std::size_t> cluster{seed};
    taken[seed] = true;
    for (std::size_t head = 0; head < cluster.size(); ++head) {
      const auto g = map.entries[cluster[head]].grid;
      for (int dj = -1; dj <= 1; ++dj) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0 && dj == 0) continue;
            const auto it = lookup.find(GridPoint{g.gx + dx, g.gy + dy, g.j + dj});
            if (it == lookup.end() || taken[it->second]) continue;
            taken[it->second] = true;
            cluster.push_back(it->second);
          }
        }
      }
    }
    std::sort(cluster.begin(), cluster.end());
    clusters.push_back(std::move(cluster));
  }
  return clusters;
}

CandidateNodule make_candidate(std::vector<MapEntry> members, const Spacing& spacing) {
  if (members.empty()) throw InvalidArgument("candidate needs at least one member");
  CandidateNodule c;
  c.box = {members.front().voxel, members.front().voxel};
  double p = 0.0;
  for (const auto& e : members) {
    c.centroid_mm[0] += e.voxel.x * spacing.sx;
    c.centroid_mm[1] += e.voxel.y * spacing.sy;
    c.centroid_mm[2] += e.voxel.z * spacing.sz;
    p += e.probability;
    c.box.min = {std::min(c.box.min.x, e.voxel.x), std::min(c.box.min.y, e.voxel.y), std::min(c.box.min.z, e.voxel.z)};
    c.box.max = {std::max(c.box.max.x, e.voxel.x), std::max(c.box.max.y, e.voxel.y), std::max(c.box.max.z, e.voxel.z)};
  }
  const auto n = static_cast<double>(members.size());
  for (auto& v : c.centroid_mm) v /= n;
  c.mean_probability = p / n;
  c.members = std::move(members);
  return c;
}

ClusterModes cluster_modes(const ProbabilityMap& map, const std::vector<std::size_t>& cluster, double bandwidth) {
  if (cluster.empty()) throw InvalidArgument("cluster is empty");
  ClusterModes out;
  std::vector<Point3d> pts;
  std::vector<double> probs;
  for (const auto i : cluster) {
    const auto& e = map.entries.at(i);
    out.members.push_back(e);
    pts.push_back({static_cast<double>(e.grid.gx), static_cast<double>(e.grid.gy), static_cast<double>(e.grid.j)});
    probs.push_back(e.probability);
  }
  auto r = mean_shift(pts, probs, MeanShiftOptions{bandwidth});
  out.modes = std::move(r.modes);
  out.unconverged = r.unconverged;
  return out;
}

std::vector<CandidateNodule> accept_modes(const ClusterModes& cluster, double accept_p, const Spacing& spacing) {
  const auto ids = accepted_members(cluster.modes, accept_p);
  if (ids.empty()) return {};
  std::vector<MapEntry> members;
  for (const auto i : ids) members.push_back(cluster.members.at(i));
  return {make_candidate(std::move(members), spacing)};
}

std::vector<CandidateNodule> meanshift_filter(const ProbabilityMap& map, const std::vector<std::size_t>& cluster,
                                              double bandwidth, double accept_p) {
  return accept_modes(cluster_modes(map, cluster, bandwidth), accept_p, map.spacing);
}

std::vector<CandidateNodule> Detection::candidates(double accept_p) const {
  std::vector<CandidateNodule> out;
  for (const auto& c : clusters) {
    for (auto& cand : accept_modes(c, accept_p, spacing)) out.push_back(std::move(cand));
  }
  return out;
}

Detection detect_from_map(const ProbabilityMap& thresholded, std::size_t sampled, double bandwidth) {
  Detection d;
  d.volume_id = thresholded.volume_id;
  d.dims = thresholded.dims;
  d.spacing = thresholded.spacing;
  d.step = thresholded.step;
  d.sampled = sampled;
  d.retained = thresholded.entries.size();
  for (const auto& cluster : grow_clusters(thresholded)) d.clusters.push_back(cluster_modes(thresholded, cluster, bandwidth));
  return d;
}

Detection detect(const Network<float>& model, const Volume& volume, const DetectorConfig& config,
                 std::string volume_id) {
  const auto mask = segment_lungs(volume, config.segmentation);
  const auto map = infer_map(model, volume, mask, config.inference, std::move(volume_id));
  return detect_from_map(threshold_map(map, config.cutoff), map.entries.size(), config.bandwidth);
}

namespace {

json entry_json(const MapEntry& e) {
  return json::array({e.grid.gx, e.grid.gy, e.grid.j, e.voxel.x, e.voxel.y, e.voxel.z, e.probability});
}

MapEntry entry_from(const json& j) {
  if (!j.is_array() || j.size() != 7) throw FormatError("map entry must have 7 fields");
  return {GridPoint{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()},
          Voxel{j[3].get<int>(), j[4].get<int>(), j[5].get<int>()}, j[6].get<double>()};
}

}  // namespace

std::string detection_to_json(const Detection& d, double accept_p) {
  json doc;
  doc["volume_id"] = d.volume_id;
  doc["dims"] = {d.dims.nx, d.dims.ny, d.dims.nz};
  doc["spacing"] = {d.spacing.sx, d.spacing.sy, d.spacing.sz};
  doc["grid_step"] = d.step;
  doc["sampled"] = d.sampled;
  doc["retained"] = d.retained;
  doc["accept_p"] = accept_p;
  json cands = json::array();
  for (const auto& c : d.candidates(accept_p)) {
    cands.push_back({{"centroid_mm", c.centroid_mm},
                     {"voxel_count", c.voxel_count()},
                     {"mean_probability", c.mean_probability},
                     {"bbox", {c.box.min.x, c.box.min.y, c.box.min.z, c.box.max.x, c.box.max.y, c.box.max.z}}});
  }
  doc["candidates"] = cands;
  json clusters = json::array();
  for (const auto& c : d.clusters) {
    json members = json::array();
    for (const auto& e : c.members) members.push_back(entry_json(e));
    json modes = json::array();
    for (const auto& m : c.modes) {
      modes.push_back({{"position", m.position}, {"members", m.members}, {"mean_probability", m.mean_probability}});
    }
    clusters.push_back({{"members", members}, {"modes", modes}, {"unconverged", c.unconverged}});
  }
  doc["clusters"] = clusters;
  return doc.dump(1) + "\n";
}

Detection detection_from_json(const std::string& text) {
  try {
    const auto doc = json::parse(text);
    Detection d;
    d.volume_id = doc.at("volume_id").get<std::string>();
    const auto& dims = doc.at("dims");
    d.dims = {dims.at(0).get<std::size_t>(), dims.at(1).get<std::size_t>(), dims.at(2).get<std::size_t>()};
    const auto& sp = doc.at("spacing");
    d.spacing = {sp.at(0).get<double>(), sp.at(1).get<double>(), sp.at(2).get<double>()};
    d.step = doc.at("grid_step").get<int>();
    d.sampled = doc.at("sampled").get<std::size_t>();
    d.retained = doc.at("retained").get<std::size_t>();
    for (const auto& c : doc.at("clusters")) {
      ClusterModes cm;
      for (const auto& e : c.at("members")) cm.members.push_back(entry_from(e));
      for (const auto& m : c.at("modes")) {
        Mode mode;
        mode.position = m.at("position").get<Point3d>();
        mode.members = m.at("members").get<std::vector<std::size_t>>();
        mode.mean_probability = m.at("mean_probability").get<double>();
        for (const auto i : mode.members) {
          if (i >= cm.members.size()) throw FormatError("mode member index out of range");
        }
        cm.modes.push_back(std::move(mode));
      }
      cm.unconverged = c.at("unconverged").get<std::size_t>();
      d.clusters.push_back(std::move(cm));
    }
    return d;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed detection file: ") + e.what());
  }
}

void write_detection(const Detection& detection, double accept_p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << detection_to_json(detection, accept_p);
  if (!out) throw IoError("failed writing " + path.string());
}

Detection read_detection(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return detection_from_json(ss.str());
}

void write_probability_images(const ProbabilityMap& map, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  const auto nx = map.dims.nx;
  const auto ny = map.dims.ny;
  std::vector<std::vector<std::uint8_t>> slices(map.dims.nz, std::vector<std::uint8_t>(nx * ny, 0));
  const int s = map.step;
  for (const auto& e : map.entries) {
    const auto v = static_cast<std::uint8_t>(std::clamp(e.probability, 0.0, 1.0) * 255.0 + 0.5);
    auto& img = slices.at(static_cast<std::size_t>(e.voxel.z));
    for (int dy = 0; dy < s; ++dy) {
      for (int dx = 0; dx < s; ++dx) {
        const auto x = static_cast<std::size_t>(e.voxel.x + dx);
        const auto y = static_cast<std::size_t>(e.voxel.y + dy);
        if (x < nx && y < ny) img[y * nx + x] = v;
      }
    }
  }
  for (std::size_t z = 0; z < slices.size(); ++z) {
    char name[32];
    std::snprintf(name, sizeof name, "slice_%04zu.pgm", z);
    std::ofstream out(directory / name, std::ios::binary);
    if (!out) throw IoError("cannot write probability image in " + directory.string());
    out << "P5\n" << nx << ' ' << ny << "\n255\n";
    out.write(reinterpret_cast<const char*>(slices[z].data()), static_cast<std::streamsize>(slices[z].size()));
  }
}

}  // namespace rectnet
