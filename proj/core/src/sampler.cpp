#include "rectnet/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace rectnet {

using nlohmann::json;

int GridSpec::step() const {
  if (!(step_multiplier > 0)) throw InvalidArgument("grid step multiplier must be positive");
  return std::max(1, static_cast<int>(std::lround(step_multiplier)));
}

std::vector<Voxel> sample_grid(const BinaryMask& lung_mask, const GridSpec& grid) {
  const int step = grid.step();
  const auto& d = lung_mask.dims();
  std::vector<Voxel> out;
  const auto px = static_cast<std::size_t>(((grid.phase_x % step) + step) % step);
  const auto py = static_cast<std::size_t>(((grid.phase_y % step) + step) % step);
  const auto st = static_cast<std::size_t>(step);
  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = py; y < d.ny; y += st) {
      for (std::size_t x = px; x < d.nx; x += st) {
        if (lung_mask.at(x, y, z)) out.push_back({static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)});
      }
    }
  }
  return out;
}

std::vector<Voxel> sample_nodule_voxels(const std::vector<NoduleAnnotation>& annotations, double rate,
                                        std::uint64_t seed) {
  if (!(rate > 0.0) || rate > 1.0) throw InvalidArgument("positive sampling rate must be in (0, 1]");
  std::mt19937_64 rng(seed);
  std::vector<Voxel> out;
  for (const auto& a : annotations) {
    auto pool = a.voxels;
    const auto take = static_cast<std::size_t>(std::lround(rate * static_cast<double>(pool.size())));
    if (take < pool.size()) {
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(take);
    }
    out.insert(out.end(), pool.begin(), pool.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

float normalize_hu(int hu) {
  const int c = std::clamp(hu, kWindowLowHu, kWindowHighHu);
  return static_cast<float>(c - kWindowLowHu) / static_cast<float>(kWindowHighHu - kWindowLowHu);
}

std::string_view augmentation_name(Augmentation a) {
  switch (a) {
    case Augmentation::none: return "none";
    case Augmentation::flip_h: return "flip_h";
    case Augmentation::flip_v: return "flip_v";
    case Augmentation::rot90: return "rot90";
    case Augmentation::rot180: return "rot180";
    case Augmentation::rot270: return "rot270";
  }
  return "none";
}

Augmentation parse_augmentation(std::string_view name) {
  for (auto a : {Augmentation::none, Augmentation::flip_h, Augmentation::flip_v, Augmentation::rot90,
                 Augmentation::rot180, Augmentation::rot270}) {
    if (augmentation_name(a) == name) return a;
  }
  throw InvalidArgument("unknown augmentation '" + std::string(name) + "'");
}

PatchStack extract_stack(const Volume& volume, const Voxel& center, int k, int size, int source_size) {
  if (!volume.contains(center)) throw InvalidArgument("stack center outside the volume");
  if (k < 0 || size <= 0 || source_size < size) throw InvalidArgument("invalid stack geometry");
  const auto& d = volume.dims();
  const int nx = static_cast<int>(d.nx);
  const int ny = static_cast<int>(d.ny);
  const int nz = static_cast<int>(d.nz);
  const int x0 = center.x - source_size / 2;
  const int y0 = center.y - source_size / 2;

  PatchStack stack;
  stack.center = center;
  stack.k = k;
  stack.size = size;
  stack.source_size = source_size;
  const auto n = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
  stack.values.resize(static_cast<std::size_t>(2 * k + 1) * n);

  std::vector<float> source(static_cast<std::size_t>(source_size) * static_cast<std::size_t>(source_size));
  for (int s = 0; s < 2 * k + 1; ++s) {
    const int z = std::clamp(center.z - k + s, 0, nz - 1);
    for (int j = 0; j < source_size; ++j) {
      const int y = y0 + j;
      for (int i = 0; i < source_size; ++i) {
        const int x = x0 + i;
        const int hu = (x >= 0 && y >= 0 && x < nx && y < ny)
                           ? volume.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z))
                           : kWindowLowHu;
        source[static_cast<std::size_t>(j * source_size + i)] = normalize_hu(hu);
      }
    }
    float* out = stack.values.data() + static_cast<std::size_t>(s) * n;
    if (source_size == size) {
      std::copy(source.begin(), source.end(), out);
      continue;
    }
    const double scale = static_cast<double>(source_size) / static_cast<double>(size);
    const double last = static_cast<double>(source_size - 1);
    for (int j = 0; j < size; ++j) {
      const double v = std::clamp((j + 0.5) * scale - 0.5, 0.0, last);
      const int v0 = static_cast<int>(std::floor(v));
      const int v1 = std::min(v0 + 1, source_size - 1);
      const double fv = v - v0;
      for (int i = 0; i < size; ++i) {
        const double u = std::clamp((i + 0.5) * scale - 0.5, 0.0, last);
        const int u0 = static_cast<int>(std::floor(u));
        const int u1 = std::min(u0 + 1, source_size - 1);
        const double fu = u - u0;
        auto src = [&](int a, int b) { return static_cast<double>(source[static_cast<std::size_t>(b * source_size + a)]); };
        const double top = src(u0, v0) * (1 - fu) + src(u1, v0) * fu;
        const double bottom = src(u0, v1) * (1 - fu) + src(u1, v1) * fu;
        out[j * size + i] = static_cast<float>(top * (1 - fv) + bottom * fv);
      }
    }
  }
  return stack;
}

PatchStack augment(const PatchStack& stack, Augmentation op) {
  if (op == Augmentation::none) return stack;
  PatchStack out = stack;
  const int m = stack.size;
  const auto n = static_cast<std::size_t>(m) * static_cast<std::size_t>(m);
  for (int s = 0; s < stack.depth(); ++s) {
    const float* in = stack.values.data() + static_cast<std::size_t>(s) * n;
    float* dst = out.values.data() + static_cast<std::size_t>(s) * n;
    for (int y = 0; y < m; ++y) {
      for (int x = 0; x < m; ++x) {
        int sx = x;
        int sy = y;
        switch (op) {
          case Augmentation::flip_h: sx = m - 1 - x; break;
          case Augmentation::flip_v: sy = m - 1 - y; break;
          case Augmentation::rot90: sx = y; sy = m - 1 - x; break;
          case Augmentation::rot180: sx = m - 1 - x; sy = m - 1 - y; break;
          case Augmentation::rot270: sx = m - 1 - y; sy = x; break;
          case Augmentation::none: break;
        }
        dst[y * m + x] = in[sy * m + sx];
      }
    }
  }
  return out;
}

std::size_t DatasetManifest::positives() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const ManifestEntry& e) { return e.label != 0; }));
}

std::size_t DatasetManifest::negatives() const { return entries.size() - positives(); }

DatasetManifest build_dataset(const std::vector<LabelledScan>& scans, const DatasetConfig& config) {
  if (config.k < 0 || config.patch_size <= 0) throw InvalidArgument("invalid dataset geometry");
  if (config.large_patch_size != 0 && config.large_patch_size < config.patch_size) {
    throw InvalidArgument("large patch size must be 0 or at least the patch size");
  }
  std::vector<int> scales{config.patch_size};
  if (config.large_patch_size > config.patch_size) scales.push_back(config.large_patch_size);

  DatasetManifest manifest;
  manifest.k = config.k;
  manifest.patch_size = config.patch_size;

  std::uint64_t scan_seed = config.seed;
  for (const auto& scan : scans) {
    if (scan.volume == nullptr || scan.lung_mask == nullptr) throw InvalidArgument("scan " + scan.id + " lacks volume or mask");
    if (scan.volume->dims() != scan.lung_mask->dims()) throw ShapeError("mask dims differ from volume for " + scan.id);
    static const std::vector<NoduleAnnotation> kNone;
    const auto& nodules = scan.nodules ? *scan.nodules : kNone;

    BinaryMask truth(scan.volume->dims(), scan.volume->spacing(), 0);
    for (const auto& a : nodules) {
      for (const auto& v : a.voxels) truth.at(v) = 1;
    }
    auto add = [&](const Voxel& c, Augmentation op) {
      for (const int s : scales) {
        manifest.entries.push_back({scan.id, c, truth.at(c), op, s});
      }
    };
    for (const auto& c : sample_grid(*scan.lung_mask, GridSpec{config.grid_multiplier})) add(c, Augmentation::none);

    if (!nodules.empty()) {
      for (const auto& c : sample_nodule_voxels(nodules, config.positive_rate, scan_seed)) {
        if (!scan.lung_mask->at(c)) continue;
        add(c, Augmentation::none);
        for (const auto op : config.augmentations) {
          if (op != Augmentation::none) add(c, op);
        }
      }
    }
    scan_seed = scan_seed * 6364136223846793005ULL + 1442695040888963407ULL;
  }
  std::sort(manifest.entries.begin(), manifest.entries.end());
  manifest.entries.erase(std::unique(manifest.entries.begin(), manifest.entries.end()), manifest.entries.end());
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  json header{{"k", manifest.k},
              {"patch_size", manifest.patch_size},
              {"positives", manifest.positives()},
              {"negatives", manifest.negatives()}};
  out << header.dump() << '\n';
  for (const auto& e : manifest.entries) {
    json j{{"volume", e.volume_id},
           {"center", {e.center.x, e.center.y, e.center.z}},
           {"label", e.label},
           {"aug", augmentation_name(e.augmentation)},
           {"scale", e.source_size}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  DatasetManifest m;
  std::string line;
  std::size_t pos = 0;
  std::size_t neg = 0;
  try {
    if (!std::getline(in, line)) throw FormatError("empty manifest " + path.string());
    const auto header = json::parse(line);
    m.k = header.at("k").get<int>();
    m.patch_size = header.at("patch_size").get<int>();
    pos = header.at("positives").get<std::size_t>();
    neg = header.at("negatives").get<std::size_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      ManifestEntry e;
      e.volume_id = j.at("volume").get<std::string>();
      const auto& c = j.at("center");
      e.center = {c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>()};
      e.label = j.at("label").get<std::uint8_t>();
      e.augmentation = parse_augmentation(j.at("aug").get<std::string>());
      e.source_size = j.at("scale").get<int>();
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError("bad manifest " + path.string() + ": " + e.what());
  }
  if (m.positives() != pos || m.negatives() != neg) throw FormatError("manifest class counts do not match its entries");
  return m;
}

PatchStack materialize(const ManifestEntry& entry, const Volume& volume, int k, int patch_size) {
  auto stack = augment(extract_stack(volume, entry.center, k, patch_size, entry.source_size), entry.augmentation);
  stack.label = entry.label;
  return stack;
}

}  // namespace rectnet
