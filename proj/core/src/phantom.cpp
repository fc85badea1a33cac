#include "rectnet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rectnet {

namespace {

double sq(double v) { return v * v; }

Point3 position(std::size_t x, std::size_t y, std::size_t z, const Spacing& s) {
  return {static_cast<double>(x) * s.sx, static_cast<double>(y) * s.sy, static_cast<double>(z) * s.sz};
}

bool inside_ellipsoid(const Point3& p, const Point3& c, const Point3& r) {
  return sq((p[0] - c[0]) / r[0]) + sq((p[1] - c[1]) / r[1]) + sq((p[2] - c[2]) / r[2]) <= 1.0;
}

bool inside_any_lung(const Point3& p, const std::vector<EllipsoidSpec>& lungs) {
  return std::any_of(lungs.begin(), lungs.end(), [&](const EllipsoidSpec& e) { return inside_ellipsoid(p, e.center, e.radii); });
}

double distance_to_segment(const Point3& p, const Point3& a, const Point3& b) {
  const Point3 ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  const double len2 = sq(ab[0]) + sq(ab[1]) + sq(ab[2]);
  double t = 0.0;
  if (len2 > 0) {
    t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1] + (p[2] - a[2]) * ab[2]) / len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  return std::sqrt(sq(p[0] - a[0] - t * ab[0]) + sq(p[1] - a[1] - t * ab[1]) + sq(p[2] - a[2] - t * ab[2]));
}

/// Inclusive voxel index range covering [lo_mm, hi_mm] along one axis.
std::pair<std::size_t, std::size_t> index_range(double lo_mm, double hi_mm, double spacing, std::size_t n) {
  const double lo = std::ceil(lo_mm / spacing);
  const double hi = std::floor(hi_mm / spacing);
  if (hi < 0 || lo > static_cast<double>(n) - 1 || lo > hi) return {1, 0};
  return {static_cast<std::size_t>(std::max(lo, 0.0)), static_cast<std::size_t>(std::min(hi, static_cast<double>(n) - 1))};
}

}  // namespace

void validate_phantom_spec(const PhantomSpec& spec) {
  if (spec.dims.empty()) throw InvalidArgument("phantom dims must be positive");
  if (!(spec.spacing.sx > 0) || !(spec.spacing.sy > 0) || !(spec.spacing.sz > 0)) {
    throw InvalidArgument("phantom spacing must be positive");
  }
  if (spec.lung_hu < -600 || spec.lung_hu > -400) throw InvalidArgument("lung HU mean must lie in [-600, -400]");
  if (spec.body_hu < -100) throw InvalidArgument("body HU must be at least -100");
  if (!(spec.noise_sd >= 0)) throw InvalidArgument("noise standard deviation must be non-negative");
  for (const auto& l : spec.lungs) {
    if (!(l.radii[0] > 0 && l.radii[1] > 0 && l.radii[2] > 0)) throw InvalidArgument("lung radii must be positive");
  }
  for (const auto& n : spec.nodules) {
    if (n.hu < -200 || n.hu > 200) throw InvalidArgument("nodule HU must lie in [-200, 200]");
    if (!(n.radii[0] > 0 && n.radii[1] > 0 && n.radii[2] > 0)) throw InvalidArgument("nodule radii must be positive");
    if (n.agreement < 1 || n.agreement > 4) throw InvalidArgument("nodule agreement must be in 1..4");
  }
  for (const auto& v : spec.vessels) {
    if (v.hu < -200 || v.hu > 200) throw InvalidArgument("vessel HU must lie in [-200, 200]");
    if (!(v.radius > 0) || v.polyline.empty()) throw InvalidArgument("vessel needs a positive radius and points");
  }
}

double subtlety_from_contrast(double nodule_hu, double lung_hu, double noise_sd) {
  const double cnr = (nodule_hu - lung_hu) / std::max(noise_sd, 1e-6);
  return 1.0 + 4.0 * std::clamp((cnr - 8.0) / 16.0, 0.0, 1.0);
}

Phantom generate_phantom(const PhantomSpec& spec) {
  validate_phantom_spec(spec);
  const auto& d = spec.dims;
  const auto& s = spec.spacing;

  std::vector<double> hu(d.count(), spec.air_hu);
  BinaryMask lung(d, s, 0);

  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        const auto p = position(x, y, z, s);
        const auto i = lung.index(x, y, z);
        const bool in_body = spec.body_radii[0] > 0 && spec.body_radii[1] > 0 &&
                             sq((p[0] - spec.body_center[0]) / spec.body_radii[0]) +
                                     sq((p[1] - spec.body_center[1]) / spec.body_radii[1]) <=
                                 1.0;
        if (in_body) hu[i] = spec.body_hu;
        if (inside_any_lung(p, spec.lungs)) {
          hu[i] = spec.lung_hu;
          lung.data()[i] = 1;
        }
      }
    }
  }

  for (const auto& vessel : spec.vessels) {
    const auto& pts = vessel.polyline;
    for (std::size_t seg = 0; seg < pts.size(); ++seg) {
      const auto& a = pts[seg];
      const auto& b = pts[std::min(seg + 1, pts.size() - 1)];
      const double r = vessel.radius;
      const auto [x0, x1] = index_range(std::min(a[0], b[0]) - r, std::max(a[0], b[0]) + r, s.sx, d.nx);
      const auto [y0, y1] = index_range(std::min(a[1], b[1]) - r, std::max(a[1], b[1]) + r, s.sy, d.ny);
      const auto [z0, z1] = index_range(std::min(a[2], b[2]) - r, std::max(a[2], b[2]) + r, s.sz, d.nz);
      for (std::size_t z = z0; z <= z1 && z0 <= z1; ++z) {
        for (std::size_t y = y0; y <= y1 && y0 <= y1; ++y) {
          for (std::size_t x = x0; x <= x1 && x0 <= x1; ++x) {
            const auto i = lung.index(x, y, z);
            if (!lung.data()[i]) continue;
            if (distance_to_segment(position(x, y, z, s), a, b) <= r) hu[i] = vessel.hu;
          }
        }
      }
    }
  }

  // 0 = free, otherwise 1 + nodule index.
  std::vector<std::uint16_t> owner(d.count(), 0);
  std::vector<NoduleAnnotation> annotations;
  for (std::size_t n = 0; n < spec.nodules.size(); ++n) {
    const auto& nod = spec.nodules[n];
    const auto& c = nod.center;
    const auto& r = nod.radii;
    NoduleAnnotation ann;
    ann.id = static_cast<int>(n) + 1;
    const auto [x0, x1] = index_range(c[0] - r[0], c[0] + r[0], s.sx, d.nx);
    const auto [y0, y1] = index_range(c[1] - r[1], c[1] + r[1], s.sy, d.ny);
    const auto [z0, z1] = index_range(c[2] - r[2], c[2] + r[2], s.sz, d.nz);
    for (std::size_t z = z0; z <= z1 && z0 <= z1; ++z) {
      for (std::size_t y = y0; y <= y1 && y0 <= y1; ++y) {
        for (std::size_t x = x0; x <= x1 && x0 <= x1; ++x) {
          if (!inside_ellipsoid(position(x, y, z, s), c, r)) continue;
          const auto i = lung.index(x, y, z);
          if (!lung.data()[i]) throw InvalidArgument("nodule " + std::to_string(ann.id) + " extends outside the lung");
          if (owner[i] != 0) throw InvalidArgument("nodule " + std::to_string(ann.id) + " overlaps another nodule");
          owner[i] = static_cast<std::uint16_t>(n + 1);
          hu[i] = nod.hu;
          ann.voxels.push_back(lung.voxel_at(i));
        }
      }
    }
    if (ann.voxels.empty()) throw InvalidArgument("nodule " + std::to_string(ann.id) + " covers no voxel");
    std::sort(ann.voxels.begin(), ann.voxels.end());
    ann.agreement = nod.agreement;
    if (nod.subtlety.empty()) {
      ann.subtlety.assign(static_cast<std::size_t>(nod.agreement),
                          subtlety_from_contrast(nod.hu, spec.lung_hu, spec.noise_sd));
    } else {
      ann.subtlety = nod.subtlety;
    }
    ann.malignancy = nod.malignancy;
    annotations.push_back(std::move(ann));
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::int16_t> data(d.count());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = hu[i] + (spec.noise_sd > 0 ? spec.noise_sd * noise(rng) : 0.0);
    data[i] = static_cast<std::int16_t>(std::clamp(std::lround(v), static_cast<long>(kMinHu), static_cast<long>(kMaxHu)));
  }

  return {Volume(d, s, std::move(data)), std::move(lung), std::move(annotations)};
}

PhantomSpec random_phantom_spec(std::uint64_t seed, const PhantomSuiteOptions& options) {
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  PhantomSpec spec;
  spec.dims = options.dims;
  spec.spacing = options.spacing;
  spec.seed = seed;
  spec.noise_sd = options.noise_sd;
  spec.lung_hu = uniform(-590.0, -560.0);

  const double ex = static_cast<double>(options.dims.nx - 1) * options.spacing.sx;
  const double ey = static_cast<double>(options.dims.ny - 1) * options.spacing.sy;
  const double ez = static_cast<double>(options.dims.nz - 1) * options.spacing.sz;
  spec.body_center = {ex / 2, ey / 2};
  spec.body_radii = {0.46 * ex, 0.42 * ey};

  EllipsoidSpec lung;
  lung.center = {ex / 2, ey / 2, ez / 2};
  lung.radii = {0.37 * ex * uniform(0.95, 1.0), 0.31 * ey * uniform(0.95, 1.0), 0.65 * ez};
  spec.lungs.push_back(lung);

  // Vessels: half run roughly along z (blob-like in every slice), half lie in-plane.
  auto point_in_lung = [&](double margin) {
    for (;;) {
      const Point3 p{uniform(lung.center[0] - lung.radii[0], lung.center[0] + lung.radii[0]),
                     uniform(lung.center[1] - lung.radii[1], lung.center[1] + lung.radii[1]), uniform(0.0, ez)};
      const Point3 shrunk{lung.radii[0] - margin, lung.radii[1] - margin, lung.radii[2] - margin};
      if (inside_ellipsoid(p, lung.center, shrunk)) return p;
    }
  };
  for (int v = 0; v < options.vessels; ++v) {
    VesselSpec vessel;
    vessel.radius = uniform(1.0, 1.8);
    vessel.hu = uniform(0.0, 80.0);
    auto a = point_in_lung(3.0);
    auto b = point_in_lung(3.0);
    if (v % 2 == 0) {
      a[2] = -2.0;
      b[2] = ez + 2.0;
      b[0] = std::clamp(a[0] + uniform(-10.0, 10.0), lung.center[0] - 0.7 * lung.radii[0], lung.center[0] + 0.7 * lung.radii[0]);
      b[1] = std::clamp(a[1] + uniform(-10.0, 10.0), lung.center[1] - 0.7 * lung.radii[1], lung.center[1] + 0.7 * lung.radii[1]);
    } else {
      b[2] = std::clamp(a[2] + uniform(-4.0, 4.0), 0.0, ez);
    }
    const Point3 mid{(a[0] + b[0]) / 2 + uniform(-4.0, 4.0), (a[1] + b[1]) / 2 + uniform(-4.0, 4.0), (a[2] + b[2]) / 2};
    vessel.polyline = {a, mid, b};
    spec.vessels.push_back(std::move(vessel));
  }

  const int count = std::uniform_int_distribution<int>(options.min_nodules, options.max_nodules)(rng);
  for (int n = 0, attempts = 0; n < count && attempts < 10000; ++attempts) {
    NoduleSpec nod;
    const double r = uniform(options.min_nodule_radius, options.max_nodule_radius);
    nod.radii = {r * uniform(0.9, 1.1), r * uniform(0.9, 1.1), r * uniform(0.9, 1.1)};
    const double rmax = std::max({nod.radii[0], nod.radii[1], nod.radii[2]});
    nod.center = point_in_lung(rmax + 2.0);
    // Keep the nodule's extent inside the scanned slab.
    if (nod.center[2] - nod.radii[2] < 0.0 || nod.center[2] + nod.radii[2] > ez) continue;
    const bool clear = std::all_of(spec.nodules.begin(), spec.nodules.end(), [&](const NoduleSpec& o) {
      const double omax = std::max({o.radii[0], o.radii[1], o.radii[2]});
      return std::sqrt(sq(o.center[0] - nod.center[0]) + sq(o.center[1] - nod.center[1]) + sq(o.center[2] - nod.center[2])) >
             rmax + omax + 12.0;
    });
    if (!clear) continue;
    nod.hu = uniform(-200.0, 150.0);
    nod.agreement = std::uniform_int_distribution<int>(1, 4)(rng);
    const double subtle = subtlety_from_contrast(nod.hu, spec.lung_hu, spec.noise_sd);
    nod.subtlety.assign(static_cast<std::size_t>(nod.agreement), subtle);
    for (int k = 0; k < nod.agreement; ++k) {
      nod.malignancy.push_back(static_cast<double>(std::uniform_int_distribution<int>(1, 5)(rng)));
    }
    spec.nodules.push_back(std::move(nod));
    ++n;
  }
  return spec;
}

}  // namespace rectnet
