#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles/oracles.hpp"
#include "rectnet/detector.hpp"
#include "rectnet/lung_seg.hpp"
#include "rectnet/phantom.hpp"
#include "tiny.hpp"

using namespace rectnet;

namespace {

ProbabilityMap map_of(const std::vector<GridPoint>& pts, double p = 0.9, int step = 4) {
  ProbabilityMap m;
  m.dims = {256, 256, 64};
  m.step = step;
  for (const auto& g : pts) m.entries.push_back({g, Voxel{g.gx * step, g.gy * step, g.j}, p});
  return m;
}

std::set<std::vector<std::size_t>> as_set(const std::vector<std::vector<std::size_t>>& c) { return {c.begin(), c.end()}; }

}  // namespace

TEST_SUITE("detector") {
  TEST_CASE("threshold keeps the boundary") {
    auto m = map_of({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
    m.entries[0].probability = 0.3;
    m.entries[1].probability = 0.6;
    m.entries[2].probability = 0.9;
    CHECK(threshold_map(m).entries.size() == 2);
    m.entries[0].probability = 0.5;
    CHECK(threshold_map(m).entries.size() == 3);
    for (auto& e : m.entries) e.probability = 0.4;
    CHECK(threshold_map(m).entries.empty());
  }

  TEST_CASE("diagonal adjacency joins, gaps split") {
    CHECK(grow_clusters(map_of({{0, 0, 0}, {1, 1, 1}})).size() == 1);
    CHECK(grow_clusters(map_of({{0, 0, 0}, {3, 0, 0}})).size() == 2);
    CHECK(grow_clusters(map_of({{0, 0, 0}, {0, 0, 2}})).size() == 2);
    CHECK(grow_clusters(map_of({})).empty());
  }

  TEST_CASE("clusters match union-find on random maps") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
      std::set<GridPoint> used;
      std::uniform_int_distribution<int> c(0, 14);
      while (used.size() < 500) used.insert({c(rng), c(rng), c(rng) % 8});
      std::vector<GridPoint> pts(used.begin(), used.end());
      std::shuffle(pts.begin(), pts.end(), rng);
      CHECK(as_set(grow_clusters(map_of(pts))) == oracle::union_find_clusters(pts));
    }
  }

  TEST_CASE("partition does not depend on entry order") {
    std::mt19937_64 rng(9);
    std::set<GridPoint> used;
    std::uniform_int_distribution<int> c(0, 9);
    while (used.size() < 200) used.insert({c(rng), c(rng), c(rng)});
    std::vector<GridPoint> pts(used.begin(), used.end());
    auto as_points = [&](const std::vector<GridPoint>& order) {
      std::set<std::set<GridPoint>> out;
      for (const auto& cl : grow_clusters(map_of(order))) {
        std::set<GridPoint> s;
        for (auto i : cl) s.insert(order[i]);
        out.insert(s);
      }
      return out;
    };
    const auto base = as_points(pts);
    std::shuffle(pts.begin(), pts.end(), rng);
    CHECK(as_points(pts) == base);
  }

  TEST_CASE("mode filter keeps the confident blob") {
    std::vector<GridPoint> pts;
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y) pts.push_back({x, y, 0});
    for (int x = 20; x < 23; ++x)
      for (int y = 0; y < 3; ++y) pts.push_back({x, y, 0});
    // Bridge so both blobs form one cluster.
    for (int x = 3; x < 20; ++x) pts.push_back({x, 1, 0});
    auto m = map_of(pts, 0.9);
    for (std::size_t i = 9; i < 18; ++i) m.entries[i].probability = 0.55;
    for (std::size_t i = 18; i < m.entries.size(); ++i) m.entries[i].probability = 0.55;
    const auto clusters = grow_clusters(m);
    REQUIRE(clusters.size() == 1);
    const auto cands = meanshift_filter(m, clusters[0], 1.5, 0.75);
    REQUIRE(cands.size() == 1);
    std::size_t confident = 0;
    for (const auto& e : cands[0].members) {
      CHECK(e.voxel.x < 80);
      confident += e.probability == 0.9 ? 1 : 0;
    }
    CHECK(confident == 9);
    CHECK(cands[0].mean_probability > 0.75);
    CHECK(meanshift_filter(m, clusters[0], 1.5, 0.95).empty());
  }

  TEST_CASE("candidate geometry") {
    Spacing sp{0.5, 0.5, 2.0};
    std::vector<MapEntry> members{{{0, 0, 0}, {4, 8, 1}, 0.8}, {{1, 0, 0}, {8, 8, 3}, 0.6}};
    const auto c = make_candidate(members, sp);
    CHECK(c.centroid_mm[0] == doctest::Approx(3.0));
    CHECK(c.centroid_mm[1] == doctest::Approx(4.0));
    CHECK(c.centroid_mm[2] == doctest::Approx(4.0));
    CHECK(c.mean_probability == doctest::Approx(0.7));
    CHECK(c.box.min == Voxel{4, 8, 1});
    CHECK(c.box.max == Voxel{8, 8, 3});
    CHECK(c.voxel_count() == 2);
  }

  TEST_CASE("inference covers every grid point and reuses slice embeddings") {
    const auto p = generate_phantom(random_phantom_spec(31, PhantomSuiteOptions{Dims{48, 48, 10}}));
    const auto mask = segment_lungs(p.volume);
    auto net = make_network<float>(tiny::rectnet_config(), 12);
    InferenceOptions opt;
    opt.grid_multiplier = 4;
    const auto map = infer_map(*net, p.volume, mask, opt, "v");
    CHECK(map.entries.size() == sample_grid(mask, GridSpec{4.0}).size());
    CHECK(map.step == 4);
    auto probe = net->clone();
    for (std::size_t i = 0; i < map.entries.size(); i += 7) {
      const auto& e = map.entries[i];
      CHECK(e.grid == GridPoint{e.voxel.x / 4, e.voxel.y / 4, e.voxel.z});
      const auto s = extract_stack(p.volume, e.voxel, 1, 8, 8);
      CHECK(e.probability == doctest::Approx(nodule_probability(*probe, s)).epsilon(1e-5));
    }
    opt.threads = 2;
    const auto threaded = infer_map(*net, p.volume, mask, opt, "v");
    CHECK(threaded.entries == map.entries);
  }

  TEST_CASE("empty lung gives an empty map and no candidates") {
    Volume body(Dims{32, 32, 4}, Spacing{}, std::int16_t{40});
    auto net = make_network<float>(tiny::rectnet_config(), 1);
    BinaryMask none(body.dims(), body.spacing(), 0);
    CHECK(infer_map(*net, body, none).entries.empty());
    const auto d = detect(*net, body, DetectorConfig{});
    CHECK(d.sampled == 0);
    CHECK(d.candidates(0.6).empty());
  }

  TEST_CASE("candidate count shrinks with accept_p and JSON round trips") {
    std::mt19937_64 rng(13);
    std::set<GridPoint> used;
    std::uniform_int_distribution<int> c(0, 11);
    while (used.size() < 150) used.insert({c(rng), c(rng), c(rng) % 5});
    auto m = map_of({used.begin(), used.end()});
    std::uniform_real_distribution<double> u(0.5, 1.0);
    for (auto& e : m.entries) e.probability = u(rng);
    const auto det = detect_from_map(m, 300, 1.5);
    std::size_t prev = SIZE_MAX;
    for (double p = 0.5; p < 1.0; p += 0.05) {
      const auto n = det.candidates(p).size();
      CHECK(n <= prev);
      prev = n;
      for (const auto& cand : det.candidates(p)) CHECK(cand.mean_probability > p);
    }
    const auto back = detection_from_json(detection_to_json(det, 0.75));
    CHECK(back.sampled == 300);
    CHECK(back.retained == det.retained);
    CHECK(detection_to_json(back, 0.6) == detection_to_json(det, 0.6));

    const auto dir = std::filesystem::temp_directory_path() / "rectnet_unit_pgm";
    std::filesystem::remove_all(dir);
    write_probability_images(m, dir);
    CHECK(std::filesystem::exists(dir / "slice_0000.pgm"));
  }
}
