#include <random>

#include "doctest.h"
#include "oracles/oracles.hpp"
#include "rectnet/meanshift.hpp"

using namespace rectnet;

namespace {

std::vector<Point3d> blob(const Point3d& c, std::size_t n, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0, sd);
  std::vector<Point3d> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({c[0] + g(rng), c[1] + g(rng), c[2] + g(rng)});
  return out;
}

double dist(const Point3d& a, const Point3d& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

}  // namespace

TEST_SUITE("meanshift") {
  TEST_CASE("single tight blob collapses to one mode") {
    std::mt19937_64 rng(1);
    const auto pts = blob({5, 5, 5}, 30, 0.5, rng);
    const std::vector<double> probs(pts.size(), 0.9);
    const auto r = mean_shift(pts, probs);
    REQUIRE(r.modes.size() == 1);
    CHECK(r.modes[0].members.size() == 30);
    CHECK(r.modes[0].mean_probability == doctest::Approx(0.9));
    CHECK(accepted_members(r.modes, 0.75).size() == 30);
    CHECK(r.unconverged == 0);
  }

  TEST_CASE("two blobs: modes at the density peaks and the weak one filtered") {
    std::mt19937_64 rng(2);
    const double h = 1.5;
    auto pts = blob({0, 0, 0}, 40, 0.8, rng);
    const auto second = blob({20, 0, 0}, 40, 0.8, rng);
    std::vector<double> probs(40, 0.9);
    pts.insert(pts.end(), second.begin(), second.end());
    probs.resize(80, 0.55);
    const auto r = mean_shift(pts, probs, MeanShiftOptions{h});
    REQUIRE(r.modes.size() == 2);
    const std::vector<Point3d> a(pts.begin(), pts.begin() + 40), b(pts.begin() + 40, pts.end());
    for (const auto& m : r.modes) {
      const bool first = m.position[0] < 10;
      const auto peak = oracle::density_peak(first ? a : b, h, m.position, 0.4, 0.02);
      CHECK(dist(peak, m.position) < 0.1 * h);
      CHECK(m.mean_probability == doctest::Approx(first ? 0.9 : 0.55));
    }
    const auto kept = accepted_members(r.modes, 0.75);
    CHECK(kept.size() == 40);
    CHECK(kept.back() < 40);
  }

  TEST_CASE("reported modes are fixed points") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
      const auto pts = blob({0, 0, 0}, 25, 2.0, rng);
      const std::vector<double> probs(pts.size(), 0.7);
      const auto r = mean_shift(pts, probs);
      for (const auto& m : r.modes) {
        // The grouped mode is the converged endpoint of its first member.
        const auto next = mean_shift_step(m.position, pts, 1.5);
        CHECK(dist(next, m.position) < 1e-3 * 1.5 * 1.5);
      }
    }
  }

  TEST_CASE("acceptance is monotone in the threshold") {
    std::mt19937_64 rng(4);
    auto pts = blob({0, 0, 0}, 20, 0.6, rng);
    auto more = blob({8, 0, 0}, 20, 0.6, rng);
    auto third = blob({0, 8, 0}, 20, 0.6, rng);
    pts.insert(pts.end(), more.begin(), more.end());
    pts.insert(pts.end(), third.begin(), third.end());
    std::vector<double> probs;
    std::uniform_real_distribution<double> u(0.5, 1.0);
    for (std::size_t i = 0; i < pts.size(); ++i) probs.push_back(u(rng));
    const auto r = mean_shift(pts, probs);
    std::size_t prev = pts.size() + 1;
    for (double p = 0.5; p < 1.0; p += 0.05) {
      const auto n = accepted_members(r.modes, p).size();
      CHECK(n <= prev);
      prev = n;
    }
    CHECK(accepted_members(r.modes, 1.0).empty());
  }

  TEST_CASE("members partition the input") {
    std::mt19937_64 rng(5);
    const auto pts = blob({0, 0, 0}, 60, 3.0, rng);
    const std::vector<double> probs(pts.size(), 0.8);
    const auto r = mean_shift(pts, probs);
    std::vector<int> seen(pts.size(), 0);
    for (const auto& m : r.modes)
      for (auto i : m.members) ++seen[i];
    for (int s : seen) CHECK(s == 1);
  }

  TEST_CASE("invalid arguments") {
    const std::vector<Point3d> pts{{0, 0, 0}};
    const std::vector<double> probs{0.9, 0.8};
    CHECK_THROWS_AS((void)mean_shift(pts, probs), InvalidArgument);
    const std::vector<double> one{0.9};
    CHECK_THROWS_AS((void)mean_shift(pts, one, MeanShiftOptions{0.0}), InvalidArgument);
  }
}
