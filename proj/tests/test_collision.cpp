#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "taxelsim/collision.hpp"

using namespace taxelsim;
using namespace taxelsim::testing;

TEST_CASE("required_deflection examples") {
  const Vec3 c0 = Vec3::Zero();
  const Vec3 n = Vec3::UnitZ();

  CHECK(required_deflection(c0, n, 0.5, Vec3(0, 0, 2), 1.0) == 0.0);

  const double d1 = required_deflection(c0, n, 0.5, Vec3(0, 0, 1.2), 1.0);
  CHECK(d1 == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(std::abs(((c0 - d1 * n) - Vec3(0, 0, 1.2)).norm() - 1.5) < 1e-12);

  const double d2 = required_deflection(c0, n, 0.5, Vec3(0.9, 0, 1.0), 1.0);
  CHECK(d2 == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(std::abs(((c0 - d2 * n) - Vec3(0.9, 0, 1.0)).norm() - std::sqrt(0.81 + 1.44)) < 1e-12);
}

TEST_CASE("required_deflection agrees with the bisection oracle") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> rad(0.05, 1.0);
  int overlapping = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 c0 = random_vec(rng, -1, 1);
    const Vec3 n = random_unit(rng);
    const double rt = rad(rng);
    const double rs = rad(rng);
    const Vec3 o = c0 + random_vec(rng, -1.5, 1.5);
    const double closed = required_deflection(c0, n, rt, o, rs);
    const double oracle = bisection_deflection(c0, n, rt, o, rs);
    if (oracle > 0.0) ++overlapping;
    REQUIRE(std::abs(closed - oracle) <= 1e-9);
  }
  CHECK(overlapping > 1000);
}

TEST_CASE("required_deflection separation, tightness and monotonicity") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> rad(0.05, 1.0);
  std::uniform_real_distribution<double> step(0.0, 0.3);
  for (int i = 0; i < 5000; ++i) {
    const Vec3 c0 = random_vec(rng, -1, 1);
    const Vec3 n = random_unit(rng);
    const double rt = rad(rng);
    const double rs = rad(rng);
    const Vec3 o = c0 + random_vec(rng, -1.5, 1.5);
    const double reach = rt + rs;
    const double d = required_deflection(c0, n, rt, o, rs);
    const double dist = ((c0 - d * n) - o).norm();
    REQUIRE(d >= 0.0);
    REQUIRE(dist >= reach - 1e-9);
    if (d > 0.0) REQUIRE(std::abs(dist - reach) <= 1e-9);

    // Pressing the sphere further along -normal deepens the deflection, as
    // long as it still touches the taxel at rest.
    const Vec3 closer = o - step(rng) * n;
    if ((closer - c0).norm() < reach) REQUIRE(required_deflection(c0, n, rt, closer, rs) >= d - 1e-12);
  }
}

namespace {

// Cells overlapped by [lo, hi], by direct floor arithmetic.
std::set<std::tuple<long, long, long>> aabb_cells(const Vec3& lo, const Vec3& hi, double cell) {
  std::set<std::tuple<long, long, long>> out;
  for (long x = long(std::floor(lo.x() / cell)); x <= long(std::floor(hi.x() / cell)); ++x) {
    for (long y = long(std::floor(lo.y() / cell)); y <= long(std::floor(hi.y() / cell)); ++y) {
      for (long z = long(std::floor(lo.z() / cell)); z <= long(std::floor(hi.z() / cell)); ++z) {
        out.emplace(x, y, z);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("build_grid") {
  SUBCASE("empty input") {
    const auto grid = build_grid({}, 1.0);
    CHECK(grid.occupied_cells() == 0);
  }
  SUBCASE("sphere inside one cell") {
    const auto grid = build_grid({{Vec3(0.5, 0.5, 0.5), 0.4, 0}}, 1.0);
    CHECK(grid.occupied_cells() == 1);
    CHECK(grid.cell({0, 0, 0}).size() == 1);
  }
  SUBCASE("sphere straddling a cell corner") {
    const auto grid = build_grid({{Vec3(0, 0, 0), 0.4, 0}}, 1.0);
    const auto expected = aabb_cells(Vec3::Constant(-0.4), Vec3::Constant(0.4), 1.0);
    CHECK(expected.size() == 8);
    CHECK(grid.occupied_cells() == 8);
    for (const auto& [x, y, z] : expected) CHECK(grid.cell({x, y, z}).size() == 1);
  }
  SUBCASE("distant spheres share no cell") {
    const auto grid = build_grid({{Vec3(0.5, 0.5, 0.5), 0.3, 0}, {Vec3(10.5, 0.5, 0.5), 0.3, 1}}, 1.0);
    CHECK(grid.occupied_cells() == 2);
    CHECK(grid.cell({0, 0, 0}).size() == 1);
    CHECK(grid.cell({10, 0, 0}).size() == 1);
  }
  SUBCASE("rejects nonpositive cell size") {
    CHECK_THROWS_AS(build_grid({}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_grid({}, -1.0), std::invalid_argument);
  }
}

TEST_CASE("grid stores each sphere in exactly its AABB cells, in insertion order") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rad(0.01, 0.6);
  std::vector<WorldSphere> spheres;
  for (std::size_t i = 0; i < 200; ++i) spheres.push_back({random_vec(rng, -3, 3), rad(rng), i});
  const double cell = 0.7;
  const auto grid = build_grid(spheres, cell);

  std::map<std::tuple<long, long, long>, std::vector<std::uint32_t>> expected;
  for (std::uint32_t i = 0; i < spheres.size(); ++i) {
    const Vec3 r = Vec3::Constant(spheres[i].radius);
    for (const auto& c : aabb_cells(spheres[i].center - r, spheres[i].center + r, cell)) {
      expected[c].push_back(i);
    }
  }
  CHECK(grid.occupied_cells() == expected.size());
  for (const auto& [c, ids] : expected) {
    const auto [x, y, z] = c;
    const auto got = grid.cell({x, y, z});
    CHECK(std::vector<std::uint32_t>(got.begin(), got.end()) == ids);
  }
}

TEST_CASE("candidate_spheres") {
  const TaxelWorldFrame f{Vec3::Zero(), Vec3::UnitZ()};
  SUBCASE("no spheres") { CHECK(candidate_spheres(build_grid({}, 1.0), f, 0.5, 0.1).empty()); }
  SUBCASE("touching sphere is reported") {
    const auto grid = build_grid({{Vec3(0, 0, 1.2), 1.0, 0}}, default_cell_size(1.0, 0.5));
    const auto c = candidate_spheres(grid, f, 0.5, 0.1);
    CHECK(std::find(c.begin(), c.end(), 0) != c.end());
  }
  SUBCASE("superset of the all-pairs overlap set on random scenes") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> rad(0.005, 0.05);
    std::vector<WorldSphere> spheres;
    for (std::size_t i = 0; i < 1000; ++i) spheres.push_back({random_vec(rng, -0.5, 0.5), rad(rng), 0});
    const auto grid = build_grid(spheres, default_cell_size(0.05, 0.02));
    for (int q = 0; q < 500; ++q) {
      const TaxelWorldFrame frame{random_vec(rng, -0.5, 0.5), random_unit(rng)};
      const auto cand = candidate_spheres(grid, frame, 0.02, 0.01);
      CHECK(std::is_sorted(cand.begin(), cand.end()));
      CHECK(std::adjacent_find(cand.begin(), cand.end()) == cand.end());
      for (std::size_t j : overlapping_spheres(frame, 0.02, spheres)) {
        REQUIRE(std::binary_search(cand.begin(), cand.end(), j));
      }
    }
  }
}

TEST_CASE("default cell size") {
  CHECK(default_cell_size(0.01, 0.002) == doctest::Approx(0.024));
  CHECK(default_cell_size(0.0, 0.0) == 1e-3);
}
