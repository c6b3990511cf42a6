#include <doctest.h>

#include <cmath>
#include <vector>

#include "fermikac/errors.hpp"
#include "fermikac/grid.hpp"

using namespace fermikac;

TEST_CASE("mean-field scaling fixes delta") {
  const CellGrid g = CellGrid::for_alpha(1000, 0.2);
  CHECK(g.delta() == doctest::Approx(std::cbrt(0.2 / 1000.0)));
  CHECK(g.alpha() == doctest::Approx(0.2).epsilon(1e-14));
  CHECK_THROWS_AS(CellGrid::for_alpha(1000, 1.0), ConfigError);
  CHECK_THROWS_AS(CellGrid::for_alpha(1000, 0.0), ConfigError);
  CHECK_THROWS_AS(CellGrid::with_delta(8, 0.5), ConfigError);  // alpha = 1
  CHECK(CellGrid::with_delta(3, 0.25).alpha() == doctest::Approx(3.0 / 64.0));
}

TEST_CASE("cell_of floors in every coordinate") {
  CHECK(cell_of(0.5, Vec3(0.0, 0.49, -0.01)) == CellIndex{0, 0, -1});
  CHECK(cell_of(0.5, Vec3(1.0, -1.0, 0.75)) == CellIndex{2, -2, 1});
  CHECK(cell_origin(0.5, CellIndex{2, -2, 1}).isApprox(Vec3(1.0, -1.0, 0.5)));
  // Every point lies in the half-open cube of its cell.
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 v(rng.normal() * 3, rng.normal() * 3, rng.normal() * 3);
    const double side = 0.1 + rng.uniform();
    const Vec3 o = cell_origin(side, cell_of(side, v));
    for (int d = 0; d < 3; ++d) {
      CHECK(o(d) <= v(d) + 1e-12);
      CHECK(v(d) < o(d) + side + 1e-12);
    }
  }
}

TEST_CASE("admissibility and occupation") {
  const CellGrid g = CellGrid::with_delta(3, 0.25);
  std::vector<Vec3> v{{0.1, 0.1, 0.1}, {0.3, 0.1, 0.1}, {0.1, 0.3, 0.1}};
  CHECK(is_admissible(g, v));
  CHECK(max_occupation(g, v) == 1);
  v[2] = {0.2, 0.2, 0.2};
  CHECK_FALSE(is_admissible(g, v));
  CHECK(max_occupation(g, v) == 2);
  CHECK_THROWS_AS(build_occupancy(g, v), AdmissibilityError);
  CHECK(max_occupation(g, std::vector<Vec3>{}) == 0);
}

TEST_CASE("occupancy map") {
  OccupancyMap m;
  CHECK(m.insert(CellIndex{1, 2, 3}, 7));
  CHECK_FALSE(m.insert(CellIndex{1, 2, 3}, 8));
  CHECK(m.lookup(CellIndex{1, 2, 3}) == 7u);
  CHECK(m.lookup(CellIndex{0, 0, 0}) == OccupancyMap::kEmpty);
  m.erase(CellIndex{1, 2, 3});
  CHECK(m.empty());
  const CellGrid g = CellGrid::with_delta(2, 0.25);
  const std::vector<Vec3> v{{0.1, 0.1, 0.1}, {0.6, 0.1, 0.1}};
  const OccupancyMap occ = build_occupancy(g, v);
  CHECK(occ.size() == 2);
  CHECK(occ.lookup(CellIndex{2, 0, 0}) == 1u);
}
