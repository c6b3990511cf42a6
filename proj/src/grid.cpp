#include "fermikac/grid.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fermikac/errors.hpp"
#include "fermikac/rng.hpp"

namespace fermikac {

std::size_t CellHash::operator()(const CellIndex& c) const noexcept {
  const auto ux = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.ix));
  const auto uy = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.iy));
  const auto uz = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.iz));
  return static_cast<std::size_t>(splitmix64((ux << 42) ^ (uy << 21) ^ uz ^ (uz >> 43)));
}

CellGrid CellGrid::for_alpha(std::int64_t n_particles, double alpha) {
  if (n_particles < 1) throw ConfigError("grid: n_particles must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("grid: alpha must lie in (0,1)");
  return CellGrid(std::cbrt(alpha / static_cast<double>(n_particles)), n_particles);
}

CellGrid CellGrid::with_delta(std::int64_t n_particles, double delta) {
  if (n_particles < 1) throw ConfigError("grid: n_particles must be positive");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("grid: delta must be positive");
  CellGrid g(delta, n_particles);
  if (!(g.alpha() > 0.0 && g.alpha() < 1.0)) {
    throw ConfigError("grid: N delta^3 = " + std::to_string(g.alpha()) + " is outside (0,1)");
  }
  return g;
}

namespace {
std::int32_t floor_index(double x, double side) {
  const double q = std::floor(x / side);
  if (!(std::abs(q) < 1.0e9)) throw std::out_of_range("cell_of: velocity outside index range");
  return static_cast<std::int32_t>(q);
}
}  // namespace

CellIndex cell_of(double side, const Vec3& v) {
  return {floor_index(v.x(), side), floor_index(v.y(), side), floor_index(v.z(), side)};
}

bool is_admissible(const CellGrid& grid, std::span<const Vec3> velocities) {
  return max_occupation(grid, velocities) <= 1;
}

int max_occupation(const CellGrid& grid, std::span<const Vec3> velocities) {
  std::unordered_map<CellIndex, int, CellHash> counts;
  counts.reserve(velocities.size());
  int best = 0;
  for (const auto& v : velocities) best = std::max(best, ++counts[cell_of(grid, v)]);
  return best;
}

OccupancyMap build_occupancy(const CellGrid& grid, std::span<const Vec3> velocities) {
  OccupancyMap occ;
  occ.reserve(velocities.size());
  for (std::size_t i = 0; i < velocities.size(); ++i) {
    const CellIndex c = cell_of(grid, velocities[i]);
    if (!occ.insert(c, static_cast<OccupancyMap::Id>(i))) {
      throw AdmissibilityError("build_occupancy: particles " + std::to_string(occ.lookup(c)) +
                               " and " + std::to_string(i) + " share a cell");
    }
  }
  return occ;
}

}  // namespace fermikac
