#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>

#include "fermikac/kernel.hpp"

namespace fermikac {

/// Integer coordinates of a cubic velocity cell [k delta, (k+1) delta)^3.
struct CellIndex {
  std::int32_t ix = 0;
  std::int32_t iy = 0;
  std::int32_t iz = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

struct CellHash {
  std::size_t operator()(const CellIndex& c) const noexcept;
};

/// Partition of velocity space into cubes of side delta anchored at the origin,
/// together with the mean-field scaling N delta^3 = alpha.
class CellGrid {
 public:
  CellGrid() = default;

  /// Grid for N particles at exclusion strength alpha in (0,1):
  /// delta = (alpha / N)^(1/3).
  static CellGrid for_alpha(std::int64_t n_particles, double alpha);

  /// Grid with an explicit cell side; alpha is the realized N delta^3 and must
  /// lie in (0,1).
  static CellGrid with_delta(std::int64_t n_particles, double delta);

  double delta() const { return delta_; }
  double cell_volume() const { return delta_ * delta_ * delta_; }
  /// Realized N delta^3. All bounds are stated against this value.
  double alpha() const { return static_cast<double>(n_particles_) * cell_volume(); }
  std::int64_t n_particles() const { return n_particles_; }

  friend bool operator==(const CellGrid&, const CellGrid&) = default;

 private:
  CellGrid(double delta, std::int64_t n) : delta_(delta), n_particles_(n) {}
  double delta_ = 1.0;
  std::int64_t n_particles_ = 1;
};

/// Cell of v on a partition of side `side`: (floor(x/side), floor(y/side), floor(z/side)).
CellIndex cell_of(double side, const Vec3& v);
inline CellIndex cell_of(const CellGrid& grid, const Vec3& v) { return cell_of(grid.delta(), v); }

/// Lower corner of a cell.
inline Vec3 cell_origin(double side, const CellIndex& c) {
  return {side * c.ix, side * c.iy, side * c.iz};
}

/// True iff no two velocities share a cell.
bool is_admissible(const CellGrid& grid, std::span<const Vec3> velocities);

/// Largest occupation number over all cells (0 for an empty list).
int max_occupation(const CellGrid& grid, std::span<const Vec3> velocities);

/// Sparse cell -> occupant map of an admissible configuration.
class OccupancyMap {
 public:
  using Id = std::uint32_t;
  static constexpr Id kEmpty = 0xFFFFFFFFu;

  void reserve(std::size_t n) { map_.reserve(n); }
  std::size_t size() const { return map_.size(); }
  bool empty() const { return map_.empty(); }

  bool contains(const CellIndex& c) const { return map_.find(c) != map_.end(); }
  /// Occupant of c, or kEmpty.
  Id lookup(const CellIndex& c) const {
    auto it = map_.find(c);
    return it == map_.end() ? kEmpty : it->second;
  }
  /// Returns false (and leaves the map unchanged) if c is already occupied.
  bool insert(const CellIndex& c, Id id) { return map_.emplace(c, id).second; }
  void erase(const CellIndex& c) { map_.erase(c); }

  auto begin() const { return map_.begin(); }
  auto end() const { return map_.end(); }

 private:
  std::unordered_map<CellIndex, Id, CellHash> map_;
};

/// Occupancy of an admissible configuration; throws AdmissibilityError if two
/// velocities share a cell.
OccupancyMap build_occupancy(const CellGrid& grid, std::span<const Vec3> velocities);

}  // namespace fermikac
