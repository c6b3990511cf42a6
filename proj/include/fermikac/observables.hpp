#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fermikac/grid.hpp"
#include "fermikac/process.hpp"
#include "fermikac/uu.hpp"

namespace fermikac {

struct CompactBox {
  Vec3 lower = Vec3::Constant(-1.0);
  Vec3 upper = Vec3::Constant(1.0);

  /// Throws ConfigError unless lower < upper componentwise.
  void validate() const;
  /// Cells of side `side` meeting the box in a set of positive volume.
  std::pair<CellIndex, CellIndex> cell_range(double side) const;
};

/// Occupation statistics of a set of snapshots (replicas) on a partition of
/// side `side()`, which is the exclusion cell delta unless a coarser
/// observation side is requested.
///
/// With n_A the number of particles of a snapshot in cell A and <.> the
/// average over snapshots:
///   k = 1:  f1(A)    = <n_A> / (N |A|)
///   k = 2:  f2(A, B) = <n_A n_B> / (N (N-1) |A| |B|),  A != B.
/// On delta cells n_A is 0 or 1 and these are the falling-factorial estimators
/// of the one- and two-particle marginals. Diagonal tuples are not estimated.
///
/// Storage is per snapshot (the sorted list of occupied cells with counts) plus
/// a per-cell list of (snapshot, count); two-cell values are computed on
/// demand by merging two such lists, so no pair table is ever materialized.
class MarginalEstimate {
 public:
  struct Entry {
    std::uint32_t sample;
    std::uint32_t count;
  };

  MarginalEstimate() = default;

  int k() const { return k_; }
  std::int64_t n_particles() const { return n_particles_; }
  double delta() const { return delta_; }
  double side() const { return side_; }
  double alpha() const { return alpha_; }
  std::size_t n_samples() const { return samples_.size(); }
  double cell_volume() const { return side_ * side_ * side_; }
  bool on_delta_cells() const { return side_ == delta_; }

  double value(const CellIndex& a) const;
  double value(const CellIndex& a, const CellIndex& b) const;
  /// sum over snapshots of n_A n_B (A != B), the integer numerator of value(a, b).
  std::uint64_t joint_count(const CellIndex& a, const CellIndex& b) const;
  std::uint64_t total_count(const CellIndex& a) const;

  /// k=1 values of all cells that were ever occupied, sorted by cell.
  std::vector<std::pair<CellIndex, double>> values1() const;
  /// k=2 values of every unordered pair of distinct cells that were ever
  /// co-occupied, sorted; empty if more than `limit` pairs would be listed.
  std::vector<std::pair<std::pair<CellIndex, CellIndex>, double>> values2(std::size_t limit) const;

  const std::vector<std::vector<std::pair<CellIndex, std::uint32_t>>>& samples() const {
    return samples_;
  }
  const std::unordered_map<CellIndex, std::vector<Entry>, CellHash>& cells() const {
    return cells_;
  }

  /// Snapshots of `a` followed by those of `b`; throws ConfigError on mismatched grids.
  static MarginalEstimate merge(const MarginalEstimate& a, const MarginalEstimate& b);
  /// Estimate from the listed snapshots (repeats allowed); used by the bootstrap.
  MarginalEstimate resample(std::span<const std::size_t> picks) const;
  /// Same snapshots seen as order-k estimate.
  MarginalEstimate with_order(int k) const;

  /// Estimate from per-snapshot lists of (occupied cell, count); lists need not
  /// be sorted. side is the counting cell side (delta for exclusion cells).
  static MarginalEstimate from_samples(
      int k, std::int64_t n_particles, double delta, double side, double alpha,
      std::vector<std::vector<std::pair<CellIndex, std::uint32_t>>> samples);

 private:
  void rebuild_index();

  int k_ = 1;
  std::int64_t n_particles_ = 0;
  double delta_ = 0.0;
  double side_ = 0.0;
  double alpha_ = 0.0;
  std::vector<std::vector<std::pair<CellIndex, std::uint32_t>>> samples_;
  std::unordered_map<CellIndex, std::vector<Entry>, CellHash> cells_;
};

/// Estimate of order k (1 or 2) from snapshots sharing (N, delta). A positive
/// `observe_side` counts occupations on cells of that side instead of delta.
MarginalEstimate estimate_marginal(std::span<const ParticleEnsemble> snapshots, int k,
                                   double observe_side = 0.0);

/// Largest stored value: max f1 for k = 1, max over distinct co-occupied cell
/// pairs of f2 for k = 2 (0 for an empty estimate).
double delta_norm(const MarginalEstimate& est);

/// Sum over cells meeting the box of |f1(A) - avg_A| |A|, where avg_A is
/// supplied by the caller.
double l1_distance(const MarginalEstimate& est, const std::function<double(const CellIndex&)>& cell_average,
                   const CompactBox& box);

/// Field average over a cell by the 2^3 midpoint rule (points at 1/4 and 3/4 of
/// the side in each coordinate).
double cell_average(const DensityField& field, double side, const CellIndex& cell);

/// l1_distance against a continuum field.
double l1_distance(const MarginalEstimate& est, const DensityField& field, const CompactBox& box);

/// Sup over cells meeting the box of |f1(A) - avg_A|.
double sup_distance(const MarginalEstimate& est,
                    const std::function<double(const CellIndex&)>& cell_average,
                    const CompactBox& box);

/// Sum over ordered pairs of distinct cells in the box of
/// |f2(A, B) - f1(A) f1(B)| |A| |B|. Both estimates must use the same cells.
double chaos_defect(const MarginalEstimate& est2, const MarginalEstimate& est1, const CompactBox& box);

/// Fermionic entropy of the piecewise-constant k=1 estimate; diagnostic only.
double fermionic_entropy(const MarginalEstimate& est1);

/// Bootstrap over snapshots: `resamples` draws with replacement, returning the
/// standard deviation of `stat` across draws.
double bootstrap_sd(const MarginalEstimate& est, int resamples, std::uint64_t seed,
                    const std::function<double(const MarginalEstimate&)>& stat);

/// CSV rows "t,ix,iy,iz,f1_hat".
void write_csv_k1(std::ostream& os, double t, const MarginalEstimate& est, bool header);
/// CSV rows "t,ix1,iy1,iz1,ix2,iy2,iz2,f2_hat"; returns false (and writes only
/// the header) when more than `limit` pairs would be written.
bool write_csv_k2(std::ostream& os, double t, const MarginalEstimate& est, bool header,
                  std::size_t limit);

}  // namespace fermikac
