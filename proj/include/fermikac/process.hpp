#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "fermikac/grid.hpp"
#include "fermikac/kernel.hpp"
#include "fermikac/rng.hpp"

namespace fermikac {

struct SimConfig {
  std::int64_t n_particles = 1000;
  double alpha = 0.2;
  double t_final = 1.0;
  std::uint64_t seed = 1;
  std::vector<double> snapshot_times;
  CrossSectionSpec kernel;

  /// (alpha / n_particles)^(1/3)
  double delta() const;
  CellGrid grid() const { return CellGrid::for_alpha(n_particles, alpha); }
  /// Throws ConfigError.
  void validate() const;
};

struct EventCounters {
  std::uint64_t proposed = 0;
  std::uint64_t kernel_rejected = 0;
  std::uint64_t exclusion_blocked = 0;
  std::uint64_t accepted = 0;

  EventCounters& operator+=(const EventCounters& o);
  friend bool operator==(const EventCounters&, const EventCounters&) = default;
};

/// One realization of the N-particle state: velocities, the occupancy index
/// kept in sync with them, and the process clock.
class ParticleEnsemble {
 public:
  ParticleEnsemble() = default;
  /// Throws AdmissibilityError if two velocities share a cell.
  ParticleEnsemble(const CellGrid& grid, std::vector<Vec3> velocities, double time = 0.0);

  const CellGrid& grid() const { return grid_; }
  std::size_t size() const { return velocities_.size(); }
  const std::vector<Vec3>& velocities() const { return velocities_; }
  const OccupancyMap& occupancy() const { return occupancy_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }
  const EventCounters& counters() const { return counters_; }
  EventCounters& counters() { return counters_; }

  Vec3 total_momentum() const;
  double total_energy() const;  ///< sum |v_i|^2 / 2

  /// Moves particles i and j to the given velocities if the move keeps the
  /// configuration admissible under the occupation rule of the generator;
  /// returns false and changes nothing otherwise.
  bool try_move_pair(std::size_t i, std::size_t j, const Vec3& vi_new, const Vec3& vj_new);

 private:
  CellGrid grid_;
  std::vector<Vec3> velocities_;
  std::vector<CellIndex> cells_;
  OccupancyMap occupancy_;
  double time_ = 0.0;
  EventCounters counters_;
};

struct EventOutcome {
  enum class Kind { NullKernel, ExclusionBlocked, Accepted };
  Kind kind = Kind::NullKernel;
  std::size_t i = 0;
  std::size_t j = 0;
  Vec3 omega = Vec3::Zero();
  /// Pre-event velocities of the pair (set for every outcome that drew a pair).
  Vec3 vi_before = Vec3::Zero();
  Vec3 vj_before = Vec3::Zero();
};

/// Total proposal intensity of the null-collision scheme,
/// (1/N) * N(N-1)/2 * 4 pi * c1 = 2 pi (N-1) c1.
double majorant_rate(std::int64_t n, double c1);

/// One proposal at the majorant rate: uniform unordered pair, uniform omega,
/// thinning by B / b0, then the exclusion test. Landing in either particle's own
/// current cell is blocked, as is landing both particles in one cell.
///
/// For the SmoothRamp kernel B does not depend on omega, so the thinning
/// variate is drawn before omega and omega is drawn only for survivors.
EventOutcome attempt_event(ParticleEnsemble& ens, const CrossSectionSpec& kernel, Rng& rng);

/// Independent cell-count ledger used to audit the exclusion invariant. It uses
/// an ordered map keyed on cells recomputed from velocities, so it shares no
/// state with the ensemble's occupancy index.
class ExclusionAudit {
 public:
  explicit ExclusionAudit(const ParticleEnsemble& ens);
  /// Record that a particle moved from `before` to `after`.
  void move(const CellGrid& grid, const Vec3& before, const Vec3& after);
  std::uint64_t violations() const { return violations_; }
  std::uint64_t checked_events() const { return events_; }
  void count_event() { ++events_; }

 private:
  std::map<CellIndex, int> counts_;
  std::uint64_t violations_ = 0;
  std::uint64_t events_ = 0;
};

struct AdvanceOptions {
  /// If set, every accepted event is replayed into the audit ledger.
  ExclusionAudit* audit = nullptr;
};

/// Runs the null-collision clock up to t_target. Inter-proposal times are
/// Exp(majorant_rate). The clock is left at exactly t_target; by memorylessness
/// of the exponential clock, splitting a run into several advance() calls
/// leaves the law of the process unchanged.
///
/// Thinning a rate-Lambda Poisson stream of uniform (pair, omega) proposals by
/// B/b0 and by the exclusion indicator yields jumps at the rate
/// (1/N) B chi domega per pair, which is the generator of the exclusion
/// process; the rejected proposals are the null events.
void advance(ParticleEnsemble& ens, double t_target, const CrossSectionSpec& kernel, Rng& rng,
             const AdvanceOptions& options = {});

/// Two-particle integrals over the sphere for the exclusion generator, with the
/// exclusion indicator integrated arc by arc.
///
/// In a frame with polar axis along g = v1 - v2, fixing c = cos(theta) puts v1'
/// and v2' on circles; the cell-plane crossings of both circles split the
/// azimuth into arcs on which the indicator is constant. The azimuthal integral
/// is Gauss-Legendre on each arc. The polar integral is split at every c where
/// a circle becomes tangent to a cell plane (where the arc count changes) and
/// at c = 0, and each piece is integrated with an endpoint-clustering map.
/// `order` is the Gauss-Legendre order used on every arc and polar piece.
class ExclusionSphereIntegrator {
 public:
  using Integrand = std::function<double(const Vec3& omega, const Vec3& v1p, const Vec3& v2p)>;

  ExclusionSphereIntegrator(const CellGrid& grid, const CrossSectionSpec& kernel, int order);

  /// Integral over the sphere of B(v1 - v2; w) chi(w) h(w, v1', v2'), where chi
  /// is the product of the exclusion factors for the pair (v1, v2).
  double integrate(const Vec3& v1, const Vec3& v2, const Integrand& h) const;

 private:
  CellGrid grid_;
  CrossSectionSpec kernel_;
  int order_;
};

/// Sum over pairs i<j (one pair at N=2) of the integral of
/// B chi [phi(V') - phi(V)] over the sphere. The generator of the process is
/// this value divided by N = 2. n_omega selects the per-arc order
/// ceil(sqrt(n_omega)). Throws AdmissibilityError for an inadmissible pair.
double generator_apply_k2(const std::function<double(const Vec3&, const Vec3&)>& phi,
                          const Vec3& v1, const Vec3& v2, const CellGrid& grid,
                          const CrossSectionSpec& kernel, int n_omega);

/// Integral of B chi over the sphere for the pair; half of it is the
/// accepted-event rate of an N=2 ensemble sitting at (v1, v2).
double accepted_rate_k2(const Vec3& v1, const Vec3& v2, const CellGrid& grid,
                        const CrossSectionSpec& kernel, int n_omega);

}  // namespace fermikac
