#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fermikac/grid.hpp"
#include "fermikac/process.hpp"
#include "fermikac/rng.hpp"

namespace fermikac {

/// A one-particle density f_in with compact support.
///
/// `level_quadrature` is a list of (weight, f_in value) pairs such that
/// sum w g(f) approximates the integral of g(f_in(v)) over the support for
/// smooth g; it serves normalization checks and the limit-marginal solve.
struct OneParticleDensity {
  std::string name;
  std::function<double(const Vec3&)> eval;
  std::function<Vec3(Rng&)> sample;
  double sup_bound = 0.0;       ///< certified G with f_in <= G
  Vec3 center = Vec3::Zero();
  double support_radius = 0.0;  ///< f_in = 0 outside the ball (center, radius)
  std::vector<std::pair<double, double>> level_quadrature;

  double operator()(const Vec3& v) const { return eval(v); }
  /// sum w f over the level quadrature; 1 for a normalized density.
  double normalization() const;
  /// Throws ConfigError unless alpha G < 1.
  void require_below_saturation(double alpha) const;
};

/// exp(-|v-c|^2 / 2 s^2) - exp(-R^2 / 2 s^2) on |v - c| < R with R = cutoff * s,
/// normalized; continuous and compactly supported.
OneParticleDensity truncated_maxwellian(double sigma, double cutoff, const Vec3& center = Vec3::Zero());

/// Equal mixture of two truncated Maxwellians centred at -/+ (separation/2) e_x.
OneParticleDensity double_bump(double sigma, double separation, double cutoff);

/// Uniform density on the box [lower, upper).
OneParticleDensity uniform_box(const Vec3& lower, const Vec3& upper);

/// (1/alpha) [F(|v|) - F(R)] on |v| < R with F(r) = 1 / (1 + exp(beta (r^2/2 - mu)))
/// and mu fixed by normalization: a Fermi-Dirac state of mass one, truncated
/// continuously at radius R.
OneParticleDensity truncated_fermi_dirac(double alpha, double beta, double radius);

/// Truncated Maxwellian (sigma 1, cutoff 4), double bump (sigma 0.7,
/// separation 2, cutoff 4), uniform on [0,1]^3, truncated Fermi-Dirac
/// (alpha 0.2, beta 1, radius 5).
std::vector<OneParticleDensity> builtin_profiles();

/// f_1 = f_in / (exp(-a) + alpha f_in): the one-particle limit of the
/// conditioned product measure.
struct LimitMarginal {
  double a_coeff = 0.0;
  double alpha = 0.0;
  std::shared_ptr<const OneParticleDensity> f_in;

  double operator()(const Vec3& v) const {
    const double x = (*f_in)(v);
    return x / (std::exp(-a_coeff) + alpha * x);
  }
  /// Level-quadrature integral of f_1 (1 at the solved a).
  double normalization() const;
};

/// Solves sum w f/(exp(-a) + alpha f) = 1 by bisection on
/// [0, ln(1/(1 - alpha G))] to |residual| <= 1e-10. Throws NumericalError if
/// the bracket does not contain a root.
LimitMarginal solve_a(const OneParticleDensity& f_in, double alpha);

/// Single-site Metropolis chain for the law proportional to
/// chi(admissible) prod f_in(v_i). Each step moves one uniformly chosen
/// particle to a fresh draw from f_in when the result is admissible; since the
/// proposal is the target's own factor, the Metropolis ratio reduces to the
/// admissibility indicator.
class ConditionedProductChain {
 public:
  /// Greedy admissible start: particle by particle, redraw from f_in until it
  /// lands in a free cell. Throws SaturationError after `retry_budget` failed
  /// draws for one particle.
  ConditionedProductChain(const OneParticleDensity& f_in, const CellGrid& grid, Rng& rng,
                          int retry_budget = 10000);

  /// One proposal; returns true when accepted.
  bool step(Rng& rng);
  void run(std::uint64_t steps, Rng& rng) {
    for (std::uint64_t s = 0; s < steps; ++s) step(rng);
  }
  std::uint64_t proposals() const { return proposals_; }
  std::uint64_t accepted() const { return accepted_; }
  const std::vector<Vec3>& velocities() const { return velocities_; }
  const std::vector<CellIndex>& cells() const { return cells_; }
  ParticleEnsemble ensemble() const { return ParticleEnsemble(grid_, velocities_); }

 private:
  const OneParticleDensity* f_in_;
  CellGrid grid_;
  std::vector<Vec3> velocities_;
  std::vector<CellIndex> cells_;
  OccupancyMap occupancy_;
  std::uint64_t proposals_ = 0;
  std::uint64_t accepted_ = 0;
};

/// Sampler A: run the chain for `burn_in` single-site steps from the greedy
/// start (burn_in < 0 selects 10 N).
ParticleEnsemble sample_conditioned_product(const OneParticleDensity& f_in, const SimConfig& cfg,
                                            Rng& rng, std::int64_t burn_in = -1);

/// Fraction of `trials` iid draws of N velocities from f_in that are
/// admissible; estimates Z_N, which lies in [(1 - alpha G)^N, 1].
double exact_rejection_rate(const OneParticleDensity& f_in, const CellGrid& grid,
                            std::uint64_t trials, Rng& rng);

/// Allocation of particles to big cells of side m delta, m = round(delta^-1/2).
struct TwoScalePlan {
  CellGrid grid;
  int ratio = 1;          ///< fine cells per big-cell side
  double big_side = 0.0;  ///< ratio * delta
  std::map<CellIndex, int> counts;

  /// Piecewise-constant one-particle marginal of the sampled law:
  /// count(big cell of v) / (N big_side^3).
  double marginal(const Vec3& v) const;
};

/// Target counts round(N * mass of big cell) with largest-remainder
/// correction so that they sum to N. Throws SaturationError if a count exceeds
/// ratio^3.
TwoScalePlan plan_two_scale(const OneParticleDensity& f_in, const CellGrid& grid);

/// Sampler B: in every big cell, a uniformly random set of distinct fine cells
/// of the planned size, one particle uniform in each; labels shuffled.
ParticleEnsemble sample_two_scale(const TwoScalePlan& plan, Rng& rng);
ParticleEnsemble sample_two_scale(const OneParticleDensity& f_in, const SimConfig& cfg, Rng& rng);

}  // namespace fermikac
