#pragma once

#include <array>
#include <functional>
#include <vector>

#include "fermikac/kernel.hpp"
#include "fermikac/quadrature.hpp"

namespace fermikac {

/// Nodal values on the uniform grid -L + i h, i = 0..n-1, h = 2L/(n-1), in
/// each coordinate. Off-grid values are trilinear in the nodal values, with the
/// nodal values extended by zero outside the box.
class DensityField {
 public:
  DensityField() = default;
  DensityField(int n, double half_width, double alpha);

  /// Samples fn at the nodes.
  static DensityField from_function(int n, double half_width, double alpha,
                                    const std::function<double(const Vec3&)>& fn);

  int n() const { return n_; }
  double half_width() const { return half_width_; }
  double spacing() const { return h_; }
  double alpha() const { return alpha_; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
  }
  double& operator()(int i, int j, int k) { return values_[index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return values_[index(i, j, k)]; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  Vec3 node(int i, int j, int k) const {
    return {-half_width_ + i * h_, -half_width_ + j * h_, -half_width_ + k * h_};
  }
  Vec3 node(std::size_t flat) const;
  /// Product trapezoid weight of node (i, j, k).
  double weight(int i, int j, int k) const {
    return weight_1d(i) * weight_1d(j) * weight_1d(k);
  }
  double weight_1d(int i) const { return (i == 0 || i == n_ - 1) ? 0.5 * h_ : h_; }

  double interpolate(const Vec3& v) const;
  double max_value() const;
  double min_value() const;

  bool same_grid(const DensityField& o) const {
    return n_ == o.n_ && half_width_ == o.half_width_;
  }

 private:
  int n_ = 0;
  double half_width_ = 0.0;
  double h_ = 0.0;
  double alpha_ = 0.0;
  std::vector<double> values_;
};

/// Trapezoid moments: mass, momentum, and energy (|v|^2 / 2).
struct Moments {
  double mass = 0.0;
  Vec3 momentum = Vec3::Zero();
  double energy = 0.0;
};
Moments moments(const DensityField& f);

/// -sum w [f ln f + (1/alpha)(1 - alpha f) ln(1 - alpha f)]; diagnostic only.
double fermionic_entropy(const DensityField& f);

/// Discrete fermionic collision operator at every node:
///   Q(v1) = sum_{v2} w2 sum_q w_q B(v1 - v2; w_q)
///           [f1' f2' (1 - a f1)(1 - a f2) - f1 f2 (1 - a f1')(1 - a f2')],
/// with post-collision values from DensityField::interpolate.
///
/// The node sum is organized over lattice offsets G = I1 - I2 with |G h| below
/// the kernel cutoff. Each unordered node pair is visited once (the bracket is
/// symmetric under exchanging the two particles together with their
/// post-collision partners) and each antipodal pair of sphere nodes once (w and
/// -w give the same post-collision velocities). For every (G, w) the
/// post-collision points sit at fixed lattice offsets from I1, so the trilinear
/// weights are computed once and the node loop runs over a zero-padded array.
class CollisionOperator {
 public:
  CollisionOperator(int n, double half_width, const CrossSectionSpec& kernel,
                    const SphereQuadrature& quad);

  DensityField apply(const DensityField& f) const;
  std::size_t stencil_size() const { return entries_.size(); }

 private:
  struct Entry {
    std::array<int, 3> g;
    double coef;
    std::array<int, 3> base1, base2;
    std::array<double, 3> frac1, frac2;
  };
  int n_;
  double half_width_;
  int pad_;
  std::vector<Entry> entries_;
};

DensityField collision_operator(const DensityField& f, const CrossSectionSpec& kernel,
                                const SphereQuadrature& quad);

/// Removes the mass, momentum and energy content of q by a weighted projection:
///   q_c = q - d * (lambda . phi),  phi = (1, v, |v|^2),  d = max(0, f (1 - a f)),
/// with lambda solving the 5x5 system that zeroes the trapezoid moments of q_c.
/// The weight d vanishes where f = 0 or f = 1/alpha, so the correction never
/// pushes a node across either bound by itself.
DensityField conservative_projection(const DensityField& q, const DensityField& f);

/// Nodes outside [0, 1/alpha] after a step (reported, never clamped).
struct BoundReport {
  std::size_t below_zero = 0;
  std::size_t above_bound = 0;
  double max_value = 0.0;
  double min_value = 0.0;
};
BoundReport bound_report(const DensityField& f);

/// Stability heuristic dt_max = 0.1 / (b0 4 pi min(f_max (4/3) pi M^3, mass)).
double dt_max(const DensityField& f, const CrossSectionSpec& kernel);

struct StepOptions {
  bool conservative = true;  ///< apply conservative_projection to each stage
};

/// Explicit midpoint step with a prebuilt operator.
DensityField step(const DensityField& f, double dt, const CollisionOperator& op,
                  const StepOptions& options = {});
DensityField step(const DensityField& f, double dt, const CrossSectionSpec& kernel,
                  const SphereQuadrature& quad, const StepOptions& options = {});

struct SolveDiagnostics {
  int step = 0;
  double time = 0.0;
  Moments moments;
  BoundReport bounds;
  bool dt_exceeds_heuristic = false;
};

struct SolveResult {
  std::vector<double> times;
  std::vector<DensityField> snapshots;
  std::vector<SolveDiagnostics> diagnostics;  ///< one per step, plus step 0
};

/// Fixed-step integration from t = 0 to t_final. Snapshots are taken at the
/// step nearest each requested time (t = 0 and t_final are always included).
/// Throws NumericalError naming the step at the first non-finite value.
SolveResult solve(const DensityField& f0, double t_final, double dt,
                  const CrossSectionSpec& kernel, const SphereQuadrature& quad,
                  const std::vector<double>& snapshot_times = {},
                  const StepOptions& options = {});

/// (1/alpha) / (1 + exp(beta (|v|^2/2 - mu))) at the grid nodes.
DensityField fermi_dirac(double alpha, double beta, double mu, int n, double half_width);

/// mu such that the trapezoid mass of fermi_dirac equals `mass`, by bisection.
double fermi_dirac_mu(double alpha, double beta, int n, double half_width, double mass = 1.0);

}  // namespace fermikac
