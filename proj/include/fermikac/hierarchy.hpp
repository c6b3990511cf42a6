#pragma once

#include <array>
#include <span>
#include <vector>

#include "fermikac/kernel.hpp"
#include "fermikac/quadrature.hpp"
#include "fermikac/uu.hpp"

namespace fermikac {

/// Order-m function on the product of the velocity grid, kept in factored
/// form F(u_1, ..., u_m) = f_1(u_1) ... f_m(u_m). It is symmetric when all
/// factors coincide (tensor_power); distinct factors give the non-symmetric
/// inputs used to show that the nullity check has power.
class SymmetricGridFunction {
 public:
  explicit SymmetricGridFunction(std::vector<DensityField> factors);
  static SymmetricGridFunction tensor_power(const DensityField& f, int order);

  int order() const { return static_cast<int>(factors_.size()); }
  const DensityField& factor(int s) const { return factors_[static_cast<std::size_t>(s)]; }
  const DensityField& grid() const { return factors_.front(); }
  bool symmetric() const;

 private:
  std::vector<DensityField> factors_;
};

using NodeIndex = std::array<int, 3>;

/// C_{k,k+1} F at the output nodes V_k (k = nodes.size(), F of order k+1):
///   sum_i sum_{v_{k+1}} w sum_q w_q B(v_i - v_{k+1}; w_q) [F(V^{i,k+1}) - F(V)].
/// The sum over v_{k+1} runs over grid nodes, the sphere sum over the rule, and
/// post-collision values are trilinear (DensityField::interpolate).
/// Throws ConfigError on an order mismatch.
double apply_C1(const SymmetricGridFunction& fk1, std::span<const NodeIndex> nodes,
                const CrossSectionSpec& kernel, const SphereQuadrature& quad);
/// C_{k,k+2} F at V_k with prefactor -alpha.
double apply_C2(const SymmetricGridFunction& fk2, std::span<const NodeIndex> nodes, double alpha,
                const CrossSectionSpec& kernel, const SphereQuadrature& quad);

/// k = 1 versions evaluated at every node.
DensityField apply_C1(const SymmetricGridFunction& f2, const CrossSectionSpec& kernel,
                      const SphereQuadrature& quad);
DensityField apply_C2(const SymmetricGridFunction& f3, double alpha, const CrossSectionSpec& kernel,
                      const SphereQuadrature& quad);

struct NullityResult {
  double residual = 0.0;    ///< max over outputs of |C_{k,k+3} F|
  double term_scale = 0.0;  ///< max over outputs of the sum of |individual terms|
};

/// C_{k,k+3} F with prefactor alpha^2, reduced to max-norms over the output
/// nodes: all nodes for k = 1, a fixed sample of node pairs for k = 2.
NullityResult evaluate_C3(const SymmetricGridFunction& fk3, int k, double alpha,
                          const CrossSectionSpec& kernel, const SphereQuadrature& quad);
/// evaluate_C3 on f^{(k+3)}, alpha taken from f.
NullityResult check_C3_nullity(const DensityField& f, int k, const CrossSectionSpec& kernel,
                               const SphereQuadrature& quad);

struct ConsistencyResult {
  double relative = 0.0;    ///< absolute / max|Q|, 0 when both vanish
  double absolute = 0.0;    ///< max |C1 f^2 + C2 f^3 - Q(f)|
  double q_norm = 0.0;      ///< max |Q(f)|
  double term_scale = 0.0;  ///< max of the summed absolute gain and loss terms
};

/// Compares C_{1,2} f^{(2)} + C_{1,3} f^{(3)} with collision_operator(f) on
/// the same grid, kernel and sphere rule.
ConsistencyResult factorization_consistency(const DensityField& f, const CrossSectionSpec& kernel,
                                            const SphereQuadrature& quad);

struct NormScalingRow {
  double sup_f = 0.0;
  double ratio_c1 = 0.0;  ///< sup|C1 f^(k+1)| / (k sup|f^(k+1)|)
  double ratio_c2 = 0.0;  ///< sup|C2 f^(k+2)| / (k alpha sup|f^(k+2)|)
};

/// Operator-norm ratios at k = 1 for the field f.
NormScalingRow norm_scaling(const DensityField& f, const CrossSectionSpec& kernel,
                            const SphereQuadrature& quad);

}  // namespace fermikac
