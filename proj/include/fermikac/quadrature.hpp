#pragma once

#include <vector>

#include "fermikac/kernel.hpp"

namespace fermikac {

struct GaussLegendre {
  std::vector<double> nodes;    ///< ascending, in (-1, 1)
  std::vector<double> weights;  ///< sum to 2
};

/// n-point Gauss-Legendre rule on [-1, 1] (Golub-Welsch, then Newton-polished).
GaussLegendre gauss_legendre(int n);

/// Product rule on the unit sphere: Gauss-Legendre in cos(theta) times the
/// uniform midpoint rule in phi, phi_j = (j + 1/2) 2 pi / n_phi.
///
/// With n_phi even every node has its antipode in the rule with the same
/// weight, so the rule is symmetric under omega -> -omega.
class SphereQuadrature {
 public:
  SphereQuadrature() = default;
  SphereQuadrature(int n_theta, int n_phi);

  /// Rule with about n_omega nodes: n_theta = round(sqrt(n_omega / 2)) and
  /// n_phi = 2 n_theta (n_omega = 32 gives 4 x 8).
  static SphereQuadrature with_nodes(int n_omega);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Vec3>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  /// antipode()[q] is the index of -nodes()[q].
  const std::vector<int>& antipode() const { return antipode_; }
  int n_theta() const { return n_theta_; }
  int n_phi() const { return n_phi_; }

 private:
  int n_theta_ = 0;
  int n_phi_ = 0;
  std::vector<Vec3> nodes_;
  std::vector<double> weights_;
  std::vector<int> antipode_;
};

}  // namespace fermikac
