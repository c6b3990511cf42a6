#include "fermikac/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "fermikac/errors.hpp"

namespace fermikac {

namespace {
// P_n(x) and P_n'(x) by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  const double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}
}  // namespace

GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw ConfigError("gauss_legendre: n must be positive");
  GaussLegendre rule;
  if (n == 1) {
    rule.nodes = {0.0};
    rule.weights = {2.0};
    return rule;
  }
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    double x = eig.eigenvalues()(k);
    for (int it = 0; it < 3; ++it) {
      const auto [p, dp] = legendre(n, x);
      x -= p / dp;
    }
    const auto [p, dp] = legendre(n, x);
    (void)p;
    rule.nodes[k] = x;
    rule.weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  // Exact antisymmetry of the nodes keeps sphere rules antipodally symmetric.
  for (int k = 0; k < n / 2; ++k) {
    const double x = 0.5 * (rule.nodes[n - 1 - k] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[n - 1 - k] + rule.weights[k]);
    rule.nodes[k] = -x;
    rule.nodes[n - 1 - k] = x;
    rule.weights[k] = rule.weights[n - 1 - k] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

SphereQuadrature::SphereQuadrature(int n_theta, int n_phi) : n_theta_(n_theta), n_phi_(n_phi) {
  if (n_theta < 1 || n_phi < 2 || n_phi % 2 != 0) {
    throw ConfigError("sphere quadrature needs n_theta >= 1 and even n_phi >= 2");
  }
  const GaussLegendre gl = gauss_legendre(n_theta);
  const double dphi = 2.0 * std::numbers::pi / n_phi;
  for (int a = 0; a < n_theta; ++a) {
    const double z = gl.nodes[a];
    const double s = std::sqrt(1.0 - z * z);
    for (int b = 0; b < n_phi; ++b) {
      const double phi = (b + 0.5) * dphi;
      nodes_.emplace_back(s * std::cos(phi), s * std::sin(phi), z);
      weights_.push_back(gl.weights[a] * dphi);
      const int a_op = n_theta - 1 - a;
      const int b_op = (b + n_phi / 2) % n_phi;
      antipode_.push_back(a_op * n_phi + b_op);
    }
  }
}

SphereQuadrature SphereQuadrature::with_nodes(int n_omega) {
  if (n_omega < 2) throw ConfigError("uu.n_omega must be at least 2");
  const int n_theta = std::max(1, static_cast<int>(std::lround(std::sqrt(n_omega / 2.0))));
  return SphereQuadrature(n_theta, 2 * n_theta);
}

}  // namespace fermikac
