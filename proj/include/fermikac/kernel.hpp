#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <utility>

#include "fermikac/rng.hpp"

namespace fermikac {

using Vec3 = Eigen::Vector3d;

/// Tolerance on |omega| - 1 accepted by collide().
inline constexpr double kUnitTolerance = 1e-12;

/// Elastic binary collision with scattering vector omega:
///   v_i' = v_i - omega [(v_i - v_j) . omega]
///   v_j' = v_j + omega [(v_i - v_j) . omega]
/// The map is an involution for fixed omega and conserves momentum, energy and
/// relative speed. omega must be a unit vector (checked in debug builds by
/// callers through collide_checked()).
template <typename DerivedI, typename DerivedJ, typename DerivedW>
auto collide(const Eigen::MatrixBase<DerivedI>& vi, const Eigen::MatrixBase<DerivedJ>& vj,
             const Eigen::MatrixBase<DerivedW>& omega) {
  using Scalar = typename DerivedI::Scalar;
  using V = Eigen::Matrix<Scalar, 3, 1>;
  const Scalar proj = (vi - vj).dot(omega);
  V out_i = vi - proj * omega;
  V out_j = vj + proj * omega;
  return std::pair<V, V>{out_i, out_j};
}

/// collide() with the unit-vector precondition enforced; throws
/// std::invalid_argument when | |omega| - 1 | > 1e-12.
std::pair<Vec3, Vec3> collide_checked(const Vec3& vi, const Vec3& vj, const Vec3& omega);

enum class KernelForm { SmoothRamp, Custom };

/// Bounded, compactly supported collision kernel B(v; omega).
///
/// SmoothRamp is b0 * max(0, 1 - |v|/m_cut). Custom kernels supply `custom`
/// and must respect 0 <= B <= b0 and B = 0 for |v| > m_cut; b0 doubles as the
/// majorant C1 of the null-collision scheme, so an underestimated b0 silently
/// biases the dynamics.
struct CrossSectionSpec {
  double b0 = 1.0;
  double m_cut = 2.0;
  KernelForm form = KernelForm::SmoothRamp;
  std::function<double(const Vec3& v_rel, const Vec3& omega)> custom;

  /// Throws ConfigError on negative b0, non-positive m_cut, or a Custom form without a
  /// callable. b0 = 0 is the no-dynamics sanity mode.
  void validate() const;
};

std::string to_string(KernelForm form);
KernelForm kernel_form_from_string(const std::string& name);

/// Ramp profile b0 * max(0, 1 - speed/m_cut).
template <typename Scalar>
Scalar smooth_ramp(Scalar b0, Scalar m_cut, Scalar speed) {
  const Scalar x = Scalar(1) - speed / m_cut;
  return x > Scalar(0) ? b0 * x : Scalar(0);
}

/// B(v_rel; omega).
double eval_kernel(const CrossSectionSpec& spec, const Vec3& v_rel, const Vec3& omega);

/// Uniform point on the unit sphere, renormalized so that | |w| - 1 | <= 1e-12.
Vec3 sample_omega(Rng& rng);

/// Fermionic Born-approximation kernel for a Gaussian pair potential, as a
/// Custom kernel:
///   (b0 / m_cut) |p| [phi(|p|) - phi(|g - omega p|)]^2,  p = g . omega <= 0,
/// with phi(k) = exp(-range^2 k^2 / 2) and zero on the hemisphere p > 0.
/// The physical form is not compactly supported, so it violates the cutoff
/// hypothesis of the convergence theory; the hard cutoff at m_cut is there only
/// to keep the null-collision majorant b0 valid.
CrossSectionSpec born_gaussian_kernel(double b0, double m_cut, double range);

}  // namespace fermikac
