#include "fermikac/kernel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fermikac/errors.hpp"

namespace fermikac {

std::pair<Vec3, Vec3> collide_checked(const Vec3& vi, const Vec3& vj, const Vec3& omega) {
  if (std::abs(omega.norm() - 1.0) > kUnitTolerance) {
    throw std::invalid_argument("collide: omega is not a unit vector");
  }
  return collide(vi, vj, omega);
}

void CrossSectionSpec::validate() const {
  if (!(b0 >= 0.0) || !std::isfinite(b0)) throw ConfigError("kernel.b0 must be non-negative");
  if (!(m_cut > 0.0) || !std::isfinite(m_cut)) throw ConfigError("kernel.m_cut must be positive");
  if (form == KernelForm::Custom && !custom) {
    throw ConfigError("kernel.form=custom requires a kernel callable");
  }
}

std::string to_string(KernelForm form) {
  return form == KernelForm::SmoothRamp ? "smooth_ramp" : "custom";
}

KernelForm kernel_form_from_string(const std::string& name) {
  if (name == "smooth_ramp" || name == "SmoothRamp") return KernelForm::SmoothRamp;
  if (name == "custom" || name == "Custom") return KernelForm::Custom;
  throw ConfigError("unknown kernel.form '" + name + "'");
}

double eval_kernel(const CrossSectionSpec& spec, const Vec3& v_rel, const Vec3& omega) {
  const double speed = v_rel.norm();
  if (speed > spec.m_cut) return 0.0;
  if (spec.form == KernelForm::Custom) return spec.custom(v_rel, omega);
  return smooth_ramp(spec.b0, spec.m_cut, speed);
}

Vec3 sample_omega(Rng& rng) {
  const double z = 2.0 * rng.uniform() - 1.0;
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  Vec3 w(s * std::cos(phi), s * std::sin(phi), z);
  return w / w.norm();
}

CrossSectionSpec born_gaussian_kernel(double b0, double m_cut, double range) {
  CrossSectionSpec spec;
  spec.b0 = b0;
  spec.m_cut = m_cut;
  spec.form = KernelForm::Custom;
  // Fourier transform of exp(-|x|^2 / (2 range^2)), up to a constant.
  auto phi_hat = [range](double k) { return std::exp(-0.5 * range * range * k * k); };
  spec.custom = [=](const Vec3& v_rel, const Vec3& omega) {
    const double proj = v_rel.dot(omega);
    if (proj > 0.0) return 0.0;
    const double k = std::abs(proj);
    const double k_perp = std::sqrt(std::max(0.0, v_rel.squaredNorm() - proj * proj));
    const double diff = phi_hat(k) - phi_hat(k_perp);
    return b0 / m_cut * k * diff * diff;
  };
  return spec;
}

}  // namespace fermikac
