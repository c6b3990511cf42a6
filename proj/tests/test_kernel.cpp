#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fermikac/errors.hpp"
#include "fermikac/kernel.hpp"

using namespace fermikac;

namespace {

Vec3 random_velocity(Rng& rng, double scale) {
  return Vec3(rng.normal(), rng.normal(), rng.normal()) * scale;
}

}  // namespace

TEST_CASE("collide conserves momentum, energy and relative speed") {
  Rng rng(11);
  for (int trial = 0; trial < 20000; ++trial) {
    const double scale = std::pow(10.0, rng.uniform() * 4.0 - 2.0);
    const Vec3 vi = random_velocity(rng, scale);
    const Vec3 vj = random_velocity(rng, scale);
    const Vec3 w = sample_omega(rng);
    const auto [a, b] = collide(vi, vj, w);
    const double e = vi.squaredNorm() + vj.squaredNorm();
    CHECK(((a + b) - (vi + vj)).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + scale));
    CHECK(std::abs(a.squaredNorm() + b.squaredNorm() - e) <= 1e-12 * (1.0 + e));
    CHECK(std::abs((a - b).norm() - (vi - vj).norm()) <= 1e-12 * (1.0 + scale));
    const auto [c, d] = collide(a, b, w);
    CHECK((c - vi).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + scale));
    CHECK((d - vj).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + scale));
  }
}

TEST_CASE("collide swaps the normal component") {
  const Vec3 vi(1.0, 0.0, 0.0), vj(-1.0, 0.0, 0.0);
  const auto [a, b] = collide(vi, vj, Vec3::UnitX());
  CHECK(a.isApprox(vj));
  CHECK(b.isApprox(vi));
  const auto [c, d] = collide(vi, vj, Vec3::UnitY());
  CHECK(c == vi);
  CHECK(d == vj);
}

TEST_CASE("collide_checked rejects non-unit omega") {
  const Vec3 v = Vec3::Ones();
  CHECK_THROWS_AS(collide_checked(v, -v, Vec3(1.0, 1e-5, 0.0)), std::invalid_argument);
  CHECK_NOTHROW(collide_checked(v, -v, Vec3::UnitZ()));
}

TEST_CASE("smooth ramp kernel") {
  CrossSectionSpec k;
  CHECK(k.b0 == 1.0);
  CHECK(k.m_cut == 2.0);
  CHECK(smooth_ramp(1.0, 2.0, 0.0) == 1.0);
  CHECK(smooth_ramp(1.0, 2.0, 1.0) == doctest::Approx(0.5));
  CHECK(smooth_ramp(1.0, 2.0, 2.0) == 0.0);
  CHECK(smooth_ramp(1.0, 2.0, 3.0) == 0.0);
  CHECK(eval_kernel(k, Vec3(0.5, 0.0, 0.0), Vec3::UnitZ()) == doctest::Approx(0.75));
  CHECK(eval_kernel(k, Vec3(2.5, 0.0, 0.0), Vec3::UnitZ()) == 0.0);
}

TEST_CASE("kernel validation and names") {
  CrossSectionSpec k;
  k.b0 = -1.0;
  CHECK_THROWS_AS(k.validate(), ConfigError);
  k.b0 = 0.0;
  CHECK_NOTHROW(k.validate());
  k.m_cut = 0.0;
  CHECK_THROWS_AS(k.validate(), ConfigError);
  k = CrossSectionSpec{};
  k.form = KernelForm::Custom;
  CHECK_THROWS_AS(k.validate(), ConfigError);
  CHECK(kernel_form_from_string(to_string(KernelForm::SmoothRamp)) == KernelForm::SmoothRamp);
  CHECK(kernel_form_from_string(to_string(KernelForm::Custom)) == KernelForm::Custom);
  CHECK_THROWS_AS(kernel_form_from_string("hard_sphere"), ConfigError);
}

TEST_CASE("sample_omega is unit and isotropic") {
  Rng rng(3);
  Vec3 mean = Vec3::Zero();
  double zz = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const Vec3 w = sample_omega(rng);
    CHECK(std::abs(w.norm() - 1.0) <= kUnitTolerance);
    mean += w;
    zz += w.z() * w.z();
  }
  mean /= n;
  // Var of each component is 1/3; 5 standard errors.
  CHECK(mean.cwiseAbs().maxCoeff() < 5.0 * std::sqrt(1.0 / 3.0 / n));
  CHECK(zz / n == doctest::Approx(1.0 / 3.0).epsilon(0.01));
}

TEST_CASE("Born kernel is bounded, cut off, and vanishes on the forward hemisphere") {
  const CrossSectionSpec k = born_gaussian_kernel(1.0, 2.0, 1.0);
  CHECK_NOTHROW(k.validate());
  Rng rng(5);
  for (int i = 0; i < 5000; ++i) {
    const Vec3 g = Vec3(rng.normal(), rng.normal(), rng.normal());
    const Vec3 w = sample_omega(rng);
    const double b = eval_kernel(k, g, w);
    CHECK(b >= 0.0);
    CHECK(b <= k.b0);
    if (g.dot(w) > 0.0) CHECK(b == 0.0);
    if (g.norm() > k.m_cut) CHECK(b == 0.0);
  }
  // omega = -g_hat: p = -|g| and g - omega p = 0, so B = |g| (phi(|g|) - 1)^2 b0 / m_cut.
  const Vec3 g(1.0, 0.0, 0.0);
  const double expect = 0.5 * std::pow(std::exp(-0.5) - 1.0, 2);
  CHECK(eval_kernel(k, g, -Vec3::UnitX()) == doctest::Approx(expect).epsilon(1e-12));
}
