#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "fermikac/errors.hpp"
#include "fermikac/harness.hpp"
#include "fermikac/uu.hpp"

using namespace fermikac;

namespace {

// Trilinear interpolation written out corner by corner, zero outside the grid.
double interp(const DensityField& f, const Vec3& v) {
  const double h = f.spacing();
  double out = 0.0;
  int base[3];
  double frac[3];
  for (int d = 0; d < 3; ++d) {
    const double x = (v(d) + f.half_width()) / h;
    base[d] = static_cast<int>(std::floor(x));
    frac[d] = x - base[d];
  }
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        const int i = base[0] + a, j = base[1] + b, k = base[2] + c;
        if (i < 0 || j < 0 || k < 0 || i >= f.n() || j >= f.n() || k >= f.n()) continue;
        const double w = (a ? frac[0] : 1.0 - frac[0]) * (b ? frac[1] : 1.0 - frac[1]) *
                         (c ? frac[2] : 1.0 - frac[2]);
        out += w * f(i, j, k);
      }
  return out;
}

// Direct double loop over all node pairs and all sphere nodes.
DensityField brute_Q(const DensityField& f, double alpha, const CrossSectionSpec& k,
                     const SphereQuadrature& q) {
  DensityField out(f.n(), f.half_width(), f.alpha());
  const int n = f.n();
  for (int i1 = 0; i1 < n; ++i1)
    for (int j1 = 0; j1 < n; ++j1)
      for (int k1 = 0; k1 < n; ++k1) {
        const Vec3 v1 = f.node(i1, j1, k1);
        const double f1 = f(i1, j1, k1);
        double s = 0.0;
        for (int i2 = 0; i2 < n; ++i2)
          for (int j2 = 0; j2 < n; ++j2)
            for (int k2 = 0; k2 < n; ++k2) {
              const Vec3 v2 = f.node(i2, j2, k2);
              const double f2 = f(i2, j2, k2);
              for (std::size_t m = 0; m < q.size(); ++m) {
                const Vec3& w = q.nodes()[m];
                const double b = eval_kernel(k, v1 - v2, w);
                if (b == 0.0) continue;
                const double p = (v1 - v2).dot(w);
                const double a1 = interp(f, v1 - p * w), a2 = interp(f, v2 + p * w);
                const double gain = a1 * a2 * (1.0 - alpha * f1) * (1.0 - alpha * f2);
                const double loss = f1 * f2 * (1.0 - alpha * a1) * (1.0 - alpha * a2);
                s += f.weight(i2, j2, k2) * q.weights()[m] * b * (gain - loss);
              }
            }
        out(i1, j1, k1) = s;
      }
  return out;
}

double max_abs(const DensityField& f) {
  double m = 0.0;
  for (double x : f.values()) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("density field geometry and interpolation") {
  DensityField f(5, 2.0, 0.2);
  CHECK(f.spacing() == 1.0);
  CHECK(f.node(0, 0, 0).isApprox(Vec3::Constant(-2.0)));
  CHECK(f.node(f.index(4, 2, 1)).isApprox(Vec3(2.0, 0.0, -1.0)));
  f(2, 2, 2) = 1.0;
  CHECK(f.interpolate(Vec3::Zero()) == 1.0);
  CHECK(f.interpolate(Vec3(0.5, 0.0, 0.0)) == doctest::Approx(0.5));
  CHECK(f.interpolate(Vec3(0.5, 0.5, 0.5)) == doctest::Approx(0.125));
  CHECK(f.interpolate(Vec3(5.0, 0.0, 0.0)) == 0.0);
  double w = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 5; ++k) w += f.weight(i, j, k);
  CHECK(w == doctest::Approx(64.0));
  CHECK_THROWS_AS(DensityField(1, 1.0, 0.2), ConfigError);
  CHECK_THROWS_AS(DensityField(5, 1.0, 1.0), ConfigError);
}

TEST_CASE("collision operator matches a direct evaluation") {
  const SphereQuadrature q = SphereQuadrature::with_nodes(8);
  for (double alpha : {0.0, 0.3}) {
    for (std::uint64_t seed : {1u, 2u}) {
      const DensityField f = random_field(7, 1.5, alpha, alpha > 0.0 ? 0.9 / alpha : 1.0, seed);
      for (double m_cut : {1.2, 5.0}) {
        CrossSectionSpec k;
        k.m_cut = m_cut;
        const DensityField fast = collision_operator(f, k, q);
        const DensityField slow = brute_Q(f, alpha, k, q);
        double diff = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i)
          diff = std::max(diff, std::abs(fast.values()[i] - slow.values()[i]));
        CHECK(diff <= 1e-12 * max_abs(slow));
      }
    }
  }
}

TEST_CASE("trivial zeros of the operator") {
  const SphereQuadrature q = SphereQuadrature::with_nodes(32);
  const CrossSectionSpec k;
  DensityField zero(9, 2.0, 0.2);
  CHECK(max_abs(collision_operator(zero, k, q)) == 0.0);
  // Saturated on a ball that contains every reachable post-collision point.
  const double alpha = 0.25;
  const DensityField sat = DensityField::from_function(
      17, 4.0, alpha, [&](const Vec3& v) { return v.norm() <= 3.9 ? 1.0 / alpha : 0.0; });
  const DensityField qs = collision_operator(sat, k, q);
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 17; ++j)
      for (int l = 0; l < 17; ++l)
        if (sat.node(i, j, l).norm() <= 1.0) CHECK(std::abs(qs(i, j, l)) < 1e-14);
}

TEST_CASE("detailed balance of the Fermi-Dirac bracket") {
  const double alpha = 0.2, beta = 1.3, mu = 0.7;
  const auto fd = [&](const Vec3& v) {
    return (1.0 / alpha) / (1.0 + std::exp(beta * (0.5 * v.squaredNorm() - mu)));
  };
  Rng rng(3);
  for (int t = 0; t < 10000; ++t) {
    const Vec3 v1(rng.normal(), rng.normal(), rng.normal()), v2(rng.normal(), rng.normal(), rng.normal());
    const Vec3 w = sample_omega(rng);
    const auto [a, b] = collide(v1, v2, w);
    const double gain = fd(a) * fd(b) * (1.0 - alpha * fd(v1)) * (1.0 - alpha * fd(v2));
    const double loss = fd(v1) * fd(v2) * (1.0 - alpha * fd(a)) * (1.0 - alpha * fd(b));
    CHECK(std::abs(gain - loss) <= 1e-12 * std::max(gain, 1e-300) + 1e-300);
  }
}

TEST_CASE("Fermi-Dirac residual shrinks under refinement") {
  const SphereQuadrature q = SphereQuadrature::with_nodes(32);
  const CrossSectionSpec k;
  double prev = std::numeric_limits<double>::infinity();
  for (int n : {9, 13, 17}) {
    const double mu = fermi_dirac_mu(0.2, 1.0, n, 5.0);
    const DensityField f = fermi_dirac(0.2, 1.0, mu, n, 5.0);
    const double r = max_abs(collision_operator(f, k, q));
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("Fermi-Dirac construction") {
  const double mu = fermi_dirac_mu(0.2, 1.0, 21, 6.0);
  const DensityField f = fermi_dirac(0.2, 1.0, mu, 21, 6.0);
  CHECK(std::abs(moments(f).mass - 1.0) <= 1e-8);
  CHECK(f.max_value() <= 5.0);
  // Zero temperature: the indicator of the ball of radius sqrt(2 mu) times 1/alpha.
  const DensityField cold = fermi_dirac(0.2, 1e4, 2.0, 11, 4.0);
  for (std::size_t i = 0; i < cold.size(); ++i) {
    const double r = cold.node(i).norm();
    if (std::abs(r - 2.0) > 0.05) CHECK(cold.values()[i] == doctest::Approx(r < 2.0 ? 5.0 : 0.0));
  }
}

TEST_CASE("conservative projection removes the moments") {
  const DensityField f = random_field(9, 3.0, 0.2, 4.0, 5);
  const DensityField q = collision_operator(f, CrossSectionSpec{}, SphereQuadrature::with_nodes(32));
  const DensityField c = conservative_projection(q, f);
  const Moments m = moments(c), raw = moments(q);
  const double scale = std::abs(raw.mass) + raw.momentum.norm() + std::abs(raw.energy) + max_abs(q);
  CHECK(std::abs(m.mass) <= 1e-13 * scale);
  CHECK(m.momentum.norm() <= 1e-13 * scale);
  CHECK(std::abs(m.energy) <= 1e-13 * scale);
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f.values()[i] == 0.0) CHECK(c.values()[i] == q.values()[i]);
}

TEST_CASE("time stepping") {
  const CrossSectionSpec k;
  const SphereQuadrature q = SphereQuadrature::with_nodes(32);
  const DensityField f = field_from([](const Vec3& v) { return std::exp(-(v - Vec3(0.8, 0, 0)).squaredNorm()) +
                                                               std::exp(-(v + Vec3(0.8, 0, 0)).squaredNorm()); },
                                    11, 4.0, 0.2);
  CHECK(step(f, 0.0, k, q).values() == f.values());
  const DensityField g = step(f, 0.01, k, q);
  CHECK(std::abs(moments(g).mass - moments(f).mass) <= 1e-8 * moments(f).mass);
  CrossSectionSpec none;
  none.b0 = 0.0;
  CHECK(step(f, 0.1, none, q).values() == f.values());
  const SolveResult r0 = solve(f, 0.0, 0.01, k, q);
  CHECK(r0.snapshots.size() == 1);
}

TEST_CASE("solve: moments, bounds and errors") {
  const CrossSectionSpec k;
  const SphereQuadrature q = SphereQuadrature::with_nodes(32);
  const DensityField f = random_field(11, 4.0, 0.2, (1.0 - 1e-3) / 0.2, 8);
  const SolveResult r = solve(f, 0.2, 0.01, k, q, {0.1});
  CHECK(r.times.size() == 3);
  CHECK(r.times[1] == doctest::Approx(0.1));
  const Moments m0 = r.diagnostics.front().moments;
  for (const auto& d : r.diagnostics) {
    CHECK(std::abs(d.moments.mass - m0.mass) <= 1e-10 * m0.mass);
    CHECK(std::abs(d.moments.energy - m0.energy) <= 1e-10 * m0.energy);
    CHECK(d.bounds.max_value <= 1.0 / 0.2 + 1e-9);
  }
  DensityField bad = f;
  bad.values()[bad.size() / 2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve(bad, 0.1, 0.01, k, q), NumericalError);
  DensityField over = f;
  over.values()[0] = 6.0;
  CHECK_THROWS_AS(solve(over, 0.1, 0.01, k, q), ConfigError);
}

TEST_CASE("stability heuristic") {
  const DensityField f = field_from([](const Vec3& v) { return std::exp(-v.squaredNorm()); }, 11, 4.0, 0.2);
  CrossSectionSpec k;
  const double ball = 4.0 / 3.0 * std::numbers::pi * 8.0;
  const double reach = std::min(f.max_value() * ball, moments(f).mass);
  CHECK(dt_max(f, k) == doctest::Approx(0.1 / (4.0 * std::numbers::pi * reach)));
  k.b0 = 0.0;
  CHECK(std::isinf(dt_max(f, k)));
}
