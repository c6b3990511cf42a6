#include <doctest.h>

#include <cmath>
#include <vector>

#include "fermikac/errors.hpp"
#include "fermikac/harness.hpp"
#include "fermikac/hierarchy.hpp"

using namespace fermikac;

namespace {

DensityField with_alpha(const DensityField& f, double alpha) {
  DensityField g(f.n(), f.half_width(), alpha);
  g.values() = f.values();
  return g;
}

double max_abs(const DensityField& f) {
  double m = 0.0;
  for (double x : f.values()) m = std::max(m, std::abs(x));
  return m;
}

const SphereQuadrature& quad() {
  static const SphereQuadrature q = SphereQuadrature::with_nodes(8);
  return q;
}

}  // namespace

TEST_CASE("C_{1,2} on a tensor square is the classical collision operator") {
  const CrossSectionSpec k;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const DensityField f = random_field(7, 2.0, 0.3, 2.5, seed);
    const DensityField c1 = apply_C1(SymmetricGridFunction::tensor_power(f, 2), k, quad());
    const DensityField classical = collision_operator(with_alpha(f, 0.0), k, quad());
    double diff = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      diff = std::max(diff, std::abs(c1.values()[i] - classical.values()[i]));
    CHECK(diff <= 1e-12 * max_abs(classical));
  }
}

TEST_CASE("C_{k,k+3} annihilates symmetric tensor powers") {
  const CrossSectionSpec k;
  for (std::uint64_t seed : {4u, 5u, 6u}) {
    const DensityField f = random_field(7, 2.0, 0.3, 0.9 / 0.3, seed);
    const NullityResult r1 = check_C3_nullity(f, 1, k, quad());
    CHECK(r1.term_scale > 0.0);
    CHECK(r1.residual <= 1e-12 * r1.term_scale);
    const NullityResult r2 = check_C3_nullity(f, 2, k, quad());
    CHECK(r2.residual <= 1e-12 * r2.term_scale);
  }
}

TEST_CASE("the nullity check detects a non-symmetric input") {
  const CrossSectionSpec k;
  const DensityField g = random_field(7, 2.0, 0.3, 2.5, 7);
  const DensityField h = random_field(7, 2.0, 0.3, 1.5, 8);
  const SymmetricGridFunction broken({g, h, g, h});
  CHECK_FALSE(broken.symmetric());
  CHECK(SymmetricGridFunction::tensor_power(g, 4).symmetric());
  const NullityResult r = evaluate_C3(broken, 1, 0.3, k, quad());
  CHECK(r.residual > 1e-6 * r.term_scale);
}

TEST_CASE("hierarchy closure reproduces the U-U operator") {
  const CrossSectionSpec k;
  for (std::uint64_t seed : {9u, 10u}) {
    const DensityField f = random_field(7, 2.0, 0.3, 0.9 / 0.3, seed);
    const ConsistencyResult c = factorization_consistency(f, k, quad());
    CHECK(c.q_norm > 0.0);
    CHECK(c.relative <= 1e-10);
  }
}

TEST_CASE("node-wise and full-field evaluations agree") {
  const CrossSectionSpec k;
  const DensityField f = random_field(7, 2.0, 0.3, 2.0, 11);
  const auto f2 = SymmetricGridFunction::tensor_power(f, 2);
  const auto f3 = SymmetricGridFunction::tensor_power(f, 3);
  const DensityField c1 = apply_C1(f2, k, quad());
  const DensityField c2 = apply_C2(f3, 0.3, k, quad());
  for (const NodeIndex& v : {NodeIndex{3, 3, 3}, NodeIndex{1, 4, 2}, NodeIndex{0, 6, 5}}) {
    const std::vector<NodeIndex> nodes{v};
    CHECK(apply_C1(f2, nodes, k, quad()) == doctest::Approx(c1(v[0], v[1], v[2])).epsilon(1e-12));
    CHECK(apply_C2(f3, nodes, 0.3, k, quad()) == doctest::Approx(c2(v[0], v[1], v[2])).epsilon(1e-12));
  }
}

TEST_CASE("order mismatches are rejected") {
  const CrossSectionSpec k;
  const DensityField f = random_field(5, 2.0, 0.3, 2.0, 12);
  const std::vector<NodeIndex> one{NodeIndex{2, 2, 2}};
  CHECK_THROWS_AS(apply_C1(SymmetricGridFunction::tensor_power(f, 3), one, k, quad()), ConfigError);
  CHECK_THROWS_AS(apply_C2(SymmetricGridFunction::tensor_power(f, 2), one, 0.3, k, quad()),
                  ConfigError);
}

TEST_CASE("norm scaling ratios are finite and bounded by the kernel mass") {
  const CrossSectionSpec k;
  const DensityField f = random_field(7, 2.0, 0.3, 2.0, 13);
  const NormScalingRow row = norm_scaling(f, k, quad());
  CHECK(row.sup_f == doctest::Approx(2.0));
  CHECK(std::isfinite(row.ratio_c1));
  CHECK(std::isfinite(row.ratio_c2));
  CHECK(row.ratio_c1 > 0.0);
}
