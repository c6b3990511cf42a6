#include "fermikac/hierarchy.hpp"

#include <cmath>
#include <string>

#include "fermikac/errors.hpp"
#include "fermikac/rng.hpp"

namespace fermikac {

SymmetricGridFunction::SymmetricGridFunction(std::vector<DensityField> factors)
    : factors_(std::move(factors)) {
  if (factors_.empty()) throw ConfigError("grid function needs at least one factor");
  for (const auto& f : factors_) {
    if (!f.same_grid(factors_.front())) throw ConfigError("grid function factors use different grids");
  }
}

SymmetricGridFunction SymmetricGridFunction::tensor_power(const DensityField& f, int order) {
  return SymmetricGridFunction(std::vector<DensityField>(static_cast<std::size_t>(order), f));
}

bool SymmetricGridFunction::symmetric() const {
  for (const auto& f : factors_) {
    if (f.values() != factors_.front().values()) return false;
  }
  return true;
}

namespace {

enum class Op { C1, C2, C3 };

struct Sum {
  double value = 0.0;
  double scale = 0.0;
};

// Straightforward evaluation over (i, v_{k+1} node, sphere node) of one of
// the three hierarchy operators at the output nodes.
//
// Point ids used in the slot tables: 0..k-1 the output nodes, k the node
// v_{k+1}, k+1 the post-collision v_i', k+2 the post-collision v_{k+1}'.
Sum evaluate(Op op, const SymmetricGridFunction& F, std::span<const NodeIndex> nodes, double alpha,
             const CrossSectionSpec& kernel, const SphereQuadrature& quad) {
  const int k = static_cast<int>(nodes.size());
  const int extra = op == Op::C1 ? 1 : op == Op::C2 ? 2 : 3;
  if (k < 1 || F.order() != k + extra) {
    throw ConfigError("hierarchy operator: input of order " + std::to_string(F.order()) +
                      " does not match k + " + std::to_string(extra) + " with k = " + std::to_string(k));
  }
  const DensityField& g = F.grid();
  const int n = g.n();
  const double h = g.spacing();
  const int reach = static_cast<int>(std::ceil(kernel.m_cut / h)) + 1;
  const bool sym = F.symmetric();
  const int n_fields = sym ? 1 : F.order();
  const int n_points = k + 3;
  // val[s * n_points + p]
  std::vector<double> val(static_cast<std::size_t>(n_fields * n_points));
  auto at = [&](int slot, int p) { return val[static_cast<std::size_t>((sym ? 0 : slot) * n_points + p)]; };

  auto product = [&](std::span<const int> slots) {
    double x = 1.0;
    for (std::size_t s = 0; s < slots.size(); ++s) x *= at(static_cast<int>(s), slots[s]);
    return x;
  };

  Sum total;
  std::vector<int> gain(static_cast<std::size_t>(F.order())), loss(gain.size());
  for (int i = 0; i < k; ++i) {
    const NodeIndex& ni = nodes[static_cast<std::size_t>(i)];
    const Vec3 vi = g.node(ni[0], ni[1], ni[2]);
    for (int fi = 0; fi < n_fields; ++fi) {
      for (int p = 0; p < k; ++p) {
        const NodeIndex& np = nodes[static_cast<std::size_t>(p)];
        val[static_cast<std::size_t>(fi * n_points + p)] = F.factor(fi)(np[0], np[1], np[2]);
      }
    }
    for (int dx = -reach; dx <= reach; ++dx)
      for (int dy = -reach; dy <= reach; ++dy)
        for (int dz = -reach; dz <= reach; ++dz) {
          const int a = ni[0] + dx, b = ni[1] + dy, c = ni[2] + dz;
          if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n) continue;
          const Vec3 vk = g.node(a, b, c);
          const Vec3 rel = vi - vk;
          if (rel.norm() > kernel.m_cut) continue;
          const double wk = g.weight(a, b, c);
          for (int fi = 0; fi < n_fields; ++fi) val[static_cast<std::size_t>(fi * n_points + k)] = F.factor(fi)(a, b, c);
          for (std::size_t q = 0; q < quad.size(); ++q) {
            const Vec3& w = quad.nodes()[q];
            const double B = eval_kernel(kernel, rel, w);
            if (B == 0.0) continue;
            const auto [vip, vkp] = collide(vi, vk, w);
            for (int fi = 0; fi < n_fields; ++fi) {
              val[static_cast<std::size_t>(fi * n_points + k + 1)] = F.factor(fi).interpolate(vip);
              val[static_cast<std::size_t>(fi * n_points + k + 2)] = F.factor(fi).interpolate(vkp);
            }
            for (int s = 0; s < k; ++s) {
              gain[static_cast<std::size_t>(s)] = s == i ? k + 1 : s;
              loss[static_cast<std::size_t>(s)] = s;
            }
            gain[static_cast<std::size_t>(k)] = k + 2;
            loss[static_cast<std::size_t>(k)] = k;
            const double bw = B * wk * quad.weights()[q];
            double v = 0.0, sc = 0.0;
            if (op == Op::C1) {
              const double gp = product(gain), lp = product(loss);
              v = gp - lp;
              sc = std::abs(gp) + std::abs(lp);
            } else if (op == Op::C2) {
              gain[static_cast<std::size_t>(k + 1)] = i;
              const double t_a = product(gain);
              gain[static_cast<std::size_t>(k + 1)] = k;
              const double t_b = product(gain);
              loss[static_cast<std::size_t>(k + 1)] = k + 1;
              const double t_c = product(loss);
              loss[static_cast<std::size_t>(k + 1)] = k + 2;
              const double t_d = product(loss);
              v = -alpha * (t_a + t_b - t_c - t_d);
              sc = alpha * (std::abs(t_a) + std::abs(t_b) + std::abs(t_c) + std::abs(t_d));
            } else {
              gain[static_cast<std::size_t>(k + 1)] = k;
              gain[static_cast<std::size_t>(k + 2)] = i;
              loss[static_cast<std::size_t>(k + 1)] = k + 2;
              loss[static_cast<std::size_t>(k + 2)] = k + 1;
              const double t1 = product(gain), t2 = product(loss);
              v = alpha * alpha * (t1 - t2);
              sc = alpha * alpha * (std::abs(t1) + std::abs(t2));
            }
            total.value += bw * v;
            total.scale += bw * sc;
          }
        }
  }
  return total;
}

DensityField evaluate_field(Op op, const SymmetricGridFunction& F, double alpha,
                            const CrossSectionSpec& kernel, const SphereQuadrature& quad,
                            DensityField* scale = nullptr) {
  const DensityField& g = F.grid();
  DensityField out(g.n(), g.half_width(), g.alpha());
  if (scale) *scale = out;
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < g.n(); ++j)
      for (int k = 0; k < g.n(); ++k) {
        const NodeIndex node{i, j, k};
        const Sum s = evaluate(op, F, std::span<const NodeIndex>(&node, 1), alpha, kernel, quad);
        out(i, j, k) = s.value;
        if (scale) (*scale)(i, j, k) = s.scale;
      }
  return out;
}

double max_abs(const DensityField& f) {
  double m = 0.0;
  for (double x : f.values()) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double apply_C1(const SymmetricGridFunction& fk1, std::span<const NodeIndex> nodes,
                const CrossSectionSpec& kernel, const SphereQuadrature& quad) {
  return evaluate(Op::C1, fk1, nodes, 0.0, kernel, quad).value;
}

double apply_C2(const SymmetricGridFunction& fk2, std::span<const NodeIndex> nodes, double alpha,
                const CrossSectionSpec& kernel, const SphereQuadrature& quad) {
  return evaluate(Op::C2, fk2, nodes, alpha, kernel, quad).value;
}

DensityField apply_C1(const SymmetricGridFunction& f2, const CrossSectionSpec& kernel,
                      const SphereQuadrature& quad) {
  return evaluate_field(Op::C1, f2, 0.0, kernel, quad);
}

DensityField apply_C2(const SymmetricGridFunction& f3, double alpha, const CrossSectionSpec& kernel,
                      const SphereQuadrature& quad) {
  return evaluate_field(Op::C2, f3, alpha, kernel, quad);
}

NullityResult evaluate_C3(const SymmetricGridFunction& fk3, int k, double alpha,
                          const CrossSectionSpec& kernel, const SphereQuadrature& quad) {
  if (k != 1 && k != 2) throw ConfigError("C3 nullity check supports k = 1 or 2");
  NullityResult r;
  if (k == 1) {
    DensityField scale;
    const DensityField v = evaluate_field(Op::C3, fk3, alpha, kernel, quad, &scale);
    r.residual = max_abs(v);
    r.term_scale = max_abs(scale);
    return r;
  }
  const int n = fk3.grid().n();
  Rng rng(0x5eed);
  auto pick = [&] {
    return NodeIndex{static_cast<int>(rng.index(static_cast<std::uint64_t>(n))),
                     static_cast<int>(rng.index(static_cast<std::uint64_t>(n))),
                     static_cast<int>(rng.index(static_cast<std::uint64_t>(n)))};
  };
  for (int s = 0; s < 32; ++s) {
    const NodeIndex pair[2] = {pick(), pick()};
    const Sum v = evaluate(Op::C3, fk3, pair, alpha, kernel, quad);
    r.residual = std::max(r.residual, std::abs(v.value));
    r.term_scale = std::max(r.term_scale, v.scale);
  }
  return r;
}

NullityResult check_C3_nullity(const DensityField& f, int k, const CrossSectionSpec& kernel,
                               const SphereQuadrature& quad) {
  return evaluate_C3(SymmetricGridFunction::tensor_power(f, k + 3), k, f.alpha(), kernel, quad);
}

ConsistencyResult factorization_consistency(const DensityField& f, const CrossSectionSpec& kernel,
                                            const SphereQuadrature& quad) {
  DensityField s1, s2;
  const DensityField c1 =
      evaluate_field(Op::C1, SymmetricGridFunction::tensor_power(f, 2), 0.0, kernel, quad, &s1);
  const DensityField c2 =
      evaluate_field(Op::C2, SymmetricGridFunction::tensor_power(f, 3), f.alpha(), kernel, quad, &s2);
  const DensityField q = collision_operator(f, kernel, quad);
  ConsistencyResult r;
  for (std::size_t i = 0; i < q.size(); ++i) {
    r.absolute = std::max(r.absolute, std::abs(c1.values()[i] + c2.values()[i] - q.values()[i]));
    r.q_norm = std::max(r.q_norm, std::abs(q.values()[i]));
    r.term_scale = std::max(r.term_scale, s1.values()[i] + s2.values()[i]);
  }
  r.relative = r.q_norm > 0.0 ? r.absolute / r.q_norm : 0.0;
  return r;
}

NormScalingRow norm_scaling(const DensityField& f, const CrossSectionSpec& kernel,
                            const SphereQuadrature& quad) {
  NormScalingRow row;
  row.sup_f = max_abs(f);
  if (row.sup_f == 0.0) return row;
  const double c1 = max_abs(apply_C1(SymmetricGridFunction::tensor_power(f, 2), kernel, quad));
  row.ratio_c1 = c1 / std::pow(row.sup_f, 2);
  if (f.alpha() > 0.0) {
    const double c2 = max_abs(apply_C2(SymmetricGridFunction::tensor_power(f, 3), f.alpha(), kernel, quad));
    row.ratio_c2 = c2 / (f.alpha() * std::pow(row.sup_f, 3));
  }
  return row;
}

}  // namespace fermikac
