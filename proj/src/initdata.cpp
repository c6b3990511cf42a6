#include "fermikac/initdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <unordered_set>

#include "fermikac/errors.hpp"
#include "fermikac/quadrature.hpp"

namespace fermikac {

namespace {

constexpr double kPi = std::numbers::pi;

// Composite Gauss-Legendre nodes and weights on [a, b].
std::vector<std::pair<double, double>> composite_gl(double a, double b, int panels, int order) {
  const GaussLegendre gl = gauss_legendre(order);
  std::vector<std::pair<double, double>> out;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    for (int q = 0; q < order; ++q) {
      out.emplace_back(lo + 0.5 * h * (gl.nodes[q] + 1.0), 0.5 * h * gl.weights[q]);
    }
  }
  return out;
}

// Gauss-Legendre on [a, b] after the map x = a + (b-a) I(t), I the regularized
// incomplete beta function of order (4,4). Smooths square-root endpoint
// behaviour.
std::vector<std::pair<double, double>> clustered_gl(double a, double b, int order) {
  const GaussLegendre gl = gauss_legendre(order);
  std::vector<std::pair<double, double>> out;
  for (int q = 0; q < order; ++q) {
    const double t = 0.5 * (gl.nodes[q] + 1.0);
    const double it = t * t * t * t * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t);
    const double dit = 140.0 * std::pow(t * (1.0 - t), 3);
    out.emplace_back(a + (b - a) * it, 0.5 * gl.weights[q] * dit * (b - a));
  }
  return out;
}

std::vector<std::pair<double, double>> radial_levels(double radius,
                                                     const std::function<double(double)>& f) {
  std::vector<std::pair<double, double>> out;
  for (const auto& [r, w] : composite_gl(0.0, radius, 32, 16)) {
    out.emplace_back(4.0 * kPi * r * r * w, f(r));
  }
  return out;
}

Vec3 uniform_in_ball(Rng& rng, double radius) {
  while (true) {
    const Vec3 u(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
    if (u.squaredNorm() < 1.0) return radius * u;
  }
}

// Unit-mass truncated Maxwellian profile centred at the origin.
struct Bump {
  double sigma, radius, floor_value, norm;
  explicit Bump(double s, double cutoff) : sigma(s), radius(cutoff * s) {
    floor_value = std::exp(-0.5 * cutoff * cutoff);
    const double radial = s * s * s *
                          (std::sqrt(kPi / 2.0) * std::erf(cutoff / std::sqrt(2.0)) -
                           cutoff * std::exp(-0.5 * cutoff * cutoff));
    norm = 4.0 * kPi * radial - 4.0 / 3.0 * kPi * std::pow(radius, 3) * floor_value;
  }
  double at_r2(double r2) const {
    if (r2 >= radius * radius) return 0.0;
    return (std::exp(-0.5 * r2 / (sigma * sigma)) - floor_value) / norm;
  }
  double peak() const { return (1.0 - floor_value) / norm; }
  Vec3 draw(Rng& rng) const {
    while (true) {
      const Vec3 v(sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal());
      const double r2 = v.squaredNorm();
      if (r2 >= radius * radius) continue;
      if (rng.uniform() < 1.0 - std::exp(0.5 * (r2 - radius * radius) / (sigma * sigma))) return v;
    }
  }
};

}  // namespace

double OneParticleDensity::normalization() const {
  double s = 0.0;
  for (const auto& [w, f] : level_quadrature) s += w * f;
  return s;
}

void OneParticleDensity::require_below_saturation(double alpha) const {
  if (!(alpha * sup_bound < 1.0)) {
    throw ConfigError("profile '" + name + "': alpha * G = " + std::to_string(alpha * sup_bound) +
                      " is not below 1");
  }
}

OneParticleDensity truncated_maxwellian(double sigma, double cutoff, const Vec3& center) {
  if (!(sigma > 0.0 && cutoff > 0.0)) throw ConfigError("truncated_maxwellian: bad parameters");
  const Bump bump(sigma, cutoff);
  OneParticleDensity d;
  d.name = "maxwellian";
  d.eval = [bump, center](const Vec3& v) { return bump.at_r2((v - center).squaredNorm()); };
  d.sample = [bump, center](Rng& rng) { return Vec3(center + bump.draw(rng)); };
  d.sup_bound = bump.peak();
  d.center = center;
  d.support_radius = bump.radius;
  d.level_quadrature = radial_levels(bump.radius, [bump](double r) { return bump.at_r2(r * r); });
  return d;
}

OneParticleDensity double_bump(double sigma, double separation, double cutoff) {
  if (!(sigma > 0.0 && cutoff > 0.0 && separation >= 0.0)) {
    throw ConfigError("double_bump: bad parameters");
  }
  const Bump bump(sigma, cutoff);
  const double c = 0.5 * separation;
  auto f_xr = [bump, c](double x, double rho2) {
    return 0.5 * bump.at_r2((x - c) * (x - c) + rho2) + 0.5 * bump.at_r2((x + c) * (x + c) + rho2);
  };
  OneParticleDensity d;
  d.name = "double_bump";
  d.eval = [f_xr](const Vec3& v) { return f_xr(v.x(), v.y() * v.y() + v.z() * v.z()); };
  d.sample = [bump, c](Rng& rng) {
    const double shift = rng.uniform() < 0.5 ? c : -c;
    return Vec3(bump.draw(rng) + Vec3(shift, 0.0, 0.0));
  };
  d.center = Vec3::Zero();
  d.support_radius = c + bump.radius;

  // The maximum lies on the x axis between the centres: moving off the axis
  // or outward increases the distance to both centres.
  const double R = bump.radius;
  double best_x = 0.0, best = 0.0;
  constexpr int kScan = 20000;
  for (int s = 0; s <= kScan; ++s) {
    const double x = c * s / kScan;
    const double v = f_xr(x, 0.0);
    if (v > best) best = v, best_x = x;
  }
  double lo = std::max(0.0, best_x - c / kScan), hi = std::min(c, best_x + c / kScan);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100 && hi > lo; ++it) {
    const double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    if (f_xr(x1, 0.0) < f_xr(x2, 0.0)) lo = x1; else hi = x2;
  }
  best = std::max({best, f_xr(0.5 * (lo + hi), 0.0), f_xr(c, 0.0), f_xr(0.0, 0.0)});
  d.sup_bound = best * (1.0 + 1e-9);

  // Axisymmetric level quadrature: pieces in x split where a ball boundary
  // starts or ends, pieces in rho split at each ball's boundary.
  std::vector<double> xs = {-c - R, -c + R, c - R, c + R};
  std::sort(xs.begin(), xs.end());
  for (std::size_t p = 0; p + 1 < xs.size(); ++p) {
    if (xs[p + 1] - xs[p] <= 1e-15) continue;
    for (const auto& [x, wx] : clustered_gl(xs[p], xs[p + 1], 48)) {
      std::vector<double> rs = {0.0};
      for (double cc : {-c, c}) {
        const double dx = x - cc;
        if (std::abs(dx) < R) rs.push_back(std::sqrt(R * R - dx * dx));
      }
      std::sort(rs.begin(), rs.end());
      for (std::size_t q = 0; q + 1 < rs.size(); ++q) {
        if (rs[q + 1] - rs[q] <= 0.0) continue;
        for (const auto& [rho, wr] : composite_gl(rs[q], rs[q + 1], 1, 48)) {
          d.level_quadrature.emplace_back(2.0 * kPi * rho * wr * wx, f_xr(x, rho * rho));
        }
      }
    }
  }
  return d;
}

OneParticleDensity uniform_box(const Vec3& lower, const Vec3& upper) {
  if (!(lower.array() < upper.array()).all()) throw ConfigError("uniform_box: empty box");
  const Vec3 ext = upper - lower;
  const double vol = ext.prod();
  OneParticleDensity d;
  d.name = "uniform";
  d.eval = [=](const Vec3& v) {
    return ((v.array() >= lower.array()).all() && (v.array() < upper.array()).all()) ? 1.0 / vol : 0.0;
  };
  d.sample = [=](Rng& rng) {
    while (true) {
      const Vec3 v = lower + Vec3(rng.uniform() * ext.x(), rng.uniform() * ext.y(), rng.uniform() * ext.z());
      if ((v.array() < upper.array()).all()) return v;
    }
  };
  d.sup_bound = 1.0 / vol;
  d.center = 0.5 * (lower + upper);
  d.support_radius = 0.5 * ext.norm();
  d.level_quadrature = {{vol, 1.0 / vol}};
  return d;
}

OneParticleDensity truncated_fermi_dirac(double alpha, double beta, double radius) {
  if (!(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && radius > 0.0)) {
    throw ConfigError("truncated_fermi_dirac: bad parameters");
  }
  auto occ = [beta](double r, double mu) { return 1.0 / (1.0 + std::exp(beta * (0.5 * r * r - mu))); };
  auto mass = [&](double mu) {
    double s = 0.0;
    for (const auto& [w, v] : radial_levels(radius, [&](double r) { return occ(r, mu) - occ(radius, mu); }))
      s += w * v;
    return s / alpha;
  };
  double lo = -1.0, hi = 0.0;
  for (int it = 0; mass(lo) > 1.0; ++it) {
    if (it > 200) throw NumericalError("truncated_fermi_dirac: cannot bracket mu");
    lo = 2.0 * lo - 1.0;
  }
  for (int it = 0; mass(hi) < 1.0; ++it) {
    const double next = 2.0 * hi + 1.0;
    if (it > 60 || mass(next) < mass(hi)) {
      throw ConfigError("truncated_fermi_dirac: unit mass not reachable below saturation");
    }
    lo = hi;
    hi = next;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) < 1.0 ? lo : hi) = mid;
  }
  const double mu = 0.5 * (lo + hi);
  const double edge = occ(radius, mu);
  auto f_r = [=](double r) { return r < radius ? (occ(r, mu) - edge) / alpha : 0.0; };
  OneParticleDensity d;
  d.name = "fermi_dirac";
  d.eval = [f_r](const Vec3& v) { return f_r(v.norm()); };
  d.sup_bound = f_r(0.0);
  const double g = d.sup_bound;
  d.sample = [f_r, g, radius](Rng& rng) {
    while (true) {
      const Vec3 v = uniform_in_ball(rng, radius);
      if (rng.uniform() * g < f_r(v.norm())) return v;
    }
  };
  d.support_radius = radius;
  d.level_quadrature = radial_levels(radius, f_r);
  return d;
}

std::vector<OneParticleDensity> builtin_profiles() {
  return {truncated_maxwellian(1.0, 4.0), double_bump(0.7, 2.0, 4.0),
          uniform_box(Vec3::Zero(), Vec3::Ones()), truncated_fermi_dirac(0.2, 1.0, 5.0)};
}

double LimitMarginal::normalization() const {
  double s = 0.0;
  const double ea = std::exp(-a_coeff);
  for (const auto& [w, f] : f_in->level_quadrature) s += w * f / (ea + alpha * f);
  return s;
}

LimitMarginal solve_a(const OneParticleDensity& f_in, double alpha) {
  if (!(alpha >= 0.0 && alpha * f_in.sup_bound < 1.0)) {
    throw ConfigError("solve_a: need 0 <= alpha and alpha G < 1");
  }
  LimitMarginal lm;
  lm.alpha = alpha;
  lm.f_in = std::make_shared<const OneParticleDensity>(f_in);
  auto residual = [&](double a) {
    lm.a_coeff = a;
    return lm.normalization() - 1.0;
  };
  double lo = 0.0, hi = -std::log1p(-alpha * f_in.sup_bound);
  constexpr double kTol = 1e-10;
  const double r_lo = residual(lo), r_hi = residual(hi);
  if (std::abs(r_lo) <= kTol) {
    lm.a_coeff = lo;
    return lm;
  }
  if (std::abs(r_hi) <= kTol) {
    lm.a_coeff = hi;
    return lm;
  }
  if (r_lo > 0.0 || r_hi < 0.0) {
    throw NumericalError("solve_a: no root in [0, ln(1/(1 - alpha G))]");
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double r = residual(mid);
    if (std::abs(r) <= kTol && hi - lo < 1e-12) break;
    (r < 0.0 ? lo : hi) = mid;
    if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;
  }
  lm.a_coeff = mid;
  if (std::abs(lm.normalization() - 1.0) > kTol) {
    throw NumericalError("solve_a: bisection stalled above the residual tolerance");
  }
  return lm;
}

ConditionedProductChain::ConditionedProductChain(const OneParticleDensity& f_in,
                                                 const CellGrid& grid, Rng& rng, int retry_budget)
    : f_in_(&f_in), grid_(grid) {
  const auto n = static_cast<std::size_t>(grid.n_particles());
  velocities_.reserve(n);
  cells_.reserve(n);
  occupancy_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    int tries = 0;
    while (true) {
      const Vec3 v = f_in.sample(rng);
      const CellIndex c = cell_of(grid, v);
      if (occupancy_.insert(c, static_cast<OccupancyMap::Id>(i))) {
        velocities_.push_back(v);
        cells_.push_back(c);
        break;
      }
      if (++tries >= retry_budget) {
        throw SaturationError("conditioned product: no free cell for particle " +
                              std::to_string(i) + " after " + std::to_string(tries) + " draws");
      }
    }
  }
}

bool ConditionedProductChain::step(Rng& rng) {
  ++proposals_;
  const std::size_t i = rng.index(velocities_.size());
  const Vec3 v = f_in_->sample(rng);
  const CellIndex c = cell_of(grid_, v);
  if (c != cells_[i]) {
    if (!occupancy_.insert(c, static_cast<OccupancyMap::Id>(i))) return false;
    occupancy_.erase(cells_[i]);
    cells_[i] = c;
  }
  velocities_[i] = v;
  ++accepted_;
  return true;
}

ParticleEnsemble sample_conditioned_product(const OneParticleDensity& f_in, const SimConfig& cfg,
                                            Rng& rng, std::int64_t burn_in) {
  f_in.require_below_saturation(cfg.alpha);
  const CellGrid grid = cfg.grid();
  ConditionedProductChain chain(f_in, grid, rng);
  const std::int64_t steps = burn_in < 0 ? 10 * grid.n_particles() : burn_in;
  chain.run(static_cast<std::uint64_t>(steps), rng);
  return chain.ensemble();
}

double exact_rejection_rate(const OneParticleDensity& f_in, const CellGrid& grid,
                            std::uint64_t trials, Rng& rng) {
  const auto n = static_cast<std::size_t>(grid.n_particles());
  std::vector<CellIndex> cells(n);
  std::uint64_t ok = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    for (auto& c : cells) c = cell_of(grid, f_in.sample(rng));
    std::sort(cells.begin(), cells.end());
    if (std::adjacent_find(cells.begin(), cells.end()) == cells.end()) ++ok;
  }
  return trials == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(trials);
}

double TwoScalePlan::marginal(const Vec3& v) const {
  auto it = counts.find(cell_of(big_side, v));
  if (it == counts.end()) return 0.0;
  return it->second / (static_cast<double>(grid.n_particles()) * std::pow(big_side, 3));
}

TwoScalePlan plan_two_scale(const OneParticleDensity& f_in, const CellGrid& grid) {
  TwoScalePlan plan;
  plan.grid = grid;
  plan.ratio = std::max(1, static_cast<int>(std::lround(1.0 / std::sqrt(grid.delta()))));
  plan.big_side = plan.ratio * grid.delta();
  const double D = plan.big_side;
  const CellIndex lo = cell_of(D, f_in.center - Vec3::Constant(f_in.support_radius));
  const CellIndex hi = cell_of(D, f_in.center + Vec3::Constant(f_in.support_radius));
  const GaussLegendre gl = gauss_legendre(4);

  struct Mass {
    CellIndex cell;
    double mass;
  };
  std::vector<Mass> masses;
  double total = 0.0;
  for (std::int32_t x = lo.ix; x <= hi.ix; ++x)
    for (std::int32_t y = lo.iy; y <= hi.iy; ++y)
      for (std::int32_t z = lo.iz; z <= hi.iz; ++z) {
        const CellIndex cell{x, y, z};
        const Vec3 o = cell_origin(D, cell);
        // skip cells whose closest point is outside the support ball
        const Vec3 nearest = f_in.center.cwiseMax(o).cwiseMin(o + Vec3::Constant(D));
        if ((nearest - f_in.center).norm() >= f_in.support_radius) continue;
        double m = 0.0;
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b)
            for (int c = 0; c < 4; ++c) {
              const Vec3 p = o + 0.5 * D * Vec3(gl.nodes[a] + 1.0, gl.nodes[b] + 1.0, gl.nodes[c] + 1.0);
              m += gl.weights[a] * gl.weights[b] * gl.weights[c] * f_in(p);
            }
        m *= D * D * D / 8.0;
        if (m > 0.0) {
          masses.push_back({cell, m});
          total += m;
        }
      }
  if (!(total > 0.0)) throw ConfigError("plan_two_scale: profile has no mass");

  const std::int64_t n = grid.n_particles();
  struct Share {
    std::size_t idx;
    double remainder;
  };
  std::vector<Share> shares;
  std::vector<std::int64_t> counts(masses.size());
  std::int64_t assigned = 0;
  for (std::size_t j = 0; j < masses.size(); ++j) {
    const double target = static_cast<double>(n) * masses[j].mass / total;
    counts[j] = static_cast<std::int64_t>(std::floor(target));
    assigned += counts[j];
    shares.push_back({j, target - static_cast<double>(counts[j])});
  }
  std::stable_sort(shares.begin(), shares.end(),
                   [](const Share& a, const Share& b) { return a.remainder > b.remainder; });
  for (std::int64_t r = 0; r < n - assigned; ++r) ++counts[shares[static_cast<std::size_t>(r)].idx];

  const std::int64_t capacity = static_cast<std::int64_t>(plan.ratio) * plan.ratio * plan.ratio;
  for (std::size_t j = 0; j < masses.size(); ++j) {
    if (counts[j] == 0) continue;
    if (counts[j] > capacity) {
      throw SaturationError("two-scale: big cell needs " + std::to_string(counts[j]) +
                            " particles but has " + std::to_string(capacity) + " fine cells");
    }
    plan.counts[masses[j].cell] = static_cast<int>(counts[j]);
  }
  return plan;
}

ParticleEnsemble sample_two_scale(const TwoScalePlan& plan, Rng& rng) {
  const CellGrid& grid = plan.grid;
  const double delta = grid.delta();
  const int m = plan.ratio;
  const std::uint64_t capacity = static_cast<std::uint64_t>(m) * m * m;
  std::vector<Vec3> velocities;
  velocities.reserve(static_cast<std::size_t>(grid.n_particles()));
  for (const auto& [big, count] : plan.counts) {
    // Floyd's algorithm: a uniformly random count-subset of the fine cells.
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = capacity - static_cast<std::uint64_t>(count); j < capacity; ++j) {
      const std::uint64_t t = rng.index(j + 1);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    for (std::uint64_t q : chosen) {
      const CellIndex fine{static_cast<std::int32_t>(big.ix * m + static_cast<int>(q / (m * m))),
                           static_cast<std::int32_t>(big.iy * m + static_cast<int>((q / m) % m)),
                           static_cast<std::int32_t>(big.iz * m + static_cast<int>(q % m))};
      const Vec3 o = cell_origin(delta, fine);
      Vec3 v;
      do {
        v = o + delta * Vec3(rng.uniform(), rng.uniform(), rng.uniform());
      } while (cell_of(grid, v) != fine);
      velocities.push_back(v);
    }
  }
  for (std::size_t i = velocities.size(); i > 1; --i) {
    std::swap(velocities[i - 1], velocities[rng.index(i)]);
  }
  return ParticleEnsemble(grid, std::move(velocities));
}

ParticleEnsemble sample_two_scale(const OneParticleDensity& f_in, const SimConfig& cfg, Rng& rng) {
  return sample_two_scale(plan_two_scale(f_in, cfg.grid()), rng);
}

}  // namespace fermikac
