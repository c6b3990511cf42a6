#include "fermikac/process.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fermikac/errors.hpp"
#include "fermikac/quadrature.hpp"

namespace fermikac {

double SimConfig::delta() const {
  return std::cbrt(alpha / static_cast<double>(n_particles));
}

void SimConfig::validate() const {
  if (n_particles < 2) throw ConfigError("sim.n_particles must be at least 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("sim.alpha must lie in (0,1)");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw ConfigError("sim.t_final must be positive");
  if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end())) {
    throw ConfigError("sim.snapshot_times must be sorted");
  }
  for (double t : snapshot_times) {
    if (t < 0.0 || t > t_final) throw ConfigError("sim.snapshot_times must lie in [0, t_final]");
  }
  kernel.validate();
}

EventCounters& EventCounters::operator+=(const EventCounters& o) {
  proposed += o.proposed;
  kernel_rejected += o.kernel_rejected;
  exclusion_blocked += o.exclusion_blocked;
  accepted += o.accepted;
  return *this;
}

ParticleEnsemble::ParticleEnsemble(const CellGrid& grid, std::vector<Vec3> velocities, double time)
    : grid_(grid), velocities_(std::move(velocities)), time_(time) {
  occupancy_ = build_occupancy(grid_, velocities_);
  cells_.reserve(velocities_.size());
  for (const auto& v : velocities_) cells_.push_back(cell_of(grid_, v));
}

Vec3 ParticleEnsemble::total_momentum() const {
  Vec3 p = Vec3::Zero();
  for (const auto& v : velocities_) p += v;
  return p;
}

double ParticleEnsemble::total_energy() const {
  double e = 0.0;
  for (const auto& v : velocities_) e += 0.5 * v.squaredNorm();
  return e;
}

bool ParticleEnsemble::try_move_pair(std::size_t i, std::size_t j, const Vec3& vi_new,
                                     const Vec3& vj_new) {
  const CellIndex ci = cell_of(grid_, vi_new);
  const CellIndex cj = cell_of(grid_, vj_new);
  if (ci == cj || occupancy_.contains(ci) || occupancy_.contains(cj)) return false;
  occupancy_.erase(cells_[i]);
  occupancy_.erase(cells_[j]);
  occupancy_.insert(ci, static_cast<OccupancyMap::Id>(i));
  occupancy_.insert(cj, static_cast<OccupancyMap::Id>(j));
  cells_[i] = ci;
  cells_[j] = cj;
  velocities_[i] = vi_new;
  velocities_[j] = vj_new;
  return true;
}

double majorant_rate(std::int64_t n, double c1) {
  return 2.0 * std::numbers::pi * static_cast<double>(n - 1) * c1;
}

EventOutcome attempt_event(ParticleEnsemble& ens, const CrossSectionSpec& kernel, Rng& rng) {
  EventOutcome out;
  auto& counters = ens.counters();
  ++counters.proposed;
  const std::uint64_t n = ens.size();
  out.i = rng.index(n);
  out.j = rng.index(n - 1);
  if (out.j >= out.i) ++out.j;
  const Vec3& vi = ens.velocities()[out.i];
  const Vec3& vj = ens.velocities()[out.j];
  out.vi_before = vi;
  out.vj_before = vj;
  const Vec3 g = vi - vj;

  if (kernel.form == KernelForm::SmoothRamp) {
    const double u = rng.uniform();
    if (u * kernel.b0 >= smooth_ramp(kernel.b0, kernel.m_cut, g.norm())) {
      ++counters.kernel_rejected;
      return out;
    }
    out.omega = sample_omega(rng);
  } else {
    out.omega = sample_omega(rng);
    const double u = rng.uniform();
    if (u * kernel.b0 >= eval_kernel(kernel, g, out.omega)) {
      ++counters.kernel_rejected;
      return out;
    }
  }

  const auto [vi_new, vj_new] = collide(vi, vj, out.omega);
  if (!ens.try_move_pair(out.i, out.j, vi_new, vj_new)) {
    ++counters.exclusion_blocked;
    out.kind = EventOutcome::Kind::ExclusionBlocked;
    return out;
  }
  ++counters.accepted;
  out.kind = EventOutcome::Kind::Accepted;
  return out;
}

ExclusionAudit::ExclusionAudit(const ParticleEnsemble& ens) {
  for (const auto& v : ens.velocities()) {
    if (++counts_[cell_of(ens.grid(), v)] > 1) ++violations_;
  }
}

void ExclusionAudit::move(const CellGrid& grid, const Vec3& before, const Vec3& after) {
  auto it = counts_.find(cell_of(grid, before));
  if (it == counts_.end()) {
    ++violations_;
  } else if (--it->second == 0) {
    counts_.erase(it);
  }
  if (++counts_[cell_of(grid, after)] > 1) ++violations_;
}

void advance(ParticleEnsemble& ens, double t_target, const CrossSectionSpec& kernel, Rng& rng,
             const AdvanceOptions& options) {
  const double rate = majorant_rate(static_cast<std::int64_t>(ens.size()), kernel.b0);
  if (!(rate > 0.0) || ens.size() < 2) {
    ens.set_time(std::max(ens.time(), t_target));
    return;
  }
  double t = ens.time();
  while (true) {
    const double next = t + rng.exponential(rate);
    if (!(next <= t_target)) break;
    t = next;
    if (options.audit == nullptr) {
      attempt_event(ens, kernel, rng);
      continue;
    }
    const EventOutcome ev = attempt_event(ens, kernel, rng);
    if (ev.kind == EventOutcome::Kind::Accepted) {
      options.audit->move(ens.grid(), ev.vi_before, ens.velocities()[ev.i]);
      options.audit->move(ens.grid(), ev.vj_before, ens.velocities()[ev.j]);
      options.audit->count_event();
    }
  }
  ens.set_time(std::max(ens.time(), t_target));
}

namespace {

struct Frame {
  Vec3 g_hat, e1, e2;
};

Frame frame_along(const Vec3& g) {
  Frame f;
  f.g_hat = g.normalized();
  Vec3 axis = Vec3::UnitX();
  if (std::abs(f.g_hat.y()) < std::abs(f.g_hat(0)) && std::abs(f.g_hat.y()) <= std::abs(f.g_hat.z())) {
    axis = Vec3::UnitY();
  } else if (std::abs(f.g_hat.z()) < std::abs(f.g_hat(0))) {
    axis = Vec3::UnitZ();
  }
  f.e1 = f.g_hat.cross(axis).normalized();
  f.e2 = f.g_hat.cross(f.e1);
  return f;
}

// Range of one coordinate of a post-collision circle at polar cosine c.
// Particle sign s = -1 for v1' and +1 for v2'.
struct Circle {
  Vec3 center;
  double r;  // signed radius gn c sqrt(1 - c^2)
};

Circle circle_at(const Vec3& v, double s, double gn, double c, const Frame& f) {
  return {v + s * gn * c * c * f.g_hat, gn * c * std::sqrt(std::max(0.0, 1.0 - c * c))};
}

}  // namespace

ExclusionSphereIntegrator::ExclusionSphereIntegrator(const CellGrid& grid,
                                                     const CrossSectionSpec& kernel, int order)
    : grid_(grid), kernel_(kernel), order_(std::max(2, order)) {}

double ExclusionSphereIntegrator::integrate(const Vec3& v1, const Vec3& v2,
                                            const Integrand& h) const {
  const Vec3 g = v1 - v2;
  const double gn = g.norm();
  if (gn == 0.0) return 0.0;
  const double delta = grid_.delta();
  const Frame fr = frame_along(g);
  const CellIndex c1 = cell_of(grid_, v1);
  const CellIndex c2 = cell_of(grid_, v2);

  double amp[3], phase[3];
  for (int a = 0; a < 3; ++a) {
    amp[a] = std::hypot(fr.e1(a), fr.e2(a));
    phase[a] = std::atan2(fr.e2(a), fr.e1(a));
  }
  const Vec3* base[2] = {&v1, &v2};
  const double sgn[2] = {-1.0, 1.0};

  // Polar breakpoints: c where the extreme of a circle coordinate meets a plane.
  auto plane_index = [&](double c, int p, int a, bool upper) {
    const Circle cir = circle_at(*base[p], sgn[p], gn, c, fr);
    const double x = cir.center(a) + (upper ? 1.0 : -1.0) * std::abs(cir.r) * amp[a];
    return std::floor(x / delta);
  };
  std::vector<double> cuts = {-1.0, 0.0, 1.0};
  constexpr int kScan = 4096;
  for (int p = 0; p < 2; ++p) {
    for (int a = 0; a < 3; ++a) {
      for (int up = 0; up < 2; ++up) {
        auto idx = [&](double c) { return plane_index(c, p, a, up == 1); };
        std::function<void(double, double, double, double)> refine =
            [&](double lo, double hi, double ilo, double ihi) {
              if (ilo == ihi) return;
              if (hi - lo < 1e-15) {
                cuts.push_back(0.5 * (lo + hi));
                return;
              }
              const double mid = 0.5 * (lo + hi);
              const double imid = idx(mid);
              refine(lo, mid, ilo, imid);
              refine(mid, hi, imid, ihi);
            };
        double prev_c = -1.0, prev_i = idx(-1.0);
        for (int s = 1; s <= kScan; ++s) {
          const double c = -1.0 + 2.0 * s / kScan;
          const double i = idx(c);
          refine(prev_c, c, prev_i, i);
          prev_c = c;
          prev_i = i;
        }
      }
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double x, double y) { return std::abs(x - y) < 1e-14; }),
             cuts.end());

  const GaussLegendre gl = gauss_legendre(order_);
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> breaks;

  auto omega_at = [&](double c, double psi) {
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    return Vec3(s * std::cos(psi) * fr.e1 + s * std::sin(psi) * fr.e2 + c * fr.g_hat);
  };

  auto azimuthal = [&](double c) {
    breaks.assign({0.0, two_pi});
    for (int p = 0; p < 2; ++p) {
      const Circle cir = circle_at(*base[p], sgn[p], gn, c, fr);
      // coordinate a along the circle: center_a + sgn * r * amp_a cos(psi - phase_a)
      for (int a = 0; a < 3; ++a) {
        const double ra = sgn[p] * cir.r * amp[a];
        if (std::abs(ra) < 1e-300) continue;
        const double lo = cir.center(a) - std::abs(ra), hi = cir.center(a) + std::abs(ra);
        for (double k = std::ceil(lo / delta); k * delta <= hi; k += 1.0) {
          const double q = (k * delta - cir.center(a)) / ra;
          if (q <= -1.0 || q >= 1.0) continue;
          const double ac = std::acos(q);
          for (double psi : {phase[a] + ac, phase[a] - ac}) {
            psi = std::fmod(psi, two_pi);
            if (psi < 0.0) psi += two_pi;
            breaks.push_back(psi);
          }
        }
      }
    }
    std::sort(breaks.begin(), breaks.end());
    double sum = 0.0;
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
      const double pa = breaks[b], pb = breaks[b + 1];
      if (pb - pa <= 0.0) continue;
      const Vec3 wm = omega_at(c, 0.5 * (pa + pb));
      const auto [v1m, v2m] = collide(v1, v2, wm);
      const CellIndex d1 = cell_of(grid_, v1m), d2 = cell_of(grid_, v2m);
      if (d1 == d2 || d1 == c1 || d1 == c2 || d2 == c1 || d2 == c2) continue;
      double arc = 0.0;
      const double half = 0.5 * (pb - pa), mid = 0.5 * (pa + pb);
      for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
        const Vec3 w = omega_at(c, mid + half * gl.nodes[q]);
        const auto [v1p, v2p] = collide(v1, v2, w);
        arc += gl.weights[q] * eval_kernel(kernel_, g, w) * h(w, v1p, v2p);
      }
      sum += half * arc;
    }
    return sum;
  };

  // Endpoint-clustering map c = ca + (cb - ca) I(t), I the regularized
  // incomplete beta function of order (4,4); I'(t) = 140 t^3 (1-t)^3.
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double ca = cuts[k], cb = cuts[k + 1];
    if (cb - ca <= 0.0) continue;
    double piece = 0.0;
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double t = 0.5 * (gl.nodes[q] + 1.0);
      const double it = t * t * t * t * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t);
      const double dit = 140.0 * std::pow(t * (1.0 - t), 3);
      piece += 0.5 * gl.weights[q] * dit * azimuthal(ca + (cb - ca) * it);
    }
    total += (cb - ca) * piece;
  }
  return total;
}

namespace {
void require_admissible_pair(const CellGrid& grid, const Vec3& v1, const Vec3& v2) {
  if (cell_of(grid, v1) == cell_of(grid, v2)) {
    throw AdmissibilityError("generator: the two velocities share a cell");
  }
}
int order_for(int n_omega) {
  return std::max(2, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_omega)))));
}
}  // namespace

double generator_apply_k2(const std::function<double(const Vec3&, const Vec3&)>& phi,
                          const Vec3& v1, const Vec3& v2, const CellGrid& grid,
                          const CrossSectionSpec& kernel, int n_omega) {
  require_admissible_pair(grid, v1, v2);
  const double phi0 = phi(v1, v2);
  ExclusionSphereIntegrator integ(grid, kernel, order_for(n_omega));
  return integ.integrate(v1, v2, [&](const Vec3&, const Vec3& a, const Vec3& b) {
    return phi(a, b) - phi0;
  });
}

double accepted_rate_k2(const Vec3& v1, const Vec3& v2, const CellGrid& grid,
                        const CrossSectionSpec& kernel, int n_omega) {
  require_admissible_pair(grid, v1, v2);
  ExclusionSphereIntegrator integ(grid, kernel, order_for(n_omega));
  return integ.integrate(v1, v2, [](const Vec3&, const Vec3&, const Vec3&) { return 1.0; });
}

}  // namespace fermikac
