// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
#include <fermikac/grid.hpp>
#include <fermikac/harness.hpp>
#include <fermikac/hierarchy.hpp>
#include <fermikac/initdata.hpp>
#include <fermikac/kernel.hpp>
#include <fermikac/observables.hpp>
#include <fermikac/process.hpp>
#include <fermikac/quadrature.hpp>
#include <fermikac/rng.hpp>
#include <fermikac/uu.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

using namespace fermikac;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double metric(const RunSummary& s, const std::string& key) {
  auto it = s.metrics.find(key);
  return it == s.metrics.end() ? std::nan("") : it->second;
}

double field_l1(const DensityField& a, const DensityField& b) {
  double sum = 0.0;
  for (int i = 0; i < a.n(); ++i)
    for (int j = 0; j < a.n(); ++j)
      for (int k = 0; k < a.n(); ++k) sum += a.weight(i, j, k) * std::abs(a(i, j, k) - b(i, j, k));
  return sum;
}

double field_l1(const DensityField& a) {
  DensityField z(a.n(), a.half_width(), a.alpha());
  return field_l1(a, z);
}

// ---- 1: collision micro-invariants
Outcome collision_invariants() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst_p = 0.0, worst_e = 0.0, worst_inv = 0.0, worst_g = 0.0;
  for (int s = 0; s < 1000000; ++s) {
    const Vec3 vi(3.0 * rng.normal(), 3.0 * rng.normal(), 3.0 * rng.normal());
    const Vec3 vj(3.0 * rng.normal(), 3.0 * rng.normal(), 3.0 * rng.normal());
    const Vec3 w = sample_omega(rng);
    const auto [a, b] = collide(vi, vj, w);
    const auto [c, d] = collide(a, b, w);
    const double scale = std::max(1.0, vi.squaredNorm() + vj.squaredNorm());
    worst_p = std::max(worst_p, (a + b - vi - vj).norm() / std::sqrt(scale));
    worst_e = std::max(worst_e, std::abs(a.squaredNorm() + b.squaredNorm() - vi.squaredNorm() -
                                         vj.squaredNorm()) / scale);
    worst_inv = std::max(worst_inv, ((c - vi).norm() + (d - vj).norm()) / std::sqrt(scale));
    worst_g = std::max(worst_g, std::abs((a - b).norm() - (vi - vj).norm()) / std::sqrt(scale));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double tol = 1e-12;
  return {worst_p <= tol && worst_e <= tol && worst_inv <= tol && worst_g <= tol && secs < 10.0,
          fmt("momentum %.2e energy %.2e involution %.2e |g| %.2e in %.1fs", worst_p, worst_e,
              worst_inv, worst_g, secs)};
}

// ---- 2 and 4: exclusion invariant and a-priori bounds on one N = 10^4 run
RunSummary exclusion_run() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::Relax;
  cfg.sim.n_particles = 10000;
  cfg.sim.alpha = 0.2;
  cfg.sim.t_final = 1.0;
  cfg.sim.seed = 2024;
  cfg.sim.snapshot_times = {0.25, 0.5, 0.75};
  cfg.replicas = 2;
  return run_relax(cfg);
}

Outcome exclusion_invariant(const RunSummary& s) {
  const double v = metric(s, "exclusion_violations");
  const double ev = metric(s, "audited_events");
  return {v == 0.0 && ev > 0.0, fmt("%.0f violations over %.0f accepted events", v, ev)};
}

Outcome a_priori_bounds(const RunSummary& s) {
  double k1 = 0.0, k2 = 0.0;
  for (const auto& row : s.tables.at("snapshots")) {
    k1 = std::max(k1, row.at("k1_delta_norm"));
    k2 = std::max(k2, row.at("k2_delta_norm"));
  }
  return {metric(s, "bounds_ok") == 1.0,
          fmt("max k1 %.4g (1/alpha 5), max k2 %.4g, T_2N %.8f",
              k1, k2, metric(s, "k2_bound_factor"))};
}

// ---- 3: generator consistency at N = 2
Outcome generator_consistency() {
  const CellGrid g = CellGrid::with_delta(2, 0.3);
  const CrossSectionSpec k;
  const Vec3 v1(0.1, 0.2, 0.05), v2(0.9, -0.4, 0.3);
  const std::vector<std::function<double(const Vec3&, const Vec3&)>> phis = {
      [](const Vec3& a, const Vec3&) { return a.x(); },
      [](const Vec3& a, const Vec3& b) { return a.squaredNorm() * b.z(); },
      [](const Vec3& a, const Vec3& b) { return std::cos(a.y() + 2.0 * b.x()); },
  };
  const double t = 1e-3;
  const int replicas = 2000000;
  std::vector<double> sum(phis.size(), 0.0), sum2(phis.size(), 0.0);
  Rng rng(303);
  for (int r = 0; r < replicas; ++r) {
    ParticleEnsemble ens(g, {v1, v2});
    advance(ens, t, k, rng);
    const Vec3& a = ens.velocities()[0];
    const Vec3& b = ens.velocities()[1];
    for (std::size_t p = 0; p < phis.size(); ++p) {
      const double d = phis[p](a, b) - phis[p](v1, v2);
      sum[p] += d;
      sum2[p] += d * d;
    }
  }
  bool ok = true;
  std::string detail;
  for (std::size_t p = 0; p < phis.size(); ++p) {
    const double mean = sum[p] / replicas;
    const double var = sum2[p] / replicas - mean * mean;
    const double drift = mean / t;
    const double se = std::sqrt(var / replicas) / t;
    const double target = 0.5 * generator_apply_k2(phis[p], v1, v2, g, k, 4096);
    const double z = std::abs(drift - target) / se;
    ok = ok && z <= 3.0;
    detail += fmt("%sphi%zu %.4f vs %.4f (%.2f SE)", p ? ", " : "", p + 1, drift, target, z);
  }
  return {ok, detail};
}

// ---- 5 and 6: hierarchy nullity and consistency
RunSummary hierarchy_run() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::HierarchyCheck;
  cfg.sim.alpha = 0.2;
  cfg.sim.seed = 505;
  cfg.uu.grid_n = 11;
  cfg.uu.grid_l = 3.0;
  cfg.uu.n_omega = 32;
  cfg.hierarchy_fields = 5;
  return run_hierarchy_check(cfg);
}

Outcome c3_nullity(const RunSummary& s) {
  const double worst = metric(s, "c3_worst_relative");
  const double broken = metric(s, "c3_counterexample_relative");
  return {worst <= 1e-12 && broken > 1e-12,
          fmt("worst relative %.2e on 5 fields, counterexample %.3g", worst, broken)};
}

Outcome hierarchy_consistency(const RunSummary& s) {
  const double worst = metric(s, "consistency_worst_relative");
  return {worst <= 1e-10, fmt("worst relative residual %.2e on 5 fields", worst)};
}

// ---- 7 and 8: Fermi-Dirac stationarity, maximum principle, conservation
struct FdRun {
  RunSummary summary;
  double residual_h = 0.0;       // ||P Q_h(f_FD)||_1 at the run resolution
  double residual_half = 0.0;    // same at h / 2
  double raw_defect_h = 0.0;     // moment defect of the unprojected Q_h
  double raw_defect_half = 0.0;
};

std::pair<double, double> fd_residual(int n, double L, double alpha, double beta,
                                      const CrossSectionSpec& k, int n_omega) {
  const double mu = fermi_dirac_mu(alpha, beta, n, L);
  const DensityField f = fermi_dirac(alpha, beta, mu, n, L);
  const DensityField q = collision_operator(f, k, SphereQuadrature::with_nodes(n_omega));
  const DensityField pq = conservative_projection(q, f);
  const Moments mf = moments(f), mq = moments(q);
  const double defect = std::max({std::abs(mq.mass) / mf.mass, std::abs(mq.energy) / mf.energy,
                                  mq.momentum.norm() / std::sqrt(2.0 * mf.mass * mf.energy)});
  return {field_l1(pq), defect};
}

FdRun fd_run() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::UuSolve;
  cfg.sim.alpha = 0.2;
  cfg.sim.t_final = 1.0;
  cfg.init.profile = "fermi_dirac";
  cfg.init.beta = 1.0;
  cfg.uu.grid_n = 21;
  cfg.uu.n_omega = 32;
  cfg.uu.dt = 1e-3;
  FdRun r;
  r.summary = run_uu_solve(cfg);
  const double L = uu_half_width(cfg, make_profile(cfg.init, cfg.sim.alpha));
  std::tie(r.residual_h, r.raw_defect_h) = fd_residual(21, L, 0.2, 1.0, cfg.sim.kernel, 32);
  std::tie(r.residual_half, r.raw_defect_half) = fd_residual(41, L, 0.2, 1.0, cfg.sim.kernel, 32);
  return r;
}

Outcome fd_stationarity(const FdRun& r) {
  // Q vanishes on Fermi-Dirac, so the projected residual is pure discretization
  // error; over [0, T] the drift may not exceed T times it.
  const double drift = metric(r.summary, "l1_from_start");
  const double budget = 1.0 * r.residual_h;
  const bool certified = r.residual_half < r.residual_h;
  return {drift <= budget && certified,
          fmt("L1 drift %.4g within budget %.4g; residual %.4g -> %.4g on halving h", drift,
              budget, r.residual_h, r.residual_half)};
}

Outcome maximum_principle() {
  const double alpha = 0.2;
  const CrossSectionSpec k;
  const SphereQuadrature q = SphereQuadrature::with_nodes(32);
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    const DensityField f0 = random_field(11, 3.0, alpha, (1.0 - 1e-3) / alpha, 700 + i);
    const SolveResult res = solve(f0, 1.0, 1e-3, k, q);
    for (const auto& d : res.diagnostics) worst = std::max(worst, d.bounds.max_value);
  }
  return {worst <= 1.0 / alpha + 1e-9,
          fmt("max f %.12g against 1/alpha = %.12g over 3 fields", worst, 1.0 / alpha)};
}

Outcome particle_stationarity() {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::Relax;
  cfg.sim.n_particles = 10000;
  cfg.sim.alpha = 0.2;
  cfg.sim.t_final = 1.0;
  cfg.sim.seed = 707;
  cfg.init.family = "conditioned_product";
  cfg.init.profile = "fermi_dirac";
  cfg.replicas = 16;
  cfg.observe_cell = 0.5;
  const RunSummary s = run_relax(cfg);
  const double d0 = metric(s, "l1_split_t0"), dT = metric(s, "l1_split_T");
  const double sd = metric(s, "l1_split_sigma");
  return {std::abs(dT - d0) <= 3.0 * sd,
          fmt("split-half L1 %.4f at 0, %.4f at T, sigma %.4f", d0, dT, sd)};
}

Outcome uu_conservation(const FdRun& r) {
  const double drift = std::max({metric(r.summary, "mass_drift_rel"),
                                 metric(r.summary, "momentum_drift_rel"),
                                 metric(r.summary, "energy_drift_rel")});
  return {drift <= 1e-6 && r.raw_defect_half < r.raw_defect_h,
          fmt("moment drift %.2e; unprojected defect %.3g -> %.3g on halving h", drift,
              r.raw_defect_h, r.raw_defect_half)};
}

// ---- 9 and 10: desk-scale propagation of chaos
ExperimentConfig sweep_config(Experiment e, const std::string& family) {
  ExperimentConfig cfg;
  cfg.experiment = e;
  cfg.sim.alpha = 0.2;
  cfg.sim.t_final = 1.0;
  cfg.sim.seed = 11;
  cfg.init.family = family;
  cfg.init.profile = "double_bump";
  cfg.init.sigma = 1.0;
  cfg.init.separation = 2.0;
  cfg.init.cutoff = 3.0;
  cfg.uu.grid_n = 21;
  cfg.uu.dt = 0.02;
  cfg.replicas = 16;
  cfg.observe_cell = 0.5;
  cfg.n_sweep = {2000, 8000, 32000};
  return cfg;
}

std::string sweep_detail(const RunSummary& s, const std::string& table, const std::string& col,
                         double t) {
  std::string out;
  for (const auto& row : s.tables.at(table)) {
    if (row.at("t") != t) continue;
    out += fmt("%s%.4f+-%.4f", out.empty() ? "" : " > ", row.at(col), row.at("sigma"));
  }
  return out;
}

Outcome mean_field_limit() {
  const RunSummary a = run_converge(sweep_config(Experiment::Converge, "two_scale"));
  const RunSummary b = run_converge(sweep_config(Experiment::Converge, "conditioned_product"));
  return {a.passed && b.passed, "two_scale D_N " + sweep_detail(a, "D_N", "D", 1.0) +
                                    "; conditioned_product D_N " + sweep_detail(b, "D_N", "D", 1.0)};
}

Outcome chaos_propagation() {
  const RunSummary s = run_chaos(sweep_config(Experiment::Chaos, "two_scale"));
  return {s.passed, "t=0 " + sweep_detail(s, "chaos", "defect", 0.0) + "; t=T " +
                        sweep_detail(s, "chaos", "defect", 1.0)};
}

// ---- 11: initial data
Outcome initial_data() {
  std::vector<std::string> parts;
  bool ok = true;

  {  // (a) 27 cells, N = 3: conditioned law uniform on unordered triples
    const OneParticleDensity f = uniform_box(Vec3::Zero(), Vec3::Constant(0.75));
    const CellGrid g = CellGrid::with_delta(3, 0.25);
    Rng rng(1101);
    ConditionedProductChain chain(f, g, rng);
    std::vector<std::uint32_t> freq(27 * 27 * 27, 0);
    const int steps = 20000000;
    for (int s = 0; s < steps; ++s) {
      chain.step(rng);
      std::array<int, 3> id;
      for (int p = 0; p < 3; ++p) {
        const CellIndex& c = chain.cells()[static_cast<std::size_t>(p)];
        id[static_cast<std::size_t>(p)] = (c.ix * 3 + c.iy) * 3 + c.iz;
      }
      std::sort(id.begin(), id.end());
      ++freq[static_cast<std::size_t>((id[0] * 27 + id[1]) * 27 + id[2])];
    }
    double tv = 0.0;
    for (int a = 0; a < 27; ++a)
      for (int b = a + 1; b < 27; ++b)
        for (int c = b + 1; c < 27; ++c)
          tv += std::abs(static_cast<double>(freq[static_cast<std::size_t>((a * 27 + b) * 27 + c)]) /
                             steps - 1.0 / 2925.0);
    tv *= 0.5;
    ok = ok && tv <= 0.02;
    parts.push_back(fmt("(a) TV %.4f", tv));
  }
  {  // (b) Z_N bracket
    const OneParticleDensity f = uniform_box(Vec3::Zero(), Vec3::Ones());
    Rng rng(1102);
    bool in = true;
    double worst_gap = 1.0;
    for (int n = 2; n <= 8; ++n) {
      const CellGrid g = CellGrid::with_delta(n, 0.4);
      const double z = exact_rejection_rate(f, g, 100000, rng);
      const double lo = std::pow(1.0 - g.alpha() * f.sup_bound, n);
      in = in && z >= lo && z <= 1.0;
      worst_gap = std::min(worst_gap, z - lo);
    }
    ok = ok && in;
    parts.push_back(fmt("(b) Z_N in bracket for N<=8, min margin %.3f", worst_gap));
  }
  {  // (c) sampler-A marginal approaches f_in / (e^-a + alpha f_in)
    const OneParticleDensity f = truncated_maxwellian(1.0, 4.0);
    const double alpha = 0.2;
    const LimitMarginal lim = solve_a(f, alpha);
    const double side = 0.5;
    CompactBox box;
    box.lower = Vec3::Constant(-2.0);
    box.upper = Vec3::Constant(2.0);
    const GaussLegendre gl = gauss_legendre(4);
    const auto avg = [&](const CellIndex& c) {
      const Vec3 o = cell_origin(side, c);
      double s = 0.0;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          for (int d = 0; d < 4; ++d)
            s += gl.weights[a] * gl.weights[b] * gl.weights[d] *
                 lim(o + 0.5 * side * Vec3(gl.nodes[a] + 1.0, gl.nodes[b] + 1.0, gl.nodes[d] + 1.0));
      return s / 8.0;
    };
    std::vector<double> sup;
    for (std::int64_t n : {500, 2000, 8000}) {
      SimConfig sim;
      sim.n_particles = n;
      sim.alpha = alpha;
      std::vector<ParticleEnsemble> ens;
      for (int r = 0; r < 32; ++r) {
        Rng rng(derive_seed(1103 + static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r)));
        ens.push_back(sample_conditioned_product(f, sim, rng));
      }
      const MarginalEstimate est = estimate_marginal(ens, 1, side);
      sup.push_back(sup_distance(est, avg, box));
    }
    const bool dec = sup[0] > sup[1] && sup[1] > sup[2];
    ok = ok && dec;
    parts.push_back(fmt("(c) sup distance %.4f > %.4f > %.4f", sup[0], sup[1], sup[2]));
  }
  {  // (d) sampler B: uniform fine-cell subsets in one big cell
    const OneParticleDensity f = uniform_box(Vec3::Zero(), Vec3::Constant(0.5));
    const CellGrid g = CellGrid::with_delta(3, 0.25);
    const TwoScalePlan plan = plan_two_scale(f, g);
    Rng rng(1104);
    std::map<std::set<CellIndex>, int> freq;
    const int draws = 100000;
    for (int d = 0; d < draws; ++d) {
      const ParticleEnsemble e = sample_two_scale(plan, rng);
      std::set<CellIndex> s;
      for (const auto& v : e.velocities()) s.insert(cell_of(g, v));
      freq[s]++;
    }
    const double p = 1.0 / 56.0, se = std::sqrt(p * (1.0 - p) / draws);
    double worst = 0.0;
    for (const auto& [k, n] : freq) worst = std::max(worst, std::abs(n / double(draws) - p) / se);
    const bool uni = freq.size() == 56 && worst <= 4.0;
    ok = ok && uni;
    parts.push_back(fmt("(d) %zu subsets, worst %.2f SE", freq.size(), worst));
  }
  {  // (e) solve_a on uniform profiles
    double worst = 0.0;
    for (double side : {1.0, 1.5, 2.0}) {
      const OneParticleDensity f = uniform_box(Vec3::Zero(), Vec3::Constant(side));
      const double V = side * side * side;
      for (double alpha : {0.05, 0.2, 0.5}) {
        if (alpha / V >= 1.0) continue;
        worst = std::max(worst, std::abs(solve_a(f, alpha).a_coeff + std::log(1.0 - alpha / V)));
      }
    }
    ok = ok && worst <= 1e-9;
    parts.push_back(fmt("(e) solve_a error %.2e", worst));
  }
  std::string detail;
  for (const auto& p : parts) detail += (detail.empty() ? "" : "; ") + p;
  return {ok, detail};
}

}  // namespace

int main() {
  int failed = 0;
  const auto report = [&](int id, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s  %s  [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };

  report(1, collision_invariants);
  RunSummary excl;
  report(2, [&] {
    excl = exclusion_run();
    return exclusion_invariant(excl);
  });
  report(3, generator_consistency);
  report(4, [&] { return a_priori_bounds(excl); });
  RunSummary hier;
  report(5, [&] {
    hier = hierarchy_run();
    return c3_nullity(hier);
  });
  report(6, [&] { return hierarchy_consistency(hier); });
  FdRun fd;
  report(7, [&] {
    fd = fd_run();
    const Outcome a = fd_stationarity(fd);
    const Outcome b = maximum_principle();
    const Outcome c = particle_stationarity();
    return Outcome{a.pass && b.pass && c.pass,
                   "(a) " + a.detail + "; (b) " + b.detail + "; (c) " + c.detail};
  });
  report(8, [&] { return uu_conservation(fd); });
  report(9, mean_field_limit);
  report(10, chaos_propagation);
  report(11, initial_data);
  std::printf("%d of 11 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
