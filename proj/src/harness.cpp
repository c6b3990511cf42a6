#include "fermikac/harness.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "fermikac/errors.hpp"
#include "fermikac/hierarchy.hpp"

namespace fermikac {

namespace fs = std::filesystem;

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::Relax: return "relax";
    case Experiment::Converge: return "converge";
    case Experiment::Chaos: return "chaos";
    case Experiment::HierarchyCheck: return "hierarchy-check";
    case Experiment::UuSolve: return "uu-solve";
  }
  return "relax";
}

Experiment experiment_from_string(const std::string& name) {
  for (auto e : {Experiment::Relax, Experiment::Converge, Experiment::Chaos,
                 Experiment::HierarchyCheck, Experiment::UuSolve}) {
    if (to_string(e) == name) return e;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "experiment",     "sim.n_particles", "sim.alpha",      "sim.t_final",   "sim.seed",
      "sim.snapshot_times", "kernel.b0",   "kernel.m_cut",   "kernel.form",   "kernel.range",
      "init.family",    "init.profile",    "init.sigma",     "init.separation", "init.cutoff",
      "init.beta",      "init.radius",     "init.lower",     "init.upper",    "init.G",
      "init.burn_in",   "uu.grid_n",       "uu.grid_l",      "uu.n_omega",    "uu.dt",
      "uu.conservative", "replicas",       "box.lower",      "box.upper",     "observe.cell",
      "out_dir",        "n_sweep",         "threads",        "bootstrap",     "k2_csv_limit",
      "hierarchy.fields"};
  return keys;
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string vec(const Vec3& v) { return num(v(0)) + "," + num(v(1)) + "," + num(v(2)); }

// Short form for file names and metric keys.
std::string tag(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::vector<double> all_times(const SimConfig& sim) {
  std::vector<double> t = sim.snapshot_times;
  t.push_back(0.0);
  t.push_back(sim.t_final);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Seed stream of one N in a sweep.
std::uint64_t sweep_seed(std::uint64_t master, std::int64_t n) {
  return splitmix64(master ^ static_cast<std::uint64_t>(n));
}

using Sample = std::vector<std::pair<CellIndex, std::uint32_t>>;

Sample sample_of(const ParticleEnsemble& ens, double side) {
  const MarginalEstimate e = estimate_marginal(std::span<const ParticleEnsemble>(&ens, 1), 1, side);
  return e.samples().front();
}

MarginalEstimate estimate_from(std::vector<Sample> samples, const SimConfig& sim, double side) {
  const double delta = sim.delta();
  return MarginalEstimate::from_samples(1, sim.n_particles, delta, side > 0.0 ? side : delta,
                                        sim.grid().alpha(), std::move(samples));
}

// Initial-state factory for one N; the two-scale plan is built once and shared.
class InitialSampler {
 public:
  InitialSampler(const OneParticleDensity& f_in, const InitConfig& init, const SimConfig& sim)
      : f_in_(f_in), init_(init), sim_(sim) {
    if (init.family == "two_scale") plan_ = plan_two_scale(f_in, sim.grid());
  }
  ParticleEnsemble operator()(Rng& rng) const {
    if (plan_) return sample_two_scale(*plan_, rng);
    return sample_conditioned_product(f_in_, sim_, rng, init_.burn_in);
  }

 private:
  const OneParticleDensity& f_in_;
  InitConfig init_;
  SimConfig sim_;
  std::optional<TwoScalePlan> plan_;
};

struct ReplicaTrace {
  std::vector<Sample> obs;    // per snapshot time, observation cells
  std::vector<Sample> fine;   // per snapshot time, exclusion cells (relax only)
  std::vector<EventCounters> counters;  // cumulative at each snapshot
  std::uint64_t audit_violations = 0;
  std::uint64_t audit_events = 0;
  std::uint64_t snapshot_violations = 0;
  double momentum_drift = 0.0;
  double energy_drift = 0.0;
};

ReplicaTrace run_replica(const InitialSampler& init, const SimConfig& sim,
                         const std::vector<double>& times, double observe_side, bool audit_on,
                         std::uint64_t seed) {
  Rng rng(seed);
  ParticleEnsemble ens = init(rng);
  const Vec3 p0 = ens.total_momentum();
  const double e0 = ens.total_energy();
  std::optional<ExclusionAudit> audit;
  if (audit_on) audit.emplace(ens);
  AdvanceOptions opt;
  opt.audit = audit ? &*audit : nullptr;
  ReplicaTrace out;
  for (double t : times) {
    advance(ens, t, sim.kernel, rng, opt);
    out.obs.push_back(sample_of(ens, observe_side));
    if (audit_on) {
      out.fine.push_back(observe_side > 0.0 ? sample_of(ens, 0.0) : out.obs.back());
      if (!is_admissible(ens.grid(), ens.velocities())) ++out.snapshot_violations;
    }
    out.counters.push_back(ens.counters());
    out.momentum_drift =
        std::max(out.momentum_drift, (ens.total_momentum() - p0).cwiseAbs().maxCoeff());
    out.energy_drift = std::max(out.energy_drift, std::abs(ens.total_energy() - e0) / e0);
  }
  if (audit) {
    out.audit_violations = audit->violations();
    out.audit_events = audit->checked_events();
  }
  return out;
}

std::vector<ReplicaTrace> run_traces(const ExperimentConfig& cfg, const SimConfig& sim,
                                     const InitialSampler& init, const std::vector<double>& times,
                                     bool audit_on, std::uint64_t master) {
  return run_replicas<ReplicaTrace>(cfg.replicas, cfg.threads, [&](int r) {
    return run_replica(init, sim, times, cfg.observe_cell, audit_on,
                       derive_seed(master, static_cast<std::uint64_t>(r)));
  });
}

MarginalEstimate merged(const std::vector<ReplicaTrace>& traces, std::size_t ti,
                        const SimConfig& sim, double side, bool fine = false) {
  std::vector<Sample> s;
  s.reserve(traces.size());
  for (const auto& tr : traces) s.push_back(fine ? tr.fine[ti] : tr.obs[ti]);
  return estimate_from(std::move(s), sim, fine ? 0.0 : side);
}

// Replica subset r = parity, parity + 2, ...
MarginalEstimate half(const std::vector<ReplicaTrace>& traces, std::size_t ti, const SimConfig& sim,
                      double side, std::size_t parity) {
  std::vector<Sample> s;
  for (std::size_t r = parity; r < traces.size(); r += 2) s.push_back(traces[r].obs[ti]);
  return estimate_from(std::move(s), sim, side);
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os.precision(17);
  return os;
}

void write_marginals(const fs::path& dir, double t, const MarginalEstimate& est, std::size_t limit) {
  {
    auto os = open_out(dir / ("marginal_k1_t" + tag(t) + ".csv"));
    write_csv_k1(os, t, est, true);
  }
  auto os = open_out(dir / ("marginal_k2_t" + tag(t) + ".csv"));
  write_csv_k2(os, t, est.with_order(2), true, limit);
}

void write_events(const fs::path& dir, const std::vector<ReplicaTrace>& traces,
                  const std::vector<double>& times) {
  auto os = open_out(dir / "events.csv");
  os << "replica,t,proposed,kernel_rejected,exclusion_blocked,accepted\n";
  for (std::size_t r = 0; r < traces.size(); ++r) {
    for (std::size_t i = 0; i < times.size(); ++i) {
      const EventCounters& c = traces[r].counters[i];
      os << r << ',' << times[i] << ',' << c.proposed << ',' << c.kernel_rejected << ','
         << c.exclusion_blocked << ',' << c.accepted << '\n';
    }
  }
}

void write_field(const fs::path& dir, double t, const DensityField& f) {
  auto os = open_out(dir / ("uu_field_t" + tag(t) + ".csv"));
  os << "t,ix,iy,iz,vx,vy,vz,f\n";
  for (int i = 0; i < f.n(); ++i)
    for (int j = 0; j < f.n(); ++j)
      for (int k = 0; k < f.n(); ++k) {
        const Vec3 v = f.node(i, j, k);
        os << t << ',' << i << ',' << j << ',' << k << ',' << v(0) << ',' << v(1) << ',' << v(2)
           << ',' << f(i, j, k) << '\n';
      }
}

void finish(RunSummary& s, const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) return;
  auto os = open_out(fs::path(cfg.out_dir) / "summary.json");
  os << s.to_json() << '\n';
}

// Trapezoid L1 distance between two fields on the same grid.
double field_l1(const DensityField& a, const DensityField& b) {
  double sum = 0.0;
  for (int i = 0; i < a.n(); ++i)
    for (int j = 0; j < a.n(); ++j)
      for (int k = 0; k < a.n(); ++k) sum += a.weight(i, j, k) * std::abs(a(i, j, k) - b(i, j, k));
  return sum;
}

struct DriftReport {
  double mass = 0.0;
  double momentum = 0.0;
  double energy = 0.0;
};

// Moment drift relative to the initial moments; momentum relative to
// sqrt(2 mass energy), the momentum scale of the state.
DriftReport moment_drift(const std::vector<SolveDiagnostics>& diag) {
  DriftReport d;
  const Moments& m0 = diag.front().moments;
  const double pscale = std::sqrt(std::max(2.0 * m0.mass * m0.energy, 1e-300));
  for (const auto& s : diag) {
    d.mass = std::max(d.mass, std::abs(s.moments.mass - m0.mass) / std::abs(m0.mass));
    d.momentum = std::max(d.momentum, (s.moments.momentum - m0.momentum).norm() / pscale);
    d.energy = std::max(d.energy, std::abs(s.moments.energy - m0.energy) / std::abs(m0.energy));
  }
  return d;
}

SolveResult solve_reference(const ExperimentConfig& cfg, const DensityField& f0) {
  StepOptions opt;
  opt.conservative = cfg.uu.conservative;
  return solve(f0, cfg.sim.t_final, cfg.uu.dt, cfg.sim.kernel,
               SphereQuadrature::with_nodes(cfg.uu.n_omega), cfg.sim.snapshot_times, opt);
}

const DensityField& field_at(const SolveResult& res, double t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < res.times.size(); ++i)
    if (std::abs(res.times[i] - t) < std::abs(res.times[best] - t)) best = i;
  return res.snapshots[best];
}

}  // namespace

ExperimentConfig ExperimentConfig::from_flat(const FlatConfig& flat) {
  for (const auto& [key, value] : flat.values()) {
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  c.experiment = experiment_from_string(flat.get_string("experiment", to_string(c.experiment)));
  SimConfig& s = c.sim;
  s.n_particles = flat.get_int("sim.n_particles", s.n_particles);
  s.alpha = flat.get_double("sim.alpha", s.alpha);
  s.t_final = flat.get_double("sim.t_final", s.t_final);
  s.seed = flat.get_uint("sim.seed", s.seed);
  s.snapshot_times = flat.get_doubles("sim.snapshot_times", {});
  const double b0 = flat.get_double("kernel.b0", s.kernel.b0);
  const double m_cut = flat.get_double("kernel.m_cut", s.kernel.m_cut);
  c.kernel_range = flat.get_double("kernel.range", c.kernel_range);
  const KernelForm form = kernel_form_from_string(flat.get_string("kernel.form", "smooth_ramp"));
  if (form == KernelForm::Custom) {
    s.kernel = born_gaussian_kernel(b0, m_cut, c.kernel_range);
  } else {
    s.kernel.b0 = b0;
    s.kernel.m_cut = m_cut;
  }
  InitConfig& i = c.init;
  i.family = flat.get_string("init.family", i.family);
  i.profile = flat.get_string("init.profile", i.profile);
  i.sigma = flat.get_double("init.sigma", i.sigma);
  i.separation = flat.get_double("init.separation", i.separation);
  i.cutoff = flat.get_double("init.cutoff", i.cutoff);
  i.beta = flat.get_double("init.beta", i.beta);
  i.radius = flat.get_double("init.radius", i.radius);
  i.lower = flat.get_vec3("init.lower", i.lower);
  i.upper = flat.get_vec3("init.upper", i.upper);
  i.g_bound = flat.get_double("init.G", i.g_bound);
  i.burn_in = flat.get_int("init.burn_in", i.burn_in);
  UuConfig& u = c.uu;
  u.grid_n = static_cast<int>(flat.get_int("uu.grid_n", u.grid_n));
  u.grid_l = flat.get_double("uu.grid_l", u.grid_l);
  u.n_omega = static_cast<int>(flat.get_int("uu.n_omega", u.n_omega));
  u.dt = flat.get_double("uu.dt", u.dt);
  u.conservative = flat.get_bool("uu.conservative", u.conservative);
  c.replicas = static_cast<int>(flat.get_int("replicas", c.replicas));
  c.box_set = flat.has("box.lower") || flat.has("box.upper");
  if (c.box_set) {
    if (!(flat.has("box.lower") && flat.has("box.upper")))
      throw ConfigError("box.lower and box.upper must be given together");
    c.box.lower = flat.get_vec3("box.lower", c.box.lower);
    c.box.upper = flat.get_vec3("box.upper", c.box.upper);
  }
  c.observe_cell = flat.get_double("observe.cell", c.observe_cell);
  c.out_dir = flat.get_string("out_dir", c.out_dir);
  for (long long n : flat.get_ints("n_sweep", {})) c.n_sweep.push_back(n);
  c.threads = static_cast<int>(flat.get_int("threads", c.threads));
  c.bootstrap = static_cast<int>(flat.get_int("bootstrap", c.bootstrap));
  c.k2_csv_limit = static_cast<std::size_t>(flat.get_uint("k2_csv_limit", c.k2_csv_limit));
  c.hierarchy_fields = static_cast<int>(flat.get_int("hierarchy.fields", c.hierarchy_fields));
  return c;
}

FlatConfig ExperimentConfig::to_flat() const {
  FlatConfig f;
  f.set("experiment", to_string(experiment));
  f.set("sim.n_particles", std::to_string(sim.n_particles));
  f.set("sim.alpha", num(sim.alpha));
  f.set("sim.t_final", num(sim.t_final));
  f.set("sim.seed", std::to_string(sim.seed));
  if (!sim.snapshot_times.empty()) {
    std::string list;
    for (double t : sim.snapshot_times) list += (list.empty() ? "" : ",") + num(t);
    f.set("sim.snapshot_times", list);
  }
  f.set("kernel.b0", num(sim.kernel.b0));
  f.set("kernel.m_cut", num(sim.kernel.m_cut));
  f.set("kernel.form", to_string(sim.kernel.form));
  f.set("kernel.range", num(kernel_range));
  f.set("init.family", init.family);
  f.set("init.profile", init.profile);
  f.set("init.sigma", num(init.sigma));
  f.set("init.separation", num(init.separation));
  f.set("init.cutoff", num(init.cutoff));
  f.set("init.beta", num(init.beta));
  f.set("init.radius", num(init.radius));
  f.set("init.lower", vec(init.lower));
  f.set("init.upper", vec(init.upper));
  f.set("init.G", num(init.g_bound));
  f.set("init.burn_in", std::to_string(init.burn_in));
  f.set("uu.grid_n", std::to_string(uu.grid_n));
  f.set("uu.grid_l", num(uu.grid_l));
  f.set("uu.n_omega", std::to_string(uu.n_omega));
  f.set("uu.dt", num(uu.dt));
  f.set("uu.conservative", uu.conservative ? "true" : "false");
  f.set("replicas", std::to_string(replicas));
  if (box_set) {
    f.set("box.lower", vec(box.lower));
    f.set("box.upper", vec(box.upper));
  }
  f.set("observe.cell", num(observe_cell));
  if (!out_dir.empty()) f.set("out_dir", out_dir);
  if (!n_sweep.empty()) {
    std::string list;
    for (auto n : n_sweep) list += (list.empty() ? "" : ",") + std::to_string(n);
    f.set("n_sweep", list);
  }
  f.set("threads", std::to_string(threads));
  f.set("bootstrap", std::to_string(bootstrap));
  f.set("k2_csv_limit", std::to_string(k2_csv_limit));
  f.set("hierarchy.fields", std::to_string(hierarchy_fields));
  return f;
}

void ExperimentConfig::validate() const {
  sim.validate();
  if (replicas < 1) throw ConfigError("replicas must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (bootstrap < 2) throw ConfigError("bootstrap must be at least 2");
  if (observe_cell < 0.0 || !std::isfinite(observe_cell))
    throw ConfigError("observe.cell must be non-negative");
  if (box_set) box.validate();
  if (init.family != "two_scale" && init.family != "conditioned_product")
    throw ConfigError("init.family must be two_scale or conditioned_product");
  if (init.sigma <= 0.0 || init.cutoff <= 0.0 || init.radius <= 0.0 || init.beta <= 0.0)
    throw ConfigError("init.sigma, init.cutoff, init.radius, init.beta must be positive");
  if (uu.grid_n < 3) throw ConfigError("uu.grid_n must be at least 3");
  if (uu.grid_l < 0.0) throw ConfigError("uu.grid_l must be non-negative");
  if (uu.n_omega < 2) throw ConfigError("uu.n_omega must be at least 2");
  if (!(uu.dt > 0.0)) throw ConfigError("uu.dt must be positive");
  if (experiment == Experiment::Converge || experiment == Experiment::Chaos) {
    if (n_sweep.empty()) throw ConfigError("n_sweep is required for " + to_string(experiment));
    for (std::size_t k = 0; k < n_sweep.size(); ++k) {
      if (n_sweep[k] < 2) throw ConfigError("n_sweep entries must be at least 2");
      if (k > 0 && n_sweep[k] <= n_sweep[k - 1]) throw ConfigError("n_sweep must be ascending");
    }
  }
  if (experiment == Experiment::Chaos && init.family != "two_scale")
    throw ConfigError("chaos requires init.family = two_scale");
  if (experiment == Experiment::HierarchyCheck && hierarchy_fields < 1)
    throw ConfigError("hierarchy.fields must be at least 1");
  if (experiment != Experiment::HierarchyCheck) {
    make_profile(init, sim.alpha).require_below_saturation(sim.alpha);
  }
}

std::string RunSummary::to_json() const {
  nlohmann::ordered_json j;
  j["experiment"] = experiment;
  j["passed"] = passed;
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metrics) {
    if (!std::isfinite(v)) throw NumericalError("metric '" + k + "' is not finite");
    m[k] = v;
  }
  j["metrics"] = m;
  nlohmann::ordered_json t = nlohmann::ordered_json::object();
  for (const auto& [name, rows] : tables) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
      nlohmann::ordered_json r = nlohmann::ordered_json::object();
      for (const auto& [k, v] : row) r[k] = v;
      arr.push_back(r);
    }
    t[name] = arr;
  }
  j["tables"] = t;
  j["timing"] = timing;
  j["notes"] = notes;
  return j.dump(2);
}

OneParticleDensity make_profile(const InitConfig& init, double alpha) {
  OneParticleDensity f;
  if (init.profile == "maxwellian") {
    f = truncated_maxwellian(init.sigma, init.cutoff);
  } else if (init.profile == "double_bump") {
    f = double_bump(init.sigma, init.separation, init.cutoff);
  } else if (init.profile == "uniform") {
    f = uniform_box(init.lower, init.upper);
  } else if (init.profile == "fermi_dirac") {
    f = truncated_fermi_dirac(alpha, init.beta, init.radius);
  } else {
    throw ConfigError("unknown init.profile '" + init.profile + "'");
  }
  if (init.g_bound > 0.0) {
    if (init.g_bound < f.sup_bound)
      throw ConfigError("init.G is below the certified maximum " + num(f.sup_bound));
    f.sup_bound = init.g_bound;
  }
  return f;
}

ParticleEnsemble sample_initial(const OneParticleDensity& f_in, const InitConfig& init,
                                const SimConfig& sim, Rng& rng) {
  if (init.family == "two_scale") return sample_two_scale(f_in, sim, rng);
  if (init.family == "conditioned_product")
    return sample_conditioned_product(f_in, sim, rng, init.burn_in);
  throw ConfigError("unknown init.family '" + init.family + "'");
}

namespace {

void note_narrow_grid(RunSummary& s, const ExperimentConfig& cfg, const OneParticleDensity& f_in,
                      double L) {
  const double need = f_in.center.cwiseAbs().maxCoeff() + f_in.support_radius + cfg.sim.kernel.m_cut;
  if (L < need) {
    s.notes.push_back("uu.grid_l = " + num(L) + " is below support + m_cut = " + num(need) +
                      "; post-collision velocities can leave the grid");
  }
}

}  // namespace

double uu_half_width(const ExperimentConfig& cfg, const OneParticleDensity& f_in) {
  if (cfg.uu.grid_l > 0.0) return cfg.uu.grid_l;
  // post-collision velocities stay within m_cut of the support
  return f_in.center.cwiseAbs().maxCoeff() + f_in.support_radius + cfg.sim.kernel.m_cut;
}

DensityField field_from(const std::function<double(const Vec3&)>& fn, int n, double half_width,
                        double alpha) {
  DensityField f = DensityField::from_function(n, half_width, alpha, fn);
  const double mass = moments(f).mass;
  if (!(mass > 0.0)) throw ConfigError("initial field has no mass on the U-U grid");
  for (double& x : f.values()) x /= mass;
  return f;
}

CompactBox observation_box(const ExperimentConfig& cfg, const OneParticleDensity& f_in) {
  if (cfg.box_set) return cfg.box;
  CompactBox b;
  b.lower = f_in.center - Vec3::Constant(f_in.support_radius);
  b.upper = f_in.center + Vec3::Constant(f_in.support_radius);
  return b;
}

bool decreasing_beyond_sigma(const std::vector<double>& values, const std::vector<double>& sigmas) {
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const double s = std::hypot(sigmas[i], sigmas[i + 1]);
    if (!(values[i] - values[i + 1] > s)) return false;
  }
  return true;
}

DensityField random_field(int n, double half_width, double alpha, double peak, std::uint64_t seed) {
  Rng rng(seed);
  struct Bump {
    Vec3 c;
    double w, a;
  };
  std::vector<Bump> bumps(3);
  for (auto& b : bumps) {
    for (int d = 0; d < 3; ++d) b.c(d) = (rng.uniform() - 0.5) * half_width;
    b.w = (0.4 + 0.4 * rng.uniform()) * half_width / 3.0;
    b.a = 0.3 + rng.uniform();
  }
  DensityField f = DensityField::from_function(n, half_width, alpha, [&](const Vec3& v) {
    double s = 0.0;
    for (const auto& b : bumps) s += b.a * std::exp(-(v - b.c).squaredNorm() / (2.0 * b.w * b.w));
    return s;
  });
  const double top = f.max_value();
  for (double& x : f.values()) x *= peak / top;
  return f;
}

RunSummary run_relax(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunSummary s;
  s.experiment = to_string(Experiment::Relax);
  const SimConfig& sim = cfg.sim;
  const OneParticleDensity f_in = make_profile(cfg.init, sim.alpha);
  const InitialSampler init(f_in, cfg.init, sim);
  const auto times = all_times(sim);
  const auto traces = run_traces(cfg, sim, init, times, true, sim.seed);
  const double side = cfg.observe_cell;
  const CompactBox box = observation_box(cfg, f_in);

  std::uint64_t violations = 0, events = 0;
  double p_drift = 0.0, e_drift = 0.0;
  for (const auto& tr : traces) {
    violations += tr.audit_violations + tr.snapshot_violations;
    events += tr.audit_events;
    p_drift = std::max(p_drift, tr.momentum_drift);
    e_drift = std::max(e_drift, tr.energy_drift);
  }
  s.metrics["exclusion_violations"] = static_cast<double>(violations);
  s.metrics["audited_events"] = static_cast<double>(events);
  s.metrics["momentum_drift"] = p_drift;
  s.metrics["energy_drift_rel"] = e_drift;

  const double alpha = sim.alpha;
  const double n = static_cast<double>(sim.n_particles);
  const double t2 = n * n / (n * (n - 1.0));
  bool bounds_ok = true;
  const fs::path dir = cfg.out_dir;
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const double t = times[ti];
    const MarginalEstimate fine = merged(traces, ti, sim, side, true);
    const double k1 = delta_norm(fine);
    const double k2 = delta_norm(fine.with_order(2));
    // T_{2,N} / alpha^2 = 1 / (N (N-1) delta^6), in the estimator's own rounding.
    const double vol = fine.cell_volume();
    const double k2_cap = 1.0 / (n * (n - 1.0) * vol * vol);
    bounds_ok = bounds_ok && k1 <= 1.0 / fine.alpha() && k2 <= k2_cap &&
                k2_cap <= std::exp(4.0) / (alpha * alpha);
    EventCounters sum;
    EventCounters prev;
    for (const auto& tr : traces) {
      sum += tr.counters[ti];
      if (ti > 0) prev += tr.counters[ti - 1];
    }
    const double proposed = static_cast<double>(sum.proposed - prev.proposed);
    const double accepted = static_cast<double>(sum.accepted - prev.accepted);
    const MarginalEstimate obs = merged(traces, ti, sim, side);
    std::map<std::string, double> row{{"t", t},
                                      {"k1_delta_norm", k1},
                                      {"k2_delta_norm", k2},
                                      {"acceptance_ratio", proposed > 0.0 ? accepted / proposed : 0.0},
                                      {"entropy", fermionic_entropy(obs)}};
    s.tables["snapshots"].push_back(row);
    if (!dir.empty()) write_marginals(dir, t, obs, cfg.k2_csv_limit);
  }
  s.metrics["bounds_ok"] = bounds_ok ? 1.0 : 0.0;
  s.metrics["k2_bound_factor"] = t2;

  if (traces.size() >= 2) {
    // Split-half stationarity: replicas of half A at T against half B at 0,
    // compared with A at 0 against B at 0.
    const std::size_t last = times.size() - 1;
    const MarginalEstimate b0 = half(traces, 0, sim, side, 1);
    const auto ref = [&](const CellIndex& c) { return b0.value(c); };
    const auto stat = [&](const MarginalEstimate& e) { return l1_distance(e, ref, box); };
    const MarginalEstimate a0 = half(traces, 0, sim, side, 0);
    const MarginalEstimate at = half(traces, last, sim, side, 0);
    const double d0 = stat(a0);
    const double dt = stat(at);
    const double sd = std::hypot(bootstrap_sd(a0, cfg.bootstrap, sim.seed ^ 0xa0, stat),
                                 bootstrap_sd(at, cfg.bootstrap, sim.seed ^ 0xa1, stat));
    s.metrics["l1_split_t0"] = d0;
    s.metrics["l1_split_T"] = dt;
    s.metrics["l1_split_sigma"] = sd;
    s.metrics["stationary_within_3sigma"] = std::abs(dt - d0) <= 3.0 * sd ? 1.0 : 0.0;
  }
  if (!dir.empty()) write_events(dir, traces, times);
  s.passed = violations == 0 && p_drift <= 1e-9 && bounds_ok;
  s.timing["wall_seconds"] = seconds_since(start);
  finish(s, cfg);
  return s;
}

RunSummary run_converge(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunSummary s;
  s.experiment = to_string(Experiment::Converge);
  const double alpha = cfg.sim.alpha;
  const auto f_in = std::make_shared<const OneParticleDensity>(make_profile(cfg.init, alpha));
  std::function<double(const Vec3&)> start_fn = f_in->eval;
  if (cfg.init.family == "conditioned_product") {
    const LimitMarginal lim = solve_a(*f_in, alpha);
    s.metrics["a_coeff"] = lim.a_coeff;
    start_fn = lim;
  }
  const double L = uu_half_width(cfg, *f_in);
  note_narrow_grid(s, cfg, *f_in, L);
  const DensityField f0 = field_from(start_fn, cfg.uu.grid_n, L, alpha);
  const SolveResult ref = solve_reference(cfg, f0);
  s.timing["uu_seconds"] = seconds_since(start);
  const CompactBox box = observation_box(cfg, *f_in);
  const auto times = all_times(cfg.sim);
  const double side = cfg.observe_cell;

  std::vector<double> d_final, sd_final;
  for (const std::int64_t n : cfg.n_sweep) {
    SimConfig sim = cfg.sim;
    sim.n_particles = n;
    const InitialSampler init(*f_in, cfg.init, sim);
    const std::uint64_t master = sweep_seed(sim.seed, n);
    const auto traces = run_traces(cfg, sim, init, times, false, master);
    const fs::path dir = cfg.out_dir.empty() ? fs::path() : fs::path(cfg.out_dir) / ("N" + std::to_string(n));
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      const double t = times[ti];
      const DensityField& f = field_at(ref, t);
      const MarginalEstimate est = merged(traces, ti, sim, side);
      const auto stat = [&](const MarginalEstimate& e) { return l1_distance(e, f, box); };
      const double d = stat(est);
      const double sd = bootstrap_sd(est, cfg.bootstrap, master ^ 0xb5, stat);
      const std::string key = "[N=" + std::to_string(n) + ",t=" + tag(t) + "]";
      s.metrics["l1_distance" + key] = d;
      s.metrics["l1_sigma" + key] = sd;
      s.tables["D_N"].push_back({{"N", static_cast<double>(n)}, {"t", t}, {"D", d}, {"sigma", sd}});
      if (ti + 1 == times.size()) {
        d_final.push_back(d);
        sd_final.push_back(sd);
      }
      if (!dir.empty()) write_marginals(dir, t, est, cfg.k2_csv_limit);
    }
    if (!dir.empty()) write_events(dir, traces, times);
  }
  if (!cfg.out_dir.empty()) {
    for (std::size_t i = 0; i < ref.times.size(); ++i) write_field(cfg.out_dir, ref.times[i], ref.snapshots[i]);
  }
  s.passed = decreasing_beyond_sigma(d_final, sd_final);
  s.metrics["decreasing_beyond_1sigma"] = s.passed ? 1.0 : 0.0;
  s.timing["wall_seconds"] = seconds_since(start);
  finish(s, cfg);
  return s;
}

RunSummary run_chaos(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunSummary s;
  s.experiment = to_string(Experiment::Chaos);
  const OneParticleDensity f_in = make_profile(cfg.init, cfg.sim.alpha);
  const CompactBox box = observation_box(cfg, f_in);
  const std::vector<double> times{0.0, cfg.sim.t_final};
  const double side = cfg.observe_cell;

  std::vector<std::vector<double>> d(2), sd(2);
  for (const std::int64_t n : cfg.n_sweep) {
    SimConfig sim = cfg.sim;
    sim.n_particles = n;
    sim.snapshot_times.clear();
    const InitialSampler init(f_in, cfg.init, sim);
    const std::uint64_t master = sweep_seed(sim.seed, n);
    const auto traces = run_traces(cfg, sim, init, times, false, master);
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      const MarginalEstimate est = merged(traces, ti, sim, side);
      const auto stat = [&](const MarginalEstimate& e) {
        return chaos_defect(e.with_order(2), e, box);
      };
      const double v = stat(est);
      const double e = bootstrap_sd(est, cfg.bootstrap, master ^ 0xc4, stat);
      d[ti].push_back(v);
      sd[ti].push_back(e);
      const std::string key = "[N=" + std::to_string(n) + ",t=" + tag(times[ti]) + "]";
      s.metrics["chaos_defect" + key] = v;
      s.metrics["chaos_sigma" + key] = e;
      s.tables["chaos"].push_back(
          {{"N", static_cast<double>(n)}, {"t", times[ti]}, {"defect", v}, {"sigma", e}});
    }
  }
  const bool at0 = decreasing_beyond_sigma(d[0], sd[0]);
  const bool atT = decreasing_beyond_sigma(d[1], sd[1]);
  s.metrics["decreasing_t0"] = at0 ? 1.0 : 0.0;
  s.metrics["decreasing_T"] = atT ? 1.0 : 0.0;
  s.passed = at0 && atT;
  s.timing["wall_seconds"] = seconds_since(start);
  finish(s, cfg);
  return s;
}

RunSummary run_hierarchy_check(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunSummary s;
  s.experiment = to_string(Experiment::HierarchyCheck);
  const double alpha = cfg.sim.alpha;
  const double L = cfg.uu.grid_l > 0.0 ? cfg.uu.grid_l : 3.0;
  const int n = cfg.uu.grid_n;
  const SphereQuadrature quad = SphereQuadrature::with_nodes(cfg.uu.n_omega);
  const CrossSectionSpec& kernel = cfg.sim.kernel;
  double worst_c3 = 0.0, worst_cons = 0.0;
  for (int i = 0; i < cfg.hierarchy_fields; ++i) {
    const DensityField f = random_field(n, L, alpha, 0.9 / alpha, derive_seed(cfg.sim.seed, i));
    const NullityResult c3 = check_C3_nullity(f, 1, kernel, quad);
    const ConsistencyResult cons = factorization_consistency(f, kernel, quad);
    const NormScalingRow ns = norm_scaling(f, kernel, quad);
    const double c3_rel = c3.term_scale > 0.0 ? c3.residual / c3.term_scale : 0.0;
    worst_c3 = std::max(worst_c3, c3_rel);
    worst_cons = std::max(worst_cons, cons.relative);
    s.tables["fields"].push_back({{"field", static_cast<double>(i)},
                                  {"c3_residual", c3.residual},
                                  {"c3_term_scale", c3.term_scale},
                                  {"consistency_relative", cons.relative},
                                  {"q_norm", cons.q_norm},
                                  {"sup_f", ns.sup_f},
                                  {"ratio_c1", ns.ratio_c1},
                                  {"ratio_c2", ns.ratio_c2}});
  }
  const DensityField g = random_field(n, L, alpha, 0.9 / alpha, derive_seed(cfg.sim.seed, 1001));
  const DensityField h = random_field(n, L, alpha, 0.5 / alpha, derive_seed(cfg.sim.seed, 1002));
  const NullityResult broken =
      evaluate_C3(SymmetricGridFunction({g, h, g, h}), 1, alpha, kernel, quad);
  const double broken_rel = broken.term_scale > 0.0 ? broken.residual / broken.term_scale : 0.0;
  s.metrics["c3_worst_relative"] = worst_c3;
  s.metrics["consistency_worst_relative"] = worst_cons;
  s.metrics["c3_counterexample_relative"] = broken_rel;
  s.passed = worst_c3 <= 1e-12 && worst_cons <= 1e-10 && broken_rel > 1e-12;
  s.timing["wall_seconds"] = seconds_since(start);
  finish(s, cfg);
  return s;
}

RunSummary run_uu_solve(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunSummary s;
  s.experiment = to_string(Experiment::UuSolve);
  const double alpha = cfg.sim.alpha;
  const OneParticleDensity f_in = make_profile(cfg.init, alpha);
  const double L = uu_half_width(cfg, f_in);
  note_narrow_grid(s, cfg, f_in, L);
  DensityField f0;
  if (cfg.init.profile == "fermi_dirac") {
    // Grid Fermi-Dirac state of unit trapezoid mass (not truncated).
    const double mu = fermi_dirac_mu(alpha, cfg.init.beta, cfg.uu.grid_n, L);
    f0 = fermi_dirac(alpha, cfg.init.beta, mu, cfg.uu.grid_n, L);
    s.metrics["mu"] = mu;
  } else {
    f0 = field_from(f_in.eval, cfg.uu.grid_n, L, alpha);
  }
  const SolveResult res = solve_reference(cfg, f0);
  const DriftReport drift = moment_drift(res.diagnostics);
  double max_f = 0.0;
  std::size_t below = 0, above = 0;
  bool exceeds = false;
  for (const auto& d : res.diagnostics) {
    max_f = std::max(max_f, d.bounds.max_value);
    below += d.bounds.below_zero;
    above += d.bounds.above_bound;
    exceeds = exceeds || d.dt_exceeds_heuristic;
  }
  s.metrics["mass_drift_rel"] = drift.mass;
  s.metrics["momentum_drift_rel"] = drift.momentum;
  s.metrics["energy_drift_rel"] = drift.energy;
  s.metrics["max_f"] = max_f;
  s.metrics["max_f_times_alpha"] = max_f * alpha;
  s.metrics["below_zero_nodes"] = static_cast<double>(below);
  s.metrics["above_bound_nodes"] = static_cast<double>(above);
  s.metrics["dt_exceeds_heuristic"] = exceeds ? 1.0 : 0.0;
  s.metrics["l1_from_start"] = field_l1(res.snapshots.back(), f0);
  s.metrics["entropy_start"] = fermionic_entropy(f0);
  s.metrics["entropy_final"] = fermionic_entropy(res.snapshots.back());
  for (std::size_t i = 0; i < res.times.size(); ++i) {
    const Moments m = moments(res.snapshots[i]);
    s.tables["moments"].push_back({{"t", res.times[i]},
                                   {"mass", m.mass},
                                   {"px", m.momentum(0)},
                                   {"py", m.momentum(1)},
                                   {"pz", m.momentum(2)},
                                   {"energy", m.energy}});
    if (!cfg.out_dir.empty()) write_field(cfg.out_dir, res.times[i], res.snapshots[i]);
  }
  s.passed = std::max({drift.mass, drift.momentum, drift.energy}) <= 1e-6 &&
             max_f <= 1.0 / alpha + 1e-9;
  s.timing["wall_seconds"] = seconds_since(start);
  finish(s, cfg);
  return s;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::Relax: return run_relax(cfg);
    case Experiment::Converge: return run_converge(cfg);
    case Experiment::Chaos: return run_chaos(cfg);
    case Experiment::HierarchyCheck: return run_hierarchy_check(cfg);
    case Experiment::UuSolve: return run_uu_solve(cfg);
  }
  throw ConfigError("unknown experiment");
}

}  // namespace fermikac
