#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fermikac/config.hpp"
#include "fermikac/initdata.hpp"
#include "fermikac/observables.hpp"
#include "fermikac/process.hpp"
#include "fermikac/uu.hpp"

namespace fermikac {

enum class Experiment { Relax, Converge, Chaos, HierarchyCheck, UuSolve };
std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);

struct InitConfig {
  std::string family = "two_scale";  ///< conditioned_product | two_scale
  std::string profile = "double_bump";  ///< maxwellian | double_bump | uniform | fermi_dirac
  double sigma = 0.7;
  double separation = 2.0;
  double cutoff = 3.0;
  double beta = 1.0;
  double radius = 5.0;
  Vec3 lower = Vec3::Zero();
  Vec3 upper = Vec3::Ones();
  double g_bound = 0.0;        ///< declared sup bound; 0 = use the certified one
  std::int64_t burn_in = -1;   ///< -1 = 10 N single-site steps
};

struct UuConfig {
  int grid_n = 21;
  double grid_l = 0.0;  ///< 0 = support radius + m_cut
  int n_omega = 32;
  double dt = 1e-3;
  bool conservative = true;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Relax;
  SimConfig sim;
  InitConfig init;
  UuConfig uu;
  int replicas = 8;
  CompactBox box;
  bool box_set = false;           ///< false = bounding box of the profile support
  double observe_cell = 0.0;      ///< 0 = exclusion cells
  std::string out_dir;            ///< empty = no files
  std::vector<std::int64_t> n_sweep;
  int threads = 1;
  int bootstrap = 64;
  std::size_t k2_csv_limit = 200000;
  double kernel_range = 1.0;      ///< length scale of the custom (Born) kernel
  int hierarchy_fields = 5;

  static ExperimentConfig from_flat(const FlatConfig& flat);
  FlatConfig to_flat() const;
  /// Throws ConfigError on any inconsistency, before any computation.
  void validate() const;
};

/// Metrics and tables of one experiment. Every metric must be finite.
struct RunSummary {
  std::string experiment;
  std::map<std::string, double> metrics;
  std::map<std::string, std::vector<std::map<std::string, double>>> tables;
  std::map<std::string, double> timing;  ///< wall-clock; kept out of metrics
  std::vector<std::string> notes;
  bool passed = true;

  std::string to_json() const;
};

/// The profile named in the init section.
OneParticleDensity make_profile(const InitConfig& init, double alpha);
/// Initial ensemble of N particles from the configured family.
ParticleEnsemble sample_initial(const OneParticleDensity& f_in, const InitConfig& init,
                                const SimConfig& sim, Rng& rng);
/// U-U grid half-width: uu.grid_l, or support radius + m_cut.
double uu_half_width(const ExperimentConfig& cfg, const OneParticleDensity& f_in);
/// Nodal samples of fn rescaled to unit trapezoid mass.
DensityField field_from(const std::function<double(const Vec3&)>& fn, int n, double half_width,
                        double alpha);
/// Box used for observables.
CompactBox observation_box(const ExperimentConfig& cfg, const OneParticleDensity& f_in);

/// Run fn(r) for r = 0..count-1 on up to `threads` threads; results are
/// returned in replica order regardless of scheduling.
template <typename T>
std::vector<T> run_replicas(int count, int threads, const std::function<T(int)>& fn);

/// Strictly decreasing, each drop larger than the combined 1-sigma error.
bool decreasing_beyond_sigma(const std::vector<double>& values, const std::vector<double>& sigmas);

RunSummary run_relax(const ExperimentConfig& cfg);
RunSummary run_converge(const ExperimentConfig& cfg);
RunSummary run_chaos(const ExperimentConfig& cfg);
RunSummary run_hierarchy_check(const ExperimentConfig& cfg);
RunSummary run_uu_solve(const ExperimentConfig& cfg);
RunSummary run_experiment(const ExperimentConfig& cfg);

/// Smooth random density on the U-U grid: a sum of random Gaussian bumps,
/// scaled so that its maximum is `peak`.
DensityField random_field(int n, double half_width, double alpha, double peak, std::uint64_t seed);

}  // namespace fermikac

#include "fermikac/harness_impl.hpp"
