#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "weyllab/linalg.hpp"
#include "weyllab/operators.hpp"
#include "weyllab/perturbation.hpp"
#include "weyllab/renorm.hpp"
#include "weyllab/stochastics.hpp"
#include "weyllab/symbols.hpp"

namespace weyllab {

struct SpectrumCount {
  int count = 0;  // with algebraic multiplicity, boundary cases included
  int boundary_ambiguous = 0;
  std::vector<cd> inside;
};

/// Counts eigenvalues in gamma. Eigenvalues within `boundary_tol` of the
/// boundary are counted and flagged.
SpectrumCount count_eigenvalues_in(const std::vector<cd>& eigs, const PlanarDomain& gamma,
                                   double boundary_tol);

/// Dense eigensolve of op, then counts in gamma with boundary tolerance
/// 1e-8 * ||op||. Refuses when gamma leaves the disc |z| <= window.
SpectrumCount count_spectrum_in(const DiscretizedOperator& op, const PlanarDomain& gamma,
                                double window = std::numeric_limits<double>::infinity());

/// Largest level with coercive_radius(level) <= h K / 2 on the given basis,
/// i.e. the part of the plane whose preimage the basis resolves. Infinite for
/// non-coercive symbols is never returned: those refuse.
double resolved_window(const SymbolModel& sym, const SpectralBasis& basis);

/// Smallest odd basis resolving gamma (coercive radius at max|z| doubled).
SpectralBasis basis_for(const SymbolModel& sym, const PlanarDomain& gamma, double h);

struct KappaCertificate {
  double kappa = 0.0;
  double kappa_floor = 0.0;
  bool certified = false;
  std::vector<cd> z_samples;
  std::vector<double> kappa_values;
  nlohmann::json to_json() const;
};

/// Fits kappa at `samples` points of the boundary of gamma and takes the
/// minimum.
KappaCertificate certify_kappa(const SymbolModel& sym, const PlanarDomain& gamma,
                               double kappa_floor, int samples = 8);

struct WeylConfig {
  SymbolModel model;
  PlanarDomain gamma;
  std::vector<double> h_values;
  ScheduleInput schedule;
  double tau0 = 0.5;
  CoefficientLaw law;
  double s = 2.0;
  int n_draws = 50;
  std::uint64_t seed = 1;
  double rel_tolerance = 0.15;
  // Budget parameters for the failure-probability table.
  std::vector<double> eps_tilde;
  double r_band = 0.1;
  double budget_constant = 1.0;
  double kappa_floor = 0.7;
  bool certify = true;
  int threads = 1;
};

struct DrawRecord {
  int draw = -1;  // -1 marks the delta = 0 control
  std::uint64_t stream_id = 0;
  double delta = 0.0;
  int count = 0;
  int boundary_ambiguous = 0;
  double deviation = 0.0;
  double alpha_norm = 0.0;
  std::vector<cd> eigenvalues;  // sorted
  nlohmann::json to_json() const;
};

struct WeylRung {
  double h = 0.0;
  int dim = 0;
  double volume = 0.0;
  double weyl_term = 0.0;
  double delta = 0.0;
  double L = 0.0;
  double R = 0.0;
  int D = 0;
  double band_volume = 0.0;
  DrawRecord control;
  std::vector<DrawRecord> draws;
  double fraction_within = 0.0;
  double median_abs_deviation = 0.0;
  double scaled_median = 0.0;  // median |dev| h^n / vol
  std::vector<double> budget;  // per eps_tilde
  std::vector<double> failure_probability;
  bool control_within = false;
  nlohmann::json schedule;
  double seconds = 0.0;
  nlohmann::json to_json() const;
};

struct WeylReport {
  std::string model;
  nlohmann::json gamma;
  KappaCertificate kappa;
  std::vector<WeylRung> rungs;
  std::vector<double> eps_tilde;
  double r_band = 0.0;
  double rel_tolerance = 0.0;
  bool scaling_non_increasing = true;
  double seconds = 0.0;
  nlohmann::json to_json() const;
};

/// Called after every finished draw (rung index, record), in draw order.
using DrawCallback = std::function<void(int, const DrawRecord&)>;

/// Monte Carlo over random admissible potentials for every h in the ladder,
/// with the delta = 0 control first.
WeylReport weyl_experiment(const WeylConfig& cfg, const DrawCallback& on_draw = {});

/// (budget_constant / h^n) (eps_tilde / r + r + ln(1/r) band_volume).
double weyl_budget(double eps_tilde, double r, double band_volume, double h, int n,
                   double constant);

struct CounterexampleConfig {
  cd g_mean = 0.0;
  cd g_cos = 1.0;
  cd g_sin = cd(0.0, 0.3);
  double h = 0.2;
  int size = 257;
  double delta = 0.1;
  double L = 1.0;
  double R = 1.0;
  double window_fraction = 0.5;
  int n_draws = 20;
  std::uint64_t seed = 1;
  double tolerance = 1e-8;
};

struct CounterexampleDraw {
  int draw = 0;
  std::uint64_t stream_id = 0;
  double predicted_im = 0.0;
  double max_distance = 0.0;
  int checked = 0;
  std::vector<cd> eigenvalues;
};

struct CounterexampleReport {
  std::vector<CounterexampleDraw> draws;
  double worst_distance = 0.0;
  bool all_on_line = false;
  double window = 0.0;
  nlohmann::json to_json() const;
};

/// Spectrum of hD + g + delta q for random admissible q. Eigenvalues with
/// |Re(lambda - mean)| inside the resolved window are compared with the line
/// Im z = mean Im(g + delta q).
CounterexampleReport counterexample_check(const CounterexampleConfig& cfg);

struct PseudospectrumGrid {
  std::vector<double> re;
  std::vector<double> im;
  RMat sigma;  // rows: im index, cols: re index
  void write_csv(std::ostream& os) const;
};

PseudospectrumGrid pseudospectrum_grid(const CMat& A, const std::vector<double>& re,
                                       const std::vector<double>& im);

struct ZeroCountReport {
  int winding = 0;
  int direct_count = 0;
  double weyl_term = 0.0;
  int samples = 0;
  int jitters = 0;
  nlohmann::json to_json() const;
};

/// Winding of z -> det(P - z) along the boundary of gamma, against the direct
/// eigenvalue count and the Weyl term.
ZeroCountReport zero_count_vs_phi(const CMat& P, const PlanarDomain& gamma, double weyl_term,
                                  int boundary_samples = 512);

struct StochasticsConfig {
  SymbolModel model;
  PlanarDomain omega;  // region of the tilde construction
  cd z;
  double h = 0.1;
  ScheduleInput schedule;
  double tau0 = 0.5;
  CoefficientLaw law;
  int n_probes = 10;
  double probe_scale = 0.5;  // alpha0 of each line probe is this times a law draw
  int n_draws = 500;
  std::vector<double> eps_tilde;
  std::vector<double> small_eps;  // thresholds for the radial measure
  std::uint64_t seed = 1;
  PhaseGrid phi_grid;
};

struct ProbeRecord {
  int probe = 0;
  std::uint64_t stream_id = 0;
  LineProbe line;
  WindingResult winding;
  JensenResult jensen;
  bool match = false;
  nlohmann::json to_json() const;
};

struct StochasticsReport {
  int dim = 0;
  int D = 0;
  double delta = 0.0;
  double phi = 0.0;
  double eps0 = 0.0;
  double coupling = 0.0;
  std::vector<ProbeRecord> probes;
  bool all_windings_match = false;
  double max_jensen_residual = 0.0;
  SmallValueMeasure measure;  // on the first probe
  FailureCurve failure;
  double denominator_effect = 0.0;  // max |log|F| - both-perturbed variant| over probes
  nlohmann::json to_json() const;
};

/// Bundle for the normalized determinant at z, built from the model, its
/// tilde symbol over omega, and the lab schedule.
ModelBundle stochastics_bundle(const StochasticsConfig& cfg);

/// Line probes (pencil zeros against winding, Jensen) and the failure
/// probability curve of log|F|.
StochasticsReport stochastics_experiment(const StochasticsConfig& cfg);

struct RenormExperimentConfig {
  int dim = 256;
  int n_small = 20;
  double small = 1e-8;
  std::uint64_t seed = 1;
  RenormOptions options;
};

struct RenormExperimentReport {
  RenormTrace trace;
  RenormTrace control;  // same operator, renormalization disabled
  bool control_fails = false;
  nlohmann::json to_json() const;
};

RenormExperimentReport renorm_experiment(const RenormExperimentConfig& cfg);

double median(std::vector<double> v);

}  // namespace weyllab
