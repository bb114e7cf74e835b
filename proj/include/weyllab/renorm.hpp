#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "weyllab/deltadesign.hpp"
#include "weyllab/linalg.hpp"
#include "weyllab/operators.hpp"

namespace weyllab {

struct RenormOptions {
  double h = 0.5;        // scale entering tau0^(k) and the stage sizes
  double tau0 = 0.5;
  double theta = 0.2;
  int n = 1;
  double n1_lab = 1.0;
  double n2_lab = 3.0;
  int n_theta = 8;       // below this count the ladder steps by one
  double C0 = 1.0;
  int max_retries = 3;
  double L = 1e300;      // delta truncation cutoff
  double s = 2.0;
  bool enabled = true;

  double tau(int k) const;
  double stage_delta(int k, double C) const;  // tau(k-1) h^{N1+n} / C
};

/// N^(0) = N0; N^(k+1) = floor((1 - theta) N^(k)) while N^(k) >= n_theta,
/// then N^(k) - 1, down to 0.
std::vector<int> renorm_ladder(int N0, double theta, int n_theta);

/// True when some t_nu with nu in (n_next, n_prev] (1-based, ascending) is
/// below the threshold.
bool stage_needs_perturbation(const RVec& t_ascending, int n_prev, int n_next,
                              double threshold);

struct StageRecord {
  int k = 0;
  int n_prev = 0;
  int n_next = 0;
  double tau_prev = 0.0;
  double tau_next = 0.0;
  std::string action;  // "skip" or "perturb"
  double C = 0.0;
  int retries = 0;
  double delta = 0.0;
  std::vector<double> points;
  double alpha_norm = 0.0;       // coefficient norm of delta * Q
  std::vector<double> band_before;
  std::vector<double> band_after;
  double worst_band_margin = 0.0;  // min t_nu / tau_next over the band
  double worst_stability = 0.0;    // min of t_nu(next) - (1 - h^{N1+n}/C) t_nu(cur), nu > n_prev
  bool certified = false;

  nlohmann::json to_json() const;
};

struct RenormTrace {
  RenormOptions options;
  std::vector<int> ladder;
  std::vector<double> taus;
  std::vector<StageRecord> stages;
  CMat final_matrix;        // P0 + cumulative potential
  CVec cumulative_potential;  // node values
  double alpha_total_norm = 0.0;
  double alpha_sum_of_norms = 0.0;
  RVec final_t;             // singular values of final - z, ascending
  std::vector<double> band_margins;  // min over each band of t_nu / tau(k) at the end
  bool all_bands_certified = false;
  int stage_count_bound = 0;

  void write_jsonl(std::ostream& os) const;
  nlohmann::json summary() const;
};

/// Checks every band (N^(k), N^(k-1)] of the ladder against tau(k) using the
/// singular values t (ascending). Returns the per-band minimum ratios.
std::vector<double> band_margins(const RVec& t, const std::vector<int>& ladder,
                                 const RenormOptions& opt);

/// Runs the staged construction on P0 - z. Stage potentials are sums of
/// truncated point masses placed greedily on the current small singular
/// vectors. Throws CertificateFailure when a stage fails after all retries.
RenormTrace run_renorm(const CMat& P0, cd z, const SpectralBasis& basis,
                       const RenormOptions& opt);

/// Engineered test operator U diag(sigma) U^T: `n_small` node-localized real
/// bumps with singular value `small`, the rest a random unitary complement
/// with singular values in [1, 2].
CMat clustered_model(int dim, int n_small, double small, std::uint64_t seed);

struct LogdetBounds {
  double actual = 0.0;  // log|det relative|
  double phi_term = 0.0;
  double budget_unit = 0.0;  // eps0 / h
  double constant = 0.0;     // |actual - phi_term| / budget_unit
  double lower = 0.0;
  double upper = 0.0;
  bool contained = false;
  double min_ratio = 0.0;    // min_k t_k(relative) / t_k(P - z)
  nlohmann::json to_json() const;
};

/// Two-sided comparison of log|det P_{delta,z}| with phi(z) / h; the bounds use
/// c_cap * eps0 / h.
LogdetBounds logdet_bounds(const CMat& relative, const CMat& shifted, double phi,
                           double h, double eps0, double c_cap);

}  // namespace weyllab
