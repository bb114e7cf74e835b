// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Tolerances and runtime limits are fixed here, not read from configs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "weyllab/config.hpp"
#include "weyllab/deltadesign.hpp"
#include "weyllab/experiments.hpp"
#include "weyllab/grushin.hpp"
#include "weyllab/orchestrate.hpp"
#include "weyllab/rng.hpp"
#include "weyllab/symbols.hpp"
#include "weyllab/toml_lite.hpp"

using namespace weyllab;
namespace fs = std::filesystem;

namespace {

constexpr double kDetGapTol = 1e-8;
constexpr double kSvSlack = 1e-10;
// Roundoff allowance on log-scale floors, which are attained exactly at N = 1.
constexpr double kLogRoundoff = 1e-12;
constexpr double kSlopeTol = 0.3;
constexpr double kPushforwardTol = 0.05;
constexpr double kWeylFraction = 0.9;
constexpr double kWeylKappaFloor = 0.7;
constexpr int kWeylMaxDim = 2048;
constexpr double kLineTol = 1e-8;
constexpr double kJensenTol = 1e-4;
constexpr double kFitR2 = 0.8;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string config_path(const std::string& name) {
  return std::string(WEYLLAB_CONFIG_DIR) + "/" + name;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

CMat random_matrix(Stream& s, int rows, int cols) {
  CMat A(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) A(i, j) = s.complex_normal();
  }
  return A;
}

// Threshold drawn uniformly from the middle half of the gap after the N-th
// smallest singular value, N uniform in [1, dim - 1].
double clean_threshold(const CMat& A, Stream& s, int* N) {
  const RVec t = singular_values(A).reverse();
  const int dim = static_cast<int>(t.size());
  *N = 1 + static_cast<int>(s.uniform() * (dim - 1));
  const double lo = t(*N - 1), hi = t(*N);
  return lo + (0.25 + 0.5 * s.uniform()) * (hi - lo);
}

Outcome grushin_identity() {
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    Stream s(1, fnv1a("acceptance-grushin"), k);
    const int dim = 5 + static_cast<int>(s.uniform() * 36);
    const CMat A = random_matrix(s, dim, dim);
    int N = 0;
    const double tau0 = clean_threshold(A, s, &N);
    const DetIdentity d = det_identity(build_grushin(A, tau0));
    worst = std::max({worst, d.gap, d.singular ? 1.0 : 0.0});
  }
  return {worst <= kDetGapTol, "200 matrices, dims 5-40, worst relative gap " + fmt(worst)};
}

Outcome sv_inequalities_and_transfers() {
  int violations = 0;
  int checked = 0;
  for (int k = 0; k < 1000; ++k) {
    Stream s(2, fnv1a("acceptance-sv"), k);
    const int dim = 3 + static_cast<int>(s.uniform() * 14);
    const CMat A = random_matrix(s, dim, dim);
    const CMat B = std::exp(4.0 * s.uniform() - 3.0) * random_matrix(s, dim, dim);
    const SvInequalityReport ineq = sv_inequalities(A, B, kSvSlack);
    violations += ineq.violations;
    checked += ineq.checked;
    int N = 0;
    const double tau0 = clean_threshold(A, s, &N);
    const GrushinData gd = build_grushin(A, tau0);
    violations += sv_transfer(gd, kSvSlack).violations;
    CMat Q = random_matrix(s, dim, dim);
    Q /= op_norm(Q);
    const double delta = 0.5 * s.uniform() * gd.t_next();
    violations += sv_transfer_perturbed(gd, Q, delta, kSvSlack).violations;
  }
  return {violations == 0, "1000 instances, " + std::to_string(checked) +
                               " inequality pairs, " + std::to_string(violations) +
                               " violations beyond -1e-10"};
}

std::vector<int> random_modes(Stream& s, int N) {
  std::vector<int> pool;
  for (int k = -20; k <= 20; ++k) pool.push_back(k);
  for (int i = 0; i < N; ++i) {
    const int j = i + static_cast<int>(s.uniform() * (pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(N);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Outcome delta_certificates() {
  const double vol = 2.0 * M_PI;
  int failures = 0;
  double worst_e = 1e300, worst_m = 1e300;
  for (int N = 1; N <= 12; ++N) {
    std::vector<int> modes;
    for (int k = -(N / 2); static_cast<int>(modes.size()) < N; ++k) modes.push_back(k);
    const int grid = 256;
    const CandidateSet cand = fourier_candidates(modes, grid);
    const PointSelection sel = select_points(cand, N);
    // |det E| >= sqrt(prod E_j) / vol^(N/2), and with an identity Gramian
    // |det M| >= N! / vol^N
    const double log_det_E = std::log(std::abs(sel.E.determinant()));
    double log_prod = 0.0;
    for (int j = 0; j < N; ++j) log_prod += std::log(sel.ledger(j));
    const double e_floor = 0.5 * log_prod - 0.5 * N * std::log(vol);
    const CVec q = point_mass_potential(grid, sel.candidate_index, cand.weight());
    const CMat M = mq_matrix(q, cand.values, cand.values.conjugate(), cand.weight());
    const double log_det_M = std::log(std::abs(M.determinant()));
    const double m_floor = std::lgamma(N + 1.0) - N * std::log(vol);
    worst_e = std::min(worst_e, log_det_E - e_floor);
    worst_m = std::min(worst_m, log_det_M - m_floor);
    if (log_det_E < e_floor - kLogRoundoff || log_det_M < m_floor - kLogRoundoff) ++failures;
  }
  // Singular value floors on random selections: random mode sets and grids,
  // and random real-analytic frames with a non-trivial Gramian.
  int floor_violations = 0;
  for (int k = 0; k < 100; ++k) {
    Stream s(3, fnv1a("acceptance-floors"), k);
    const int N = 2 + static_cast<int>(s.uniform() * 11);
    CandidateSet cand;
    if (k % 2 == 0) {
      cand = fourier_candidates(random_modes(s, N), 64 + static_cast<int>(s.uniform() * 448));
    } else {
      const SmoothFrame frame = SmoothFrame::random(N, 0.5, 3.0, s);
      const SpectralBasis basis(128 + static_cast<int>(s.uniform() * 384), 0.1);
      cand = node_candidates(basis, frame.node_values(basis));
    }
    const PointSelection sel = select_points(cand, N);
    const CVec q = point_mass_potential(static_cast<int>(cand.values.rows()), sel.candidate_index,
                                        cand.weight());
    const CMat M = mq_matrix(q, cand.values, cand.values.conjugate(), cand.weight());
    const RVec sv = singular_values(M);
    if (mq_s1_floor(sel) > sv(0) * (1 + 1e-12)) ++floor_violations;
    const auto floors = mq_singular_floors(sel, sv(0));
    for (int j = 0; j < N; ++j) floor_violations += floors[j] > sv(j) * (1 + 1e-10) ? 1 : 0;
  }
  const bool pass = failures == 0 && floor_violations == 0;
  return {pass, "N<=12 det floors held with log margins >= " + fmt(std::min(worst_e, worst_m)) +
                    "; " + std::to_string(floor_violations) +
                    " floor violations on 100 random selections"};
}

Outcome delta_remainder_slope() {
  const double h = 1e-3, s = 2.0, eps = 0.1;
  const int n = 1;
  const std::vector<double> Ls{8.0, 16.0, 32.0, 64.0};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double L : Ls) {
    const double x = std::log(L);
    const double y = std::log(delta_remainder_norm(h, L, s));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(Ls.size());
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double target = -(s - n / 2.0 - eps);
  return {std::abs(slope - target) <= kSlopeTol,
          "slope " + fmt(slope) + " against " + fmt(target) + " (s=2, eps=0.1)"};
}

Outcome pushforward() {
  const SymbolModel p = schrodinger_cos(1.0);
  const PlanarDomain gamma = PlanarDomain::rectangle(0.37, 2.23, -0.46, 0.43);
  const TildeSymbol tilde = build_tilde(p, gamma.expanded(0.3));
  const PushforwardReport base = pushforward_check(tilde, gamma, PhaseGrid{512, 512}, 64);
  const PushforwardReport fine = pushforward_check(tilde, gamma, PhaseGrid{1024, 1024}, 128);
  const bool pass = base.gap <= kPushforwardTol && fine.gap < base.gap;
  return {pass, "gap " + fmt(base.gap) + " at 512^2, " + fmt(fine.gap) + " at 1024^2"};
}

Outcome renormalization() {
  RenormExperimentConfig cfg;
  cfg.dim = 256;
  cfg.n_small = 20;
  cfg.small = 1e-8;
  cfg.seed = 3;
  const RenormExperimentReport r = renorm_experiment(cfg);
  bool stages_ok = true;
  for (const auto& s : r.trace.stages) stages_ok = stages_ok && s.certified;
  const double worst = *std::min_element(r.trace.band_margins.begin(), r.trace.band_margins.end());
  const double control =
      *std::min_element(r.control.band_margins.begin(), r.control.band_margins.end());
  const bool pass = r.trace.all_bands_certified && stages_ok && r.control_fails;
  return {pass, std::to_string(r.trace.stages.size()) + " stages, worst band margin " +
                    fmt(worst) + "; control worst margin " + fmt(control)};
}

Outcome weyl_monte_carlo() {
  const RunPlan plan = load_config(config_path("weyl_schrodinger.toml"));
  WeylConfig cfg = plan.weyl;
  cfg.certify = true;
  const WeylReport rep = weyl_experiment(cfg);
  const WeylRung& r = rep.rungs.at(0);
  int within = 0;
  for (const auto& d : r.draws) within += std::abs(d.deviation) <= 0.15 * r.weyl_term ? 1 : 0;
  const double fraction = r.draws.empty() ? 0.0 : static_cast<double>(within) / r.draws.size();
  const bool control_violates = std::abs(r.control.deviation) > 0.15 * r.weyl_term;
  const bool setup = r.h == 0.02 && r.dim <= kWeylMaxDim && rep.kappa.kappa >= kWeylKappaFloor &&
                     r.draws.size() == 50 &&
                     std::abs(r.delta - std::exp(-0.15 / 0.02)) <= 1e-15 * r.delta;
  const bool pass = setup && fraction >= kWeylFraction && control_violates;
  return {pass, std::to_string(within) + "/" + std::to_string(r.draws.size()) +
                    " draws within 15% of the Weyl term " + fmt(r.weyl_term) + " (dim " +
                    std::to_string(r.dim) + ", kappa " + fmt(rep.kappa.kappa) + "); control count " +
                    std::to_string(r.control.count)};
}

Outcome counterexample() {
  const RunPlan plan = load_config(config_path("counterexample.toml"));
  const CounterexampleReport r = counterexample_check(plan.counterexample);
  int checked = 0;
  for (const auto& d : r.draws) checked += d.checked;
  const bool pass = r.draws.size() == 20 && r.worst_distance <= kLineTol;
  return {pass, std::to_string(r.draws.size()) + " perturbations, " + std::to_string(checked) +
                    " eigenvalues checked, worst distance " + fmt(r.worst_distance)};
}

Outcome stochastics() {
  const RunPlan plan = load_config(config_path("stochastics.toml"));
  const StochasticsReport r = stochastics_experiment(plan.stochastics);
  int matches = 0;
  for (const auto& p : r.probes) matches += p.winding.winding == p.winding.zeros_inside ? 1 : 0;
  const FailureCurve& f = r.failure;
  const bool pass = r.probes.size() == 10 && matches == 10 &&
                    r.max_jensen_residual <= kJensenTol && f.n_draws == 500 && f.non_increasing &&
                    f.fit_points >= 3 && f.fit_r2 >= kFitR2;
  return {pass, std::to_string(matches) + "/10 windings match, Jensen residual " +
                    fmt(r.max_jensen_residual) + ", failure fit R^2 " + fmt(f.fit_r2) + " over " +
                    std::to_string(f.fit_points) + " points"};
}

Outcome reproducibility() {
  const RunPlan plan = load_config(config_path("reproducibility.toml"));
  const fs::path root = fs::temp_directory_path() /
                        ("weyllab-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  const RunResult a = orchestrate(plan, root.string());
  const RunResult b = orchestrate(plan, root.string());
  auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  const std::string ea = slurp(fs::path(a.run_dir) / "eigenvalues.csv");
  const std::string eb = slurp(fs::path(b.run_dir) / "eigenvalues.csv");
  fs::remove_all(root);
  const bool pass = !ea.empty() && ea == eb && a.run_dir != b.run_dir;
  return {pass, "eigenvalues.csv " + std::to_string(ea.size()) + " bytes, " +
                    (ea == eb ? "identical" : "different")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "bordered determinant identity", 30, grushin_identity},
      {2, "singular value inequalities and transfers", 60, sv_inequalities_and_transfers},
      {3, "delta-point certificates", 60, delta_certificates},
      {4, "delta approximation decay", 30, delta_remainder_slope},
      {5, "pushforward of the phi Laplacian", 300, pushforward},
      {6, "staged renormalization", 300, renormalization},
      {7, "Weyl-law Monte Carlo", 3600, weyl_monte_carlo},
      {8, "transport counterexample", 120, counterexample},
      {9, "normalized determinant stochastics", 1800, stochastics},
      {10, "reproducibility", 300, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("%s  [%d] %s: %s (%.1f s, limit %.0f s)\n", pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), o.detail.c_str(), secs, c.limit_seconds);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
