#include "weyllab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <thread>

#include "weyllab/errors.hpp"
#include "weyllab/rng.hpp"

namespace weyllab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::json complex_list(const std::vector<cd>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (const cd& z : v) out.push_back({z.real(), z.imag()});
  return out;
}

// Runs task(i) for i in [0, n) on `threads` workers and hands the results to
// `emit` in index order as soon as the prefix is complete.
template <class Result>
std::vector<Result> ordered_pool(int n, int threads,
                                 const std::function<Result(int)>& task,
                                 const std::function<void(int, const Result&)>& emit) {
  std::vector<Result> results(n);
  std::vector<char> done(n, 0);
  std::atomic<int> next{0};
  std::mutex mu;
  int emitted = 0;
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      Result r;
      try {
        r = task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        next = n;
        return;
      }
      std::lock_guard<std::mutex> lock(mu);
      results[i] = std::move(r);
      done[i] = 1;
      while (emitted < n && done[emitted] && !failure) {
        if (emit) emit(emitted, results[emitted]);
        ++emitted;
      }
    }
  };
  const int t = std::max(1, std::min(threads, n));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

SpectrumCount count_eigenvalues_in(const std::vector<cd>& eigs, const PlanarDomain& gamma,
                                   double boundary_tol) {
  SpectrumCount c;
  for (const cd& z : eigs) {
    const bool near = gamma.boundary_distance(z) <= boundary_tol;
    if (near || gamma.contains(z)) {
      ++c.count;
      c.inside.push_back(z);
      if (near) ++c.boundary_ambiguous;
    }
  }
  return c;
}

SpectrumCount count_spectrum_in(const DiscretizedOperator& op, const PlanarDomain& gamma,
                                double window) {
  if (gamma.max_abs() > window) {
    throw Refusal("count_spectrum_in: gamma leaves the resolved spectral window");
  }
  return count_eigenvalues_in(sorted_eigenvalues(op.matrix), gamma, 1e-8 * op_norm(op.matrix));
}

double resolved_window(const SymbolModel& sym, const SpectralBasis& basis) {
  if (!sym.is_coercive()) throw Refusal("resolved_window: symbol is not coercive in xi");
  const double xi_max = 0.5 * basis.h() * basis.max_mode();
  if (sym.coercive_radius(0.0) > xi_max) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (sym.coercive_radius(hi) <= xi_max) hi *= 2.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (sym.coercive_radius(mid) <= xi_max ? lo : hi) = mid;
  }
  return lo;
}

SpectralBasis basis_for(const SymbolModel& sym, const PlanarDomain& gamma, double h) {
  if (!sym.is_coercive()) throw Refusal("basis_for: symbol is not coercive in xi");
  return SpectralBasis::resolving(sym.coercive_radius(gamma.max_abs() + 1.0), h);
}

nlohmann::json KappaCertificate::to_json() const {
  return {{"kappa", kappa},
          {"kappa_floor", kappa_floor},
          {"certified", certified},
          {"z_samples", complex_list(z_samples)},
          {"kappa_values", kappa_values}};
}

KappaCertificate certify_kappa(const SymbolModel& sym, const PlanarDomain& gamma,
                               double kappa_floor, int samples) {
  KappaCertificate cert;
  cert.kappa_floor = kappa_floor;
  cert.z_samples = gamma.boundary_samples(samples);
  const std::vector<double> t = log_ladder(1e-4, 1e-2, 9);
  cert.kappa = std::numeric_limits<double>::infinity();
  for (const cd& z : cert.z_samples) {
    const KappaFit fit = fit_kappa(t, vz_profile(sym, z, t));
    const double k = fit.refused ? 0.0 : fit.kappa;
    cert.kappa_values.push_back(k);
    cert.kappa = std::min(cert.kappa, k);
  }
  if (cert.z_samples.empty()) cert.kappa = 0.0;
  cert.certified = cert.kappa >= kappa_floor;
  return cert;
}

nlohmann::json DrawRecord::to_json() const {
  return {{"draw", draw},
          {"stream_id", stream_id},
          {"delta", delta},
          {"count", count},
          {"boundary_ambiguous", boundary_ambiguous},
          {"deviation", deviation},
          {"alpha_norm", alpha_norm}};
}

nlohmann::json WeylRung::to_json() const {
  nlohmann::json d = nlohmann::json::array();
  for (const auto& r : draws) d.push_back(r.to_json());
  return {{"h", h},
          {"dim", dim},
          {"volume", volume},
          {"weyl_term", weyl_term},
          {"delta", delta},
          {"L", L},
          {"R", R},
          {"D", D},
          {"band_volume", band_volume},
          {"control", control.to_json()},
          {"control_within", control_within},
          {"draws", d},
          {"fraction_within", fraction_within},
          {"median_abs_deviation", median_abs_deviation},
          {"scaled_median", scaled_median},
          {"budget", budget},
          {"failure_probability", failure_probability},
          {"schedule", schedule},
          {"seconds", seconds}};
}

nlohmann::json WeylReport::to_json() const {
  nlohmann::json r = nlohmann::json::array();
  for (const auto& rung : rungs) r.push_back(rung.to_json());
  return {{"model", model},
          {"gamma", gamma},
          {"kappa", kappa.to_json()},
          {"eps_tilde", eps_tilde},
          {"r_band", r_band},
          {"rel_tolerance", rel_tolerance},
          {"rungs", r},
          {"scaling_non_increasing", scaling_non_increasing},
          {"seconds", seconds}};
}

double weyl_budget(double eps_tilde, double r, double band_volume, double h, int n,
                   double constant) {
  return constant / std::pow(h, n) * (eps_tilde / r + r + std::log(1.0 / r) * band_volume);
}

WeylReport weyl_experiment(const WeylConfig& cfg, const DrawCallback& on_draw) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.h_values.empty()) throw Refusal("weyl_experiment: empty h ladder");
  if (cfg.n_draws < 0) throw Refusal("weyl_experiment: negative draw count");
  if (!cfg.model.symmetric_in_xi) {
    throw Refusal("weyl_experiment: model is not even in xi; use the counterexample check");
  }
  const ParameterSchedule sched = build_schedule(cfg.schedule);
  const int n = cfg.model.dim;

  WeylReport rep;
  rep.model = cfg.model.name;
  rep.gamma = cfg.gamma.to_json();
  rep.eps_tilde = cfg.eps_tilde;
  rep.r_band = cfg.r_band;
  rep.rel_tolerance = cfg.rel_tolerance;
  if (cfg.certify) {
    rep.kappa = certify_kappa(cfg.model, cfg.gamma, cfg.kappa_floor);
    if (!rep.kappa.certified) {
      throw Refusal("weyl_experiment: kappa near the boundary of gamma is below the floor");
    }
  }
  const VolumeEstimate vol = weyl_volume(cfg.model, cfg.gamma);
  const VolumeEstimate band = boundary_band_volume(cfg.model, cfg.gamma, cfg.r_band);

  for (std::size_t rung_idx = 0; rung_idx < cfg.h_values.size(); ++rung_idx) {
    const auto tr = std::chrono::steady_clock::now();
    const double h = cfg.h_values[rung_idx];
    WeylRung rung;
    rung.h = h;
    const SpectralBasis basis = basis_for(cfg.model, cfg.gamma, h);
    if (basis.size() > 2048) throw Refusal("weyl_experiment: dimension above the 2048 cap");
    rung.dim = basis.size();
    const double window = resolved_window(cfg.model, basis);
    const DiscretizedOperator op = discretize(cfg.model, basis);
    const double tol = 1e-8 * op_norm(op.matrix);
    if (cfg.gamma.max_abs() > window) {
      throw Refusal("weyl_experiment: gamma leaves the resolved spectral window");
    }
    rung.volume = vol.value;
    rung.weyl_term = vol.value / std::pow(kTwoPi * h, n);
    rung.band_volume = band.value;
    rung.delta = sched.delta(h, cfg.tau0);
    rung.L = sched.L(h);
    rung.R = sched.R(h);
    rung.schedule = sched.snapshot(h, cfg.tau0);

    const ReferenceOperator ref = reference_eigenbasis(basis, basis.size());
    const std::vector<int> idx = ref.admissible(rung.L);
    if (idx.empty()) throw Refusal("weyl_experiment: no admissible modes below L");
    rung.D = static_cast<int>(idx.size());
    CMat modes(basis.size(), rung.D);
    for (int c = 0; c < rung.D; ++c) modes.col(c) = ref.functions.col(idx[c]);
    const double coupling = coupling_constant(rung.R, rung.D);
    CoefficientLaw law = cfg.law;
    law.R = rung.R;

    auto record_from = [&](const CMat& M, int draw, std::uint64_t sid, double delta,
                           double anorm) {
      DrawRecord r;
      r.draw = draw;
      r.stream_id = sid;
      r.delta = delta;
      r.alpha_norm = anorm;
      r.eigenvalues = sorted_eigenvalues(M);
      const SpectrumCount c = count_eigenvalues_in(r.eigenvalues, cfg.gamma, tol);
      r.count = c.count;
      r.boundary_ambiguous = c.boundary_ambiguous;
      r.deviation = r.count - rung.weyl_term;
      return r;
    };

    rung.control = record_from(op.matrix, -1, 0, 0.0, 0.0);
    if (on_draw) on_draw(static_cast<int>(rung_idx), rung.control);

    const std::uint64_t key = fnv1a("weyl-draw") + rung_idx;
    std::function<DrawRecord(int)> task = [&](int i) {
      Stream stream(cfg.seed, key, static_cast<std::uint64_t>(i));
      const CVec alpha = law.sample(rung.D, stream);
      const CVec q = coupling * (modes * alpha);
      CMat M = op.matrix;
      M.diagonal() += rung.delta * q;
      return record_from(M, i, stream.id(), rung.delta, alpha.norm());
    };
    std::function<void(int, const DrawRecord&)> emit;
    if (on_draw) {
      emit = [&](int, const DrawRecord& r) { on_draw(static_cast<int>(rung_idx), r); };
    }
    rung.draws = ordered_pool<DrawRecord>(cfg.n_draws, cfg.threads, task, emit);

    std::vector<double> absdev;
    int within = 0;
    for (const auto& r : rung.draws) {
      absdev.push_back(std::abs(r.deviation));
      within += std::abs(r.deviation) <= cfg.rel_tolerance * rung.weyl_term ? 1 : 0;
    }
    rung.control_within =
        std::abs(rung.control.deviation) <= cfg.rel_tolerance * rung.weyl_term;
    rung.fraction_within = rung.draws.empty() ? 0.0 : static_cast<double>(within) / rung.draws.size();
    rung.median_abs_deviation = median(absdev);
    rung.scaled_median = rung.median_abs_deviation * std::pow(h, n) / vol.value;
    for (double e : cfg.eps_tilde) {
      const double b = weyl_budget(e, cfg.r_band, band.value, h, n, cfg.budget_constant);
      rung.budget.push_back(b);
      int fail = 0;
      for (double a : absdev) fail += a > b ? 1 : 0;
      rung.failure_probability.push_back(absdev.empty() ? 0.0 : static_cast<double>(fail) / absdev.size());
    }
    rung.seconds = seconds_since(tr);
    rep.rungs.push_back(std::move(rung));
  }

  // Trend across the ladder, ordered by decreasing h.
  std::vector<const WeylRung*> by_h;
  for (const auto& r : rep.rungs) by_h.push_back(&r);
  std::sort(by_h.begin(), by_h.end(), [](auto a, auto b) { return a->h > b->h; });
  for (std::size_t i = 1; i < by_h.size(); ++i) {
    if (by_h[i]->scaled_median > by_h[i - 1]->scaled_median) rep.scaling_non_increasing = false;
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

nlohmann::json CounterexampleReport::to_json() const {
  nlohmann::json d = nlohmann::json::array();
  for (const auto& r : draws) {
    d.push_back({{"draw", r.draw},
                 {"stream_id", r.stream_id},
                 {"predicted_im", r.predicted_im},
                 {"max_distance", r.max_distance},
                 {"checked", r.checked}});
  }
  return {{"draws", d}, {"worst_distance", worst_distance}, {"all_on_line", all_on_line},
          {"window", window}};
}

CounterexampleReport counterexample_check(const CounterexampleConfig& cfg) {
  const SpectralBasis basis(cfg.size, cfg.h);
  const SymbolModel sym = transport(cfg.g_mean, cfg.g_cos, cfg.g_sin);
  const CMat P = discretize(sym, basis).matrix;
  const ReferenceOperator ref = reference_eigenbasis(basis, basis.size());
  const std::vector<int> idx = ref.admissible(cfg.L);
  if (idx.empty()) throw Refusal("counterexample_check: no admissible modes below L");
  const int D = static_cast<int>(idx.size());
  CMat modes(basis.size(), D);
  for (int c = 0; c < D; ++c) modes.col(c) = ref.functions.col(idx[c]);
  const double coupling = coupling_constant(cfg.R, D);
  const CoefficientLaw law = CoefficientLaw::uniform_ball(cfg.R);

  CounterexampleReport rep;
  rep.window = cfg.window_fraction * cfg.h * basis.max_mode();
  rep.all_on_line = true;
  for (int i = 0; i < cfg.n_draws; ++i) {
    Stream stream(cfg.seed, fnv1a("counterexample"), static_cast<std::uint64_t>(i));
    const CVec alpha = law.sample(D, stream);
    const CVec q = cfg.delta * coupling * (modes * alpha);
    CMat M = P;
    M.diagonal() += q;
    CounterexampleDraw d;
    d.draw = i;
    d.stream_id = stream.id();
    // The node mean equals the torus mean for trigonometric polynomials
    // resolved by the basis.
    const cd mean = cfg.g_mean + q.mean();
    d.predicted_im = mean.imag();
    d.eigenvalues = sorted_eigenvalues(M);
    for (const cd& lam : d.eigenvalues) {
      if (std::abs(lam.real() - mean.real()) > rep.window) continue;
      ++d.checked;
      d.max_distance = std::max(d.max_distance, std::abs(lam.imag() - d.predicted_im));
    }
    rep.worst_distance = std::max(rep.worst_distance, d.max_distance);
    if (d.max_distance > cfg.tolerance || d.checked == 0) rep.all_on_line = false;
    rep.draws.push_back(std::move(d));
  }
  return rep;
}

void PseudospectrumGrid::write_csv(std::ostream& os) const {
  os << "re,im,sigma_min\n";
  char buf[128];
  for (std::size_t b = 0; b < im.size(); ++b) {
    for (std::size_t a = 0; a < re.size(); ++a) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", re[a], im[b],
                    sigma(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)));
      os << buf;
    }
  }
}

PseudospectrumGrid pseudospectrum_grid(const CMat& A, const std::vector<double>& re,
                                       const std::vector<double>& im) {
  PseudospectrumGrid g;
  g.re = re;
  g.im = im;
  g.sigma.resize(static_cast<Eigen::Index>(im.size()), static_cast<Eigen::Index>(re.size()));
  for (std::size_t b = 0; b < im.size(); ++b) {
    for (std::size_t a = 0; a < re.size(); ++a) {
      CMat M = -A;
      M.diagonal().array() += cd(re[a], im[b]);
      g.sigma(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = sigma_min(M);
    }
  }
  return g;
}

nlohmann::json ZeroCountReport::to_json() const {
  return {{"winding", winding},
          {"direct_count", direct_count},
          {"weyl_term", weyl_term},
          {"samples", samples},
          {"jitters", jitters}};
}

ZeroCountReport zero_count_vs_phi(const CMat& P, const PlanarDomain& gamma, double weyl_term,
                                  int boundary_samples) {
  ZeroCountReport rep;
  rep.weyl_term = weyl_term;
  const double scale = std::max(op_norm(P), 1.0);
  auto phase = [&](cd& z, cd tangent) {
    ++rep.samples;
    for (int attempt = 0; attempt < 8; ++attempt) {
      CMat M = P;
      M.diagonal().array() -= z;
      const LogDet ld = log_det_lu(M);
      if (!ld.singular) return ld.arg;
      ++rep.jitters;
      z += 1e-9 * scale * tangent;
    }
    throw Refusal("zero_count_vs_phi: boundary keeps hitting an eigenvalue");
  };
  const int max_depth = 30;
  std::function<double(cd, double, cd, double, cd, int)> step =
      [&](cd za, double aa, cd zb, double ab, cd tangent, int depth) -> double {
    const double d = wrap_angle(ab - aa);
    if (std::abs(d) <= std::numbers::pi / 2.0) return d;
    if (depth >= max_depth) {
      throw Refusal("zero_count_vs_phi: winding not resolved after maximal subdivision");
    }
    cd zm = 0.5 * (za + zb);
    const double am = phase(zm, tangent);
    return step(za, aa, zm, am, tangent, depth + 1) + step(zm, am, zb, ab, tangent, depth + 1);
  };
  const auto& v = gamma.vertices();
  const double perim = gamma.perimeter();
  double total = 0.0;
  for (std::size_t e = 0; e < v.size(); ++e) {
    const cd a = v[e];
    const cd b = v[(e + 1) % v.size()];
    const double len = std::abs(b - a);
    if (len == 0.0) continue;
    const cd tangent = (b - a) / len;
    const int m = std::max(2, static_cast<int>(std::lround(boundary_samples * len / perim)));
    cd za = a;
    double aa = phase(za, tangent);
    for (int k = 1; k <= m; ++k) {
      cd zb = a + (b - a) * (static_cast<double>(k) / m);
      const double ab = phase(zb, tangent);
      total += step(za, aa, zb, ab, tangent, 0);
      za = zb;
      aa = ab;
    }
  }
  // det(P - z) = prod (lambda_j - z): each enclosed eigenvalue adds one turn.
  rep.winding = static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
  const auto eig = sorted_eigenvalues(P);
  rep.direct_count = count_eigenvalues_in(eig, gamma, 0.0).count;
  return rep;
}

nlohmann::json ProbeRecord::to_json() const {
  return {{"probe", probe},
          {"stream_id", stream_id},
          {"line", line.to_json()},
          {"winding", winding.winding},
          {"zeros_inside", winding.zeros_inside},
          {"radius", winding.radius},
          {"evaluations", winding.evaluations},
          {"jensen_residual", jensen.residual},
          {"jensen_points", jensen.points},
          {"match", match}};
}

nlohmann::json StochasticsReport::to_json() const {
  nlohmann::json p = nlohmann::json::array();
  for (const auto& r : probes) p.push_back(r.to_json());
  return {{"dim", dim},
          {"D", D},
          {"delta", delta},
          {"phi", phi},
          {"eps0", eps0},
          {"coupling", coupling},
          {"probes", p},
          {"all_windings_match", all_windings_match},
          {"max_jensen_residual", max_jensen_residual},
          {"small_value_measure", measure.to_json()},
          {"failure", failure.to_json()},
          {"denominator_effect", denominator_effect}};
}

ModelBundle stochastics_bundle(const StochasticsConfig& cfg) {
  if (!cfg.omega.contains(cfg.z)) throw Refusal("stochastics: z must lie inside omega");
  const SpectralBasis basis = basis_for(cfg.model, cfg.omega, cfg.h);
  const TildeSymbol tilde = build_tilde(cfg.model, cfg.omega);
  const CMat P0 = discretize(cfg.model, basis).matrix;
  const CMat Pt = discretize(tilde, basis).matrix;
  const PhiEvaluator phi(tilde, cfg.phi_grid);
  const ParameterSchedule sched = build_schedule(cfg.schedule);
  const ReferenceOperator ref = reference_eigenbasis(basis, basis.size());
  return make_bundle(P0, Pt, cfg.z, cfg.h, phi(cfg.z).value, sched.delta(cfg.h, cfg.tau0), ref,
                     sched.L(cfg.h), sched.R(cfg.h));
}

StochasticsReport stochastics_experiment(const StochasticsConfig& cfg) {
  const ModelBundle b = stochastics_bundle(cfg);
  const ParameterSchedule sched = build_schedule(cfg.schedule);
  StochasticsReport rep;
  rep.dim = static_cast<int>(b.P0.rows());
  rep.D = b.D();
  rep.delta = b.delta;
  rep.phi = b.phi;
  rep.eps0 = sched.eps0(cfg.h, cfg.tau0);
  rep.coupling = b.coupling;
  CoefficientLaw law = cfg.law;
  law.R = b.R;

  rep.all_windings_match = cfg.n_probes > 0;
  for (int i = 0; i < cfg.n_probes; ++i) {
    Stream stream(cfg.seed, fnv1a("line-probe"), static_cast<std::uint64_t>(i));
    const CVec a0 = cfg.probe_scale * law.sample(b.D(), stream);
    CVec a1(b.D());
    for (int k = 0; k < b.D(); ++k) a1(k) = stream.complex_normal();
    a1 *= b.R / a1.norm();
    ProbeRecord pr;
    pr.probe = i;
    pr.stream_id = stream.id();
    pr.line = make_probe(a0, a1, b.R);
    line_zeros(pr.line, b);
    const double radius = contour_radius(pr.line);
    pr.winding = winding_count(pr.line, b, radius);
    pr.jensen = jensen_check(pr.line, b, radius);
    pr.match = pr.winding.winding == pr.winding.zeros_inside;
    rep.all_windings_match = rep.all_windings_match && pr.match;
    rep.max_jensen_residual = std::max(rep.max_jensen_residual, pr.jensen.residual);
    rep.denominator_effect =
        std::max(rep.denominator_effect,
                 std::abs(normalized_det(a0, b).log_abs - log_abs_F_both_perturbed(a0, b)));
    rep.probes.push_back(std::move(pr));
  }
  if (!rep.probes.empty() && !cfg.small_eps.empty()) {
    rep.measure = small_value_measure(rep.probes.front().line, cfg.small_eps, rep.eps0, cfg.h);
  }
  if (cfg.n_draws > 0 && !cfg.eps_tilde.empty()) {
    rep.failure =
        failure_probability_mc(b, law, cfg.eps_tilde, cfg.n_draws, cfg.seed, fnv1a("failure"));
  }
  return rep;
}

nlohmann::json RenormExperimentReport::to_json() const {
  return {{"trace", trace.summary()}, {"control", control.summary()},
          {"control_fails", control_fails}};
}

RenormExperimentReport renorm_experiment(const RenormExperimentConfig& cfg) {
  const CMat P0 = clustered_model(cfg.dim, cfg.n_small, cfg.small, cfg.seed);
  const SpectralBasis basis(cfg.dim, cfg.options.h);
  RenormExperimentReport rep;
  rep.trace = run_renorm(P0, 0.0, basis, cfg.options);
  RenormOptions off = cfg.options;
  off.enabled = false;
  rep.control = run_renorm(P0, 0.0, basis, off);
  rep.control_fails = !rep.control.all_bands_certified;
  return rep;
}

}  // namespace weyllab
