#include "weyllab/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "weyllab/errors.hpp"
#include "weyllab/rng.hpp"

namespace weyllab {

namespace {

RVec ascending_sv(const CMat& A) { return singular_values(A).reverse(); }

CMat shifted(const CMat& P, cd z) {
  return P - z * CMat::Identity(P.rows(), P.cols());
}

// Smallest t_nu / threshold over nu in (n_next, n_prev], 1-based.
double band_ratio(const RVec& t, int n_prev, int n_next, double threshold) {
  double r = std::numeric_limits<double>::infinity();
  for (int nu = n_next + 1; nu <= n_prev; ++nu) r = std::min(r, t(nu - 1) / threshold);
  return r;
}

std::vector<double> band_values(const RVec& t, int n_prev, int n_next) {
  std::vector<double> out;
  for (int nu = n_next + 1; nu <= n_prev; ++nu) out.push_back(t(nu - 1));
  return out;
}

// Right singular vectors of the n_prev smallest singular values, each with its
// largest entry made real and positive. No cut is needed, so clusters that
// straddle n_prev are handled.
CMat small_vectors(const CMat& A, int n_prev) {
  const Svd d = svd(A);
  const Eigen::Index n = A.rows();
  CMat e(n, n_prev);
  for (int j = 0; j < n_prev; ++j) {
    CVec v = d.V.col(n - 1 - j);
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (std::abs(v(idx)) > 0) v *= std::conj(v(idx)) / std::abs(v(idx));
    e.col(j) = v;
  }
  return e;
}

}  // namespace

double RenormOptions::tau(int k) const { return tau0 * std::pow(h, n2_lab * k); }

double RenormOptions::stage_delta(int k, double C) const {
  return tau(k - 1) * std::pow(h, n1_lab + n) / C;
}

std::vector<int> renorm_ladder(int N0, double theta, int n_theta) {
  if (!(theta > 0.0 && theta < 0.25)) throw Refusal("theta must lie in (0, 1/4)");
  std::vector<int> ladder{N0};
  int N = N0;
  while (N > 0) {
    int next = N >= n_theta ? static_cast<int>(std::floor((1.0 - theta) * N + 1e-9)) : N - 1;
    next = std::min(next, N - 1);
    ladder.push_back(next);
    N = next;
  }
  return ladder;
}

bool stage_needs_perturbation(const RVec& t_ascending, int n_prev, int n_next,
                              double threshold) {
  for (int nu = n_next + 1; nu <= n_prev; ++nu) {
    if (t_ascending(nu - 1) < threshold) return true;
  }
  return false;
}

nlohmann::json StageRecord::to_json() const {
  return {{"k", k},
          {"N_prev", n_prev},
          {"N_next", n_next},
          {"tau_prev", tau_prev},
          {"tau_next", tau_next},
          {"action", action},
          {"C", C},
          {"retries", retries},
          {"delta", delta},
          {"points", points},
          {"alpha_norm", alpha_norm},
          {"band_before", band_before},
          {"band_after", band_after},
          {"worst_band_margin", worst_band_margin},
          {"worst_stability", worst_stability},
          {"certified", certified}};
}

void RenormTrace::write_jsonl(std::ostream& os) const {
  for (const auto& s : stages) os << s.to_json().dump() << '\n';
}

nlohmann::json RenormTrace::summary() const {
  std::vector<double> t(final_t.data(), final_t.data() + std::min<Eigen::Index>(final_t.size(), 64));
  return {{"ladder", ladder},
          {"taus", taus},
          {"stages", static_cast<int>(stages.size())},
          {"stage_count_bound", stage_count_bound},
          {"alpha_total_norm", alpha_total_norm},
          {"alpha_sum_of_norms", alpha_sum_of_norms},
          {"band_margins", band_margins},
          {"all_bands_certified", all_bands_certified},
          {"final_t_smallest", t},
          {"enabled", options.enabled}};
}

std::vector<double> band_margins(const RVec& t, const std::vector<int>& ladder,
                                 const RenormOptions& opt) {
  std::vector<double> out;
  for (std::size_t k = 1; k < ladder.size(); ++k) {
    out.push_back(band_ratio(t, ladder[k - 1], ladder[k], opt.tau(static_cast<int>(k))));
  }
  return out;
}

RenormTrace run_renorm(const CMat& P0, cd z, const SpectralBasis& basis,
                       const RenormOptions& opt) {
  if (P0.rows() != basis.size()) throw Refusal("run_renorm: operator and basis sizes differ");
  RenormTrace tr;
  tr.options = opt;
  CMat P = P0;
  RVec t = ascending_sv(shifted(P, z));
  int N0 = 0;
  while (N0 < t.size() && t(N0) < opt.tau0) ++N0;
  tr.ladder = renorm_ladder(N0, opt.theta, opt.n_theta);
  for (std::size_t k = 0; k < tr.ladder.size(); ++k) tr.taus.push_back(opt.tau(static_cast<int>(k)));
  tr.stage_count_bound =
      (N0 > 0 ? static_cast<int>(std::ceil(std::log(static_cast<double>(N0)) /
                                           std::log(1.0 / (1.0 - opt.theta))))
              : 0) +
      opt.n_theta;
  tr.cumulative_potential = CVec::Zero(P0.rows());

  const ReferenceOperator ref = reference_eigenbasis(basis, basis.size());
  CVec alpha_total;
  const double hfac = std::pow(opt.h, opt.n1_lab + opt.n);

  for (std::size_t kk = 1; kk < tr.ladder.size(); ++kk) {
    const int k = static_cast<int>(kk);
    StageRecord rec;
    rec.k = k;
    rec.n_prev = tr.ladder[kk - 1];
    rec.n_next = tr.ladder[kk];
    rec.tau_prev = opt.tau(k - 1);
    rec.tau_next = opt.tau(k);
    rec.band_before = band_values(t, rec.n_prev, rec.n_next);

    // For the SVD border the singular values of E_-+ are t_1..t_N, so the
    // decision reads them off t directly.
    const bool perturb =
        opt.enabled && stage_needs_perturbation(t, rec.n_prev, rec.n_next, rec.tau_next);
    if (!perturb) {
      rec.action = "skip";
      rec.band_after = rec.band_before;
      rec.worst_band_margin = band_ratio(t, rec.n_prev, rec.n_next, rec.tau_next);
      rec.worst_stability = 0.0;
      rec.certified = rec.worst_band_margin >= 1.0;
      tr.stages.push_back(rec);
      continue;
    }

    rec.action = "perturb";
    const CandidateSet cand = node_candidates(basis, small_vectors(shifted(P, z), rec.n_prev));
    const PointSelection sel = select_points(cand, rec.n_prev);
    rec.points = sel.points;
    CVec q = CVec::Zero(P.rows());
    CVec alpha_stage;
    for (double a : sel.points) {
      const DeltaApproximation d = approximate_delta(a, ref, opt.L, opt.s);
      q += d.node_values(ref);
      if (alpha_stage.size() == 0) alpha_stage = CVec::Zero(d.alpha.size());
      alpha_stage += d.alpha;
    }
    const double qinf = q.cwiseAbs().maxCoeff();
    if (!(qinf > 0.0)) throw CertificateFailure("renorm stage produced a zero potential");
    const CVec Q = q / qinf;

    bool ok = false;
    CMat P_try;
    RVec t_try;
    for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
      rec.C = opt.C0 * std::pow(2.0, attempt);
      rec.retries = attempt;
      rec.delta = opt.stage_delta(k, rec.C);
      P_try = P;
      P_try.diagonal() += rec.delta * Q;
      t_try = ascending_sv(shifted(P_try, z));
      rec.worst_band_margin = band_ratio(t_try, rec.n_prev, rec.n_next, rec.tau_next);
      double stab = std::numeric_limits<double>::infinity();
      const double scale = t(t.size() - 1);
      for (Eigen::Index i = rec.n_prev; i < t.size(); ++i) {
        stab = std::min(stab, t_try(i) - (1.0 - hfac / rec.C) * t(i));
      }
      rec.worst_stability = stab;
      ok = rec.worst_band_margin >= 1.0 && stab >= -1e-12 * scale;
      if (ok) break;
    }
    rec.band_after = band_values(t_try, rec.n_prev, rec.n_next);
    rec.certified = ok;
    tr.stages.push_back(rec);
    if (!ok) {
      std::ostringstream os;
      os << "renorm stage " << k << " failed after " << opt.max_retries
         << " retries: band margin " << rec.worst_band_margin << ", stability "
         << rec.worst_stability << "\n";
      tr.write_jsonl(os);
      throw CertificateFailure(os.str());
    }
    P = P_try;
    t = t_try;
    tr.cumulative_potential += rec.delta * Q;
    const CVec scaled = alpha_stage * (rec.delta / qinf);
    tr.stages.back().alpha_norm = scaled.norm();
    tr.alpha_sum_of_norms += scaled.norm();
    alpha_total = alpha_total.size() ? CVec(alpha_total + scaled) : scaled;
  }

  tr.final_matrix = P;
  tr.final_t = t;
  tr.alpha_total_norm = alpha_total.size() ? alpha_total.norm() : 0.0;
  tr.band_margins = band_margins(t, tr.ladder, opt);
  tr.all_bands_certified = std::all_of(tr.band_margins.begin(), tr.band_margins.end(),
                                       [](double m) { return m >= 1.0; });
  return tr;
}

CMat clustered_model(int dim, int n_small, double small, std::uint64_t seed) {
  if (n_small < 0 || n_small > dim / 4) throw Refusal("clustered_model: too many small values");
  Stream rng(seed, fnv1a("clustered_model"));
  CMat U = CMat::Zero(dim, dim);
  const int spacing = n_small > 0 ? dim / n_small : dim;
  for (int j = 0; j < n_small; ++j) {
    const int centre = j * spacing + spacing / 2;
    for (int i = 0; i < dim; ++i) {
      int d = std::abs(i - centre);
      d = std::min(d, dim - d);
      U(i, j) = std::exp(-2.0 * d * d);  // width 1/2 node
    }
    U.col(j).normalize();
  }
  CMat G(dim, dim - n_small);
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    for (Eigen::Index j = 0; j < G.cols(); ++j) G(i, j) = rng.complex_normal();
  }
  const CMat B = U.leftCols(n_small);
  G -= B * (B.adjoint() * G);
  Eigen::HouseholderQR<CMat> qr(G);
  const CMat Qc = qr.householderQ() * CMat::Identity(dim, dim - n_small);
  // One more projection pass removes rounding leakage into the bumps.
  CMat comp = Qc - B * (B.adjoint() * Qc);
  Eigen::HouseholderQR<CMat> qr2(comp);
  U.rightCols(dim - n_small) = qr2.householderQ() * CMat::Identity(dim, dim - n_small);
  RVec sigma(dim);
  for (int j = 0; j < dim; ++j) sigma(j) = j < n_small ? small : 1.0 + rng.uniform();
  return U * sigma.asDiagonal() * U.transpose();
}

nlohmann::json LogdetBounds::to_json() const {
  return {{"actual", std::isfinite(actual) ? nlohmann::json(actual) : nlohmann::json("-inf")},
          {"phi_term", phi_term},
          {"budget_unit", budget_unit},
          {"constant", constant},
          {"lower", lower},
          {"upper", upper},
          {"contained", contained},
          {"min_ratio", min_ratio}};
}

LogdetBounds logdet_bounds(const CMat& relative, const CMat& shifted_op, double phi,
                           double h, double eps0, double c_cap) {
  LogdetBounds b;
  b.actual = log_abs_det_svd(relative);
  b.phi_term = phi / h;
  b.budget_unit = eps0 / h;
  b.lower = b.phi_term - c_cap * b.budget_unit;
  b.upper = b.phi_term + c_cap * b.budget_unit;
  if (std::isfinite(b.actual)) {
    b.constant = b.budget_unit > 0 ? std::abs(b.actual - b.phi_term) / b.budget_unit : 0.0;
    b.contained = b.actual >= b.lower && b.actual <= b.upper;
  } else {
    b.constant = std::numeric_limits<double>::infinity();
    b.contained = false;
  }
  const RVec tr = ascending_sv(relative);
  const RVec ts = ascending_sv(shifted_op);
  b.min_ratio = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < tr.size(); ++k) {
    if (ts(k) > 0) b.min_ratio = std::min(b.min_ratio, tr(k) / ts(k));
  }
  return b;
}

}  // namespace weyllab
