#include "weyllab/grushin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "weyllab/errors.hpp"

namespace weyllab {

namespace {

void fill_inverse_blocks(GrushinData& gd) {
  const Eigen::Index n = gd.A.rows();
  const Eigen::Index N = gd.N;
  gd.bordered = CMat::Zero(n + N, n + N);
  gd.bordered.topLeftCorner(n, n) = gd.A;
  if (N > 0) {
    gd.bordered.topRightCorner(n, N) = gd.R_minus;
    gd.bordered.bottomLeftCorner(N, n) = gd.R_plus;
  }
  const CMat inv = gd.bordered.partialPivLu().solve(CMat::Identity(n + N, n + N));
  gd.E = inv.topLeftCorner(n, n);
  gd.E_plus = inv.topRightCorner(n, N);
  gd.E_minus = inv.bottomLeftCorner(N, n);
  gd.E_mp = inv.bottomRightCorner(N, N);
}

RVec ascending(const RVec& desc) { return desc.reverse(); }

// Phase making the largest-magnitude entry real and positive.
cd phase_of_largest(const CVec& v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  const double a = std::abs(v(idx));
  return a > 0 ? std::conj(v(idx)) / a : cd(1.0);
}

}  // namespace

double GrushinData::t_next() const {
  return N < t.size() ? t(N) : std::numeric_limits<double>::infinity();
}

nlohmann::json GrushinData::summary() const {
  std::vector<double> small(t.data(), t.data() + N);
  return {{"dim", dim()},
          {"tau0", tau0},
          {"N", N},
          {"small_singular_values", small},
          {"t_next", N < t.size() ? t(N) : -1.0},
          {"symmetric", symmetric}};
}

GrushinData build_grushin(const CMat& A, double tau0, const GrushinOptions& opt) {
  if (A.rows() != A.cols()) throw Refusal("build_grushin: matrix must be square");
  const Svd d = svd(A);
  const Eigen::Index n = A.rows();
  GrushinData gd;
  gd.A = A;
  gd.tau0 = tau0;
  gd.symmetric = opt.symmetric;
  gd.t = ascending(d.s);
  const double tol = opt.gap_rel * (n ? d.s(0) : 0.0);
  int N = 0;
  while (N < n && gd.t(N) < tau0) ++N;
  if (N > 0 && tau0 - gd.t(N - 1) <= tol) {
    std::ostringstream os;
    os << "tau0 splits a cluster: t_N = " << gd.t(N - 1) << ", tau0 = " << tau0;
    throw Refusal(os.str());
  }
  if (N < n && gd.t(N) - tau0 <= tol) {
    std::ostringstream os;
    os << "tau0 splits a cluster: tau0 = " << tau0 << ", t_{N+1} = " << gd.t(N);
    throw Refusal(os.str());
  }
  gd.N = N;
  gd.e.resize(n, N);
  gd.f.resize(n, N);
  for (int j = 0; j < N; ++j) {
    // Descending SVD: the j-th smallest lives in column n-1-j.
    const Eigen::Index col = n - 1 - j;
    CVec ej = d.V.col(col);
    CVec fj = d.U.col(col);
    const cd ph = phase_of_largest(ej);
    gd.e.col(j) = ej * ph;
    gd.f.col(j) = fj * ph;
  }
  if (opt.symmetric) gd.f = gd.e.conjugate();
  gd.R_plus = gd.e.adjoint();
  gd.R_minus = gd.f;
  fill_inverse_blocks(gd);
  return gd;
}

GrushinData build_grushin_with_borders(const CMat& A, const CMat& R_plus,
                                       const CMat& R_minus, double tau0) {
  if (R_plus.cols() != A.rows() || R_minus.rows() != A.rows() ||
      R_plus.rows() != R_minus.cols()) {
    throw Refusal("build_grushin_with_borders: border shapes do not match");
  }
  GrushinData gd;
  gd.A = A;
  gd.tau0 = tau0;
  gd.N = static_cast<int>(R_plus.rows());
  gd.t = ascending(singular_values(A));
  gd.R_plus = R_plus;
  gd.R_minus = R_minus;
  gd.e = R_plus.adjoint();
  gd.f = R_minus;
  fill_inverse_blocks(gd);
  return gd;
}

DetIdentity det_identity(const GrushinData& gd) {
  DetIdentity r;
  r.log_det_A = log_abs_det_svd(gd.A);
  r.log_det_bordered = log_abs_det_svd(gd.bordered);
  r.log_det_emp = gd.N > 0 ? log_abs_det_svd(gd.E_mp) : 0.0;
  r.rhs = r.log_det_bordered + r.log_det_emp;
  if (!std::isfinite(r.log_det_A) || !std::isfinite(r.rhs)) {
    r.singular = true;
    r.gap = (std::isinf(r.log_det_A) && std::isinf(r.rhs)) ? 0.0 : 1.0;
    return r;
  }
  r.gap = std::abs(r.log_det_A - r.rhs) / std::max(1.0, std::abs(r.log_det_A));
  const double lu_lhs = log_det_lu(gd.A).log_abs;
  const double lu_rhs =
      log_det_lu(gd.bordered).log_abs + (gd.N > 0 ? log_det_lu(gd.E_mp).log_abs : 0.0);
  r.lu_cross_gap = std::abs(lu_lhs - lu_rhs) / std::max(1.0, std::abs(lu_lhs));
  return r;
}

SvInequalityReport sv_inequalities(const CMat& A, const CMat& B, double tol) {
  const RVec sa = singular_values(A);
  const RVec sb = singular_values(B);
  const RVec ssum = singular_values(A + B);
  const RVec sprod = singular_values(A * B);
  const double add_scale = std::max(1.0, sa(0) + sb(0));
  const double mul_scale = std::max(1.0, sa(0) * sb(0));
  const Eigen::Index d = sa.size();
  SvInequalityReport r;
  r.worst_additive = std::numeric_limits<double>::infinity();
  r.worst_multiplicative = std::numeric_limits<double>::infinity();
  for (Eigen::Index n = 1; n <= d; ++n) {
    for (Eigen::Index k = 1; n + k - 1 <= d; ++k) {
      const double add = (sa(n - 1) + sb(k - 1) - ssum(n + k - 2)) / add_scale;
      const double mul = (sa(n - 1) * sb(k - 1) - sprod(n + k - 2)) / mul_scale;
      r.worst_additive = std::min(r.worst_additive, add);
      r.worst_multiplicative = std::min(r.worst_multiplicative, mul);
      r.checked += 2;
      r.violations += (add < -tol) + (mul < -tol);
    }
  }
  return r;
}

namespace {

void check_transfer(const GrushinData& gd, const RVec& tA, double tol,
                    SvTransferReport& r) {
  const int N = gd.N;
  if (N == 0) return;
  const RVec te = ascending(singular_values(gd.E_mp));
  const double rm = op_norm(gd.R_minus);
  const double rp = op_norm(gd.R_plus);
  const double nE = op_norm(gd.E);
  const double nEp = op_norm(gd.E_plus);
  const double nEm = op_norm(gd.E_minus);
  for (int k = 0; k < N; ++k) {
    const double upper = rm * rp * te(k);
    const double lower = te(k) / (nE * te(k) + nEp * nEm);
    const double scale = std::max(upper, 1e-300);
    const double su = (upper - tA(k)) / scale;
    const double sl = (tA(k) - lower) / scale;
    r.worst_upper = std::min(r.worst_upper, su);
    r.worst_lower = std::min(r.worst_lower, sl);
    r.violations += (su < -tol) + (sl < -tol);
  }
}

}  // namespace

SvTransferReport sv_transfer(const GrushinData& gd, double tol) {
  SvTransferReport r;
  r.worst_upper = r.worst_lower = std::numeric_limits<double>::infinity();
  check_transfer(gd, gd.t, tol, r);
  if (gd.N == 0) r.worst_upper = r.worst_lower = 0.0;
  return r;
}

SvTransferReport sv_transfer_perturbed(const GrushinData& gd0, const CMat& Q,
                                       double delta, double tol) {
  const double tau = gd0.t_next();
  if (delta > tau / 2.0 * (1.0 + 1e-12)) {
    throw Refusal("sv_transfer_perturbed: delta exceeds t_{N+1} / 2");
  }
  if (op_norm(Q) > 1.0 + 1e-12) throw Refusal("sv_transfer_perturbed: ||Q|| > 1");
  const GrushinData gd = build_grushin_with_borders(gd0.A - delta * Q, gd0.R_plus,
                                                    gd0.R_minus, gd0.tau0);
  SvTransferReport r;
  r.worst_upper = r.worst_lower = r.worst_sandwich = std::numeric_limits<double>::infinity();
  check_transfer(gd, gd.t, tol, r);
  if (gd.N == 0) {
    r.worst_upper = r.worst_lower = r.worst_sandwich = 0.0;
    return r;
  }
  r.sandwich_checked = true;
  const RVec te = ascending(singular_values(gd.E_mp));
  for (int k = 0; k < gd.N; ++k) {
    const double scale = std::max(te(k), 1e-300);
    const double lo = (gd.t(k) - te(k) / 8.0) / scale;
    const double hi = (te(k) - gd.t(k)) / scale;
    r.worst_sandwich = std::min({r.worst_sandwich, lo, hi});
    r.violations += (lo < -tol) + (hi < -tol);
  }
  return r;
}

NeumannResult neumann_e_minus_plus(const GrushinData& gd, const CMat& Q, double delta,
                                   int order) {
  NeumannResult r;
  const double nQ = op_norm(Q);
  const double nE = op_norm(gd.E);
  r.contraction = delta * nQ * nE;
  if (r.contraction >= 1.0) {
    std::ostringstream os;
    os << "Neumann series diverges: delta ||Q|| ||E|| = " << r.contraction << " >= 1";
    throw Refusal(os.str());
  }
  r.E_mp = gd.E_mp;
  // term_m = E_- Q (E Q)^{m-1} E_+, built right to left.
  CMat right = gd.E_plus;
  double dm = 1.0;
  for (int m = 1; m <= order; ++m) {
    dm *= delta;
    const CMat QR = Q * right;
    r.E_mp += dm * (gd.E_minus * QR);
    right = gd.E * QR;
  }
  const GrushinData exact =
      build_grushin_with_borders(gd.A - delta * Q, gd.R_plus, gd.R_minus, gd.tau0);
  r.exact = exact.E_mp;
  r.truncation_error = gd.N ? op_norm(r.exact - r.E_mp) : 0.0;
  r.tail_bound = op_norm(gd.E_minus) * op_norm(gd.E_plus) * nQ *
                 std::pow(delta, order + 1) * std::pow(nQ * nE, order) /
                 (1.0 - r.contraction);
  const CMat first = gd.E_mp + delta * gd.E_minus * Q * gd.E_plus;
  r.first_order_gap = gd.N ? op_norm(r.exact - first) : 0.0;
  r.first_order_bound = 2.0 * delta * delta / gd.t_next();
  return r;
}

int count_small(const RVec& t, double alpha) {
  int c = 0;
  for (Eigen::Index i = 0; i < t.size(); ++i) c += t(i) * t(i) <= alpha ? 1 : 0;
  return c;
}

double log_det_bordered_capped(const RVec& t, double alpha) {
  double acc = 0.0;
  int N = 0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double t2 = t(i) * t(i);
    if (t(i) < std::sqrt(alpha)) ++N;
    acc += std::log(std::max(alpha, t2));
  }
  return 0.5 * (acc + N * std::log(1.0 / alpha));
}

nlohmann::json LogdetPhaseReport::to_json() const {
  return {{"lhs", lhs},       {"lhs_direct", direct_available ? lhs_direct : lhs},
          {"rhs", rhs},       {"gap", gap},
          {"budget_unit", budget_unit}, {"constant", constant},
          {"n_alpha", n_alpha}};
}

LogdetPhaseReport logdet_vs_phase_integral(const CMat& relative, double phi_value,
                                           double h, double alpha, double kappa,
                                           double delta, double q_norm) {
  LogdetPhaseReport r;
  const RVec t = ascending(singular_values(relative));
  r.lhs = log_det_bordered_capped(t, alpha);
  r.n_alpha = count_small(t, alpha);
  try {
    const GrushinData gd = build_grushin(relative, std::sqrt(alpha));
    r.lhs_direct = log_abs_det_svd(gd.bordered);
    r.direct_available = true;
  } catch (const Refusal&) {
    r.direct_available = false;
  }
  r.rhs = phi_value / h;
  r.gap = std::abs(r.lhs - r.rhs);
  r.budget_unit =
      (std::pow(alpha, kappa) * std::log(1.0 / alpha) + delta * q_norm / alpha) / h;
  r.constant = r.budget_unit > 0 ? r.gap / r.budget_unit : 0.0;
  return r;
}

}  // namespace weyllab
