#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "weyllab/linalg.hpp"

namespace weyllab {

struct GrushinOptions {
  /// Use f_j = conj(e_j) (complex symmetric operators).
  bool symmetric = false;
  /// Minimum distance of tau0 from every singular value, relative to ||A||.
  double gap_rel = 1e-12;
};

/// Bordered system [[A, R_-], [R_+, 0]] and its inverse [[E, E_+], [E_-, E_-+]].
struct GrushinData {
  CMat A;
  double tau0 = 0.0;
  int N = 0;
  RVec t;        // all singular values of A, ascending
  CMat e;        // n x N right singular vectors of the N smallest
  CMat f;        // n x N left singular vectors (or conj(e) when symmetric)
  CMat R_plus;   // N x n, R_+ u = ((u | e_j))_j
  CMat R_minus;  // n x N, R_- u_- = sum u_-(j) f_j
  CMat bordered;
  CMat E, E_plus, E_minus, E_mp;
  bool symmetric = false;

  int dim() const { return static_cast<int>(A.rows()); }
  /// t_{N+1}, or +inf when N equals the dimension.
  double t_next() const;
  nlohmann::json summary() const;
};

/// Builds the bordered problem from the SVD of A. N = #{t_j < tau0}. Refuses
/// if tau0 is within gap_rel * ||A|| of a singular value.
GrushinData build_grushin(const CMat& A, double tau0, const GrushinOptions& opt = {});

/// Same construction with borders taken from an earlier problem (used for
/// perturbations of A with fixed R_+-).
GrushinData build_grushin_with_borders(const CMat& A, const CMat& R_plus,
                                       const CMat& R_minus, double tau0);

struct DetIdentity {
  double log_det_A = 0.0;
  double log_det_bordered = 0.0;
  double log_det_emp = 0.0;
  double rhs = 0.0;
  double gap = 0.0;          // |lhs - rhs| / max(1, |lhs|)
  double lu_cross_gap = 0.0; // same identity with LU log-determinants
  bool singular = false;
};

DetIdentity det_identity(const GrushinData& gd);

struct SvInequalityReport {
  double worst_additive = 0.0;        // min over (n, k) of the scaled slack
  double worst_multiplicative = 0.0;
  int checked = 0;
  int violations = 0;                 // slack below -tol
};

/// s_{n+k-1}(A+B) <= s_n(A) + s_k(B) and s_{n+k-1}(AB) <= s_n(A) s_k(B) for
/// all valid (n, k). Slacks are divided by max(1, ||A|| + ||B||) and
/// max(1, ||A|| ||B||).
SvInequalityReport sv_inequalities(const CMat& A, const CMat& B, double tol = 1e-10);

struct SvTransferReport {
  double worst_upper = 0.0;     // t_k(A) <= ||R_-|| ||R_+|| t_k(E_-+)
  double worst_lower = 0.0;     // t_k(A) >= t_k(E_-+) / (||E|| t_k(E_-+) + ||E_+|| ||E_-||)
  double worst_sandwich = 0.0;  // t_k(E_-+)/8 <= t_k(A) <= t_k(E_-+), perturbed data only
  bool sandwich_checked = false;
  int violations = 0;
};

/// Transfer inequalities between the singular values of A and of E_-+.
SvTransferReport sv_transfer(const GrushinData& gd, double tol = 1e-10);

/// Transfer inequalities for A - delta Q with the borders of gd0, including the
/// two-sided sandwich valid for delta <= t_{N+1}(A) / 2 and ||Q|| <= 1.
SvTransferReport sv_transfer_perturbed(const GrushinData& gd0, const CMat& Q,
                                       double delta, double tol = 1e-10);

struct NeumannResult {
  CMat E_mp;             // truncated series
  CMat exact;            // E_-+ of the rebuilt perturbed problem
  double contraction = 0.0;  // delta ||Q|| ||E||
  double truncation_error = 0.0;
  double tail_bound = 0.0;
  double first_order_gap = 0.0;    // ||exact - (E0_-+ + delta E_- Q E_+)||
  double first_order_bound = 0.0;  // 2 delta^2 / t_{N+1}
};

/// E_-+ of A - delta Q by the Neumann series truncated after `order` terms.
/// Refuses when delta ||Q|| ||E|| >= 1.
NeumannResult neumann_e_minus_plus(const GrushinData& gd, const CMat& Q, double delta,
                                   int order);

/// log|det| of the bordered operator at threshold sqrt(alpha) computed from
/// the singular values alone: 2 ln|det| = sum ln max(alpha, t^2) + N ln(1/alpha).
double log_det_bordered_capped(const RVec& t, double alpha);

struct LogdetPhaseReport {
  double lhs = 0.0;        // log|det bordered| for P_{delta, z}
  double lhs_direct = 0.0; // same through build_grushin when the cut is clean
  bool direct_available = false;
  double rhs = 0.0;        // phi(z) / h
  double gap = 0.0;
  double budget_unit = 0.0;  // h^-1 (alpha^kappa ln(1/alpha) + delta ||Q|| / alpha)
  double constant = 0.0;     // gap / budget_unit
  int n_alpha = 0;           // eigenvalues of P^* P in [0, alpha]
  nlohmann::json to_json() const;
};

/// Compares log|det| of the bordered relative operator with phi(z) / h.
LogdetPhaseReport logdet_vs_phase_integral(const CMat& relative, double phi_value,
                                           double h, double alpha, double kappa,
                                           double delta, double q_norm);

/// Number of singular values t with t^2 <= alpha.
int count_small(const RVec& t, double alpha);

}  // namespace weyllab
