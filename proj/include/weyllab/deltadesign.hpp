#pragma once

#include <ostream>
#include <vector>

#include <json.hpp>

#include "weyllab/linalg.hpp"
#include "weyllab/operators.hpp"
#include "weyllab/rng.hpp"

namespace weyllab {

/// Finite candidate set for greedy selection. Row x of `values` is the vector
/// (e_1(x), ..., e_N(x)); every candidate carries the quadrature weight
/// volume / rows.
struct CandidateSet {
  std::vector<double> points;
  CMat values;
  double volume = 0.0;

  double weight() const { return volume / static_cast<double>(values.rows()); }
  int dimension() const { return static_cast<int>(values.cols()); }
};

/// e_j = exp(i m_j x) / sqrt(2 pi) on `grid` equispaced points of [0, 2 pi).
CandidateSet fourier_candidates(const std::vector<int>& modes, int grid);
/// Node values of arbitrary functions (columns) on the nodes of a basis.
CandidateSet node_candidates(const SpectralBasis& basis, const CMat& functions);

struct PointSelection {
  std::vector<int> candidate_index;
  std::vector<double> points;
  CMat E;              // N x N, column j is the vector at the j-th point
  RVec gram_eigs;      // ascending eigenvalues of the Gramian on the grid
  RVec ledger;         // E_M = sum of the N - M + 1 smallest eigenvalues
  RVec achieved;       // c_M, distance of the M-th vector to the previous span
  RVec step_floor;     // sqrt(E_M / vol)
  double volume = 0.0;
  double gram_deviation = 0.0;  // ||Gramian - I||
  double log_det_E = 0.0;
  double log_det_floor = 0.0;   // log of sqrt(prod E_M) / vol^{N/2}
  bool certificate_holds = false;

  nlohmann::json to_json() const;
  void write_csv(std::ostream& os) const;
};

/// Greedy selection: each step takes the first candidate maximizing the
/// squared distance to the span of the vectors chosen so far. Throws
/// std::logic_error if a step misses its Gramian floor, which cannot happen
/// when the Gramian is computed on the same grid.
PointSelection select_points(const CandidateSet& cand, int n_points);

/// M(j, k) = sum_x w q(x) e_k(x) conj(f_j(x)).
CMat mq_matrix(const CVec& q, const CMat& e, const CMat& f, double weight);

/// Point masses as node indicators of height 1 / weight, so sum w q u = u(a).
CVec point_mass_potential(int grid, const std::vector<int>& nodes, double weight);

/// log of (prod E_M) / vol^N, the floor for log|det M| in the symmetric case.
double log_det_M_floor(const PointSelection& sel);
/// Lower bound for s_1(M).
double mq_s1_floor(const PointSelection& sel);
/// Lower bounds for s_1..s_N given the measured s_1 = ||M||.
std::vector<double> mq_singular_floors(const PointSelection& sel, double s1);

/// Truncated Fourier expansion of a point mass on the torus.
struct DeltaApproximation {
  double target = 0.0;
  double L = 0.0;
  double h = 0.0;
  double s = 0.0;
  std::vector<int> indices;  // columns of the reference operator
  CVec alpha;                // conj(eps_k(a)) for mu_k <= L
  double remainder_norm = 0.0;

  /// Node values of sum alpha_k eps_k.
  CVec node_values(const ReferenceOperator& ref) const;
  /// sum_k alpha_k eps_k(a) = (number of kept modes) / (2 pi).
  double value_at_target() const;
};

/// ||delta_a - truncation||_{H^-s} on the continuous torus: the square root
/// of sum_{h|k| > L} (1 + (h k)^2)^-s / (2 pi).
double delta_remainder_norm(double h, double L, double s);

DeltaApproximation approximate_delta(double a, const ReferenceOperator& ref, double L,
                                     double s);

/// Real analytic frame e_j = c_j exp(beta_j cos(x - theta_j)), normalized in
/// L^2(0, 2 pi). Its Fourier coefficients are modified Bessel values, so
/// products and tails are available in closed form.
struct SmoothFrame {
  std::vector<double> beta;
  std::vector<double> theta;

  static SmoothFrame random(int n, double beta_lo, double beta_hi, Stream& stream);
  int size() const { return static_cast<int>(beta.size()); }
  double scale(int j) const;
  double value(int j, double x) const;
  /// Columns are the frame functions at the basis nodes.
  CMat node_values(const SpectralBasis& basis) const;
  /// sqrt of the largest eigenvalue of the H^s Gram matrix.
  double hs_frame_constant(double h, double s) const;
  /// sqrt(sum_{j,k} ||e_j e_k||_{H^s}^2).
  double product_hs_norm(double h, double s) const;
};

struct MqRemainderCheck {
  double r_norm = 0.0;
  double constant = 0.0;  // product_hs_norm * sqrt(h)
  double bound = 0.0;
  double actual = 0.0;    // ||M_{delta_a} - M_{truncation}|| exactly
  bool ok = false;
};

/// ||M_r|| <= C h^{-1/2} r_norm.
double mq_perturbation_bound(double r_norm, double h, double constant);

MqRemainderCheck mq_remainder_check(const SmoothFrame& frame, double a, double L,
                                    double s, double h);

}  // namespace weyllab
