#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "weyllab/linalg.hpp"
#include "weyllab/symbols.hpp"

namespace weyllab {

/// Fourier collocation on the torus [0, 2 pi): `size` equispaced nodes and the
/// same number of integer modes (-K..K for odd sizes, -size/2..size/2-1 for
/// even sizes). Matrices act on vectors of node values.
class SpectralBasis {
 public:
  SpectralBasis() = default;
  SpectralBasis(int size, double h);

  /// Smallest odd basis with h * K >= 2 * xi_needed.
  static SpectralBasis resolving(double xi_needed, double h);

  int size() const { return size_; }
  double h() const { return h_; }
  double node(int j) const;
  int mode(int idx) const { return modes_[idx]; }
  const std::vector<int>& modes() const { return modes_; }
  int max_mode() const;
  /// Quadrature weight 2 pi / size.
  double weight() const;

  /// Unitary F with F(j, k) = exp(i m_k x_j) / sqrt(size).
  CMat fourier_matrix() const;
  CVec to_modes(const CVec& node_values) const;
  CVec to_nodes(const CVec& mode_values) const;

  nlohmann::json to_json() const;

 private:
  int size_ = 0;
  double h_ = 0.0;
  std::vector<int> modes_;
};

struct DiscretizedOperator {
  CMat matrix;
  SpectralBasis basis;
  std::string source;
  /// Upper bound for the norm of the Hermitian part (max absolute row sum).
  double hermitian_part_bound = 0.0;
};

/// Node-space matrix of the Fourier multiplier b(h D) (circulant).
CMat xi_multiplier(const SpectralBasis& basis, const std::function<cd(double)>& b);
/// Node-space matrix of multiplication by a(x) (diagonal).
CMat x_multiplier(const SpectralBasis& basis, const std::function<cd(double)>& a);

/// Quantizes a separable symbol. Mixed terms a(x) b(xi) use the symmetrized
/// ordering (A B + B A) / 2.
DiscretizedOperator discretize(const SymbolModel& sym, const SpectralBasis& basis);
/// Quantizes p-tilde; the shift is a pure Fourier multiplier.
DiscretizedOperator discretize(const TildeSymbol& tilde, const SpectralBasis& basis);

DiscretizedOperator make_operator(CMat matrix, const SpectralBasis& basis,
                                  std::string source);

/// Eigenpairs of h^2 times the Laplacian: functions exp(i k x)/sqrt(2 pi) with
/// mu_k = h |k|, sorted by mu then by mode index.
struct ReferenceOperator {
  std::vector<int> modes;
  RVec mu;
  /// Node values of each eigenfunction (columns), orthonormal for the node
  /// inner product sum_j w u_j conj(v_j).
  CMat functions;
  double weight = 0.0;
  double h = 0.0;

  int count_below(double L) const;
  /// Indices with 0 < mu <= L (the zero mode is excluded).
  std::vector<int> admissible(double L) const;
  CMat gram() const { return weight * functions.adjoint() * functions; }
};

ReferenceOperator reference_eigenbasis(const SpectralBasis& basis, int n_keep);

/// (sum (1 + mu_k^2)^s |c_k|^2)^(1/2).
double hs_norm(const CVec& coeffs, const RVec& mu, double s);

/// max over u of sup|u| / ||u||_{H^s}, attained by a normalized reproducing
/// kernel: (sum_k (1 + (h k)^2)^-s / (2 pi))^(1/2) over |k| <= K.
double sup_over_hs_worst(double h, double s, int K);

/// Trigonometric polynomial given by Fourier coefficients c_k against
/// exp(i k x)/sqrt(2 pi).
struct TrigPoly {
  int kmin = 0;
  std::vector<cd> coeffs;  // coeffs[i] belongs to mode kmin + i
  double hs_norm(double s, double h) const;
  cd eval(double x) const;
  TrigPoly product(const TrigPoly& other) const;
};

struct ProductProbe {
  double ratio = 0.0;
  double uv_norm = 0.0;
  double u_norm = 0.0;
  double v_norm = 0.0;
};

/// ||u v||_{H^s} / (h^{-1/2} ||u||_{H^s} ||v||_{H^s}), with the product taken
/// exactly in coefficient space.
ProductProbe product_inequality_probe(const TrigPoly& u, const TrigPoly& v,
                                      double s, double h);

/// (Pt - z)^{-1} (P - z); refuses if sigma_min(Pt - z) < 1e-8.
DiscretizedOperator relative_operator(const DiscretizedOperator& P,
                                      const DiscretizedOperator& Pt, cd z);

/// Deterministic eigenvalue ordering: real part, then imaginary part.
std::vector<cd> sorted_eigenvalues(const CMat& A);

}  // namespace weyllab
