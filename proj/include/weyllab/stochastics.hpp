#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "weyllab/linalg.hpp"
#include "weyllab/operators.hpp"
#include "weyllab/perturbation.hpp"

namespace weyllab {

/// Everything needed to evaluate F(alpha) = det(P_delta(alpha) - z) /
/// det(Ptilde - z) * exp(-phi(z) / h). The random potential enters only the
/// numerator, so F is a polynomial along complex lines in alpha.
struct ModelBundle {
  CMat P0;
  CMat Ptilde;
  cd z;
  double h = 0.0;
  double phi = 0.0;
  double delta = 0.0;
  double coupling = 0.0;  // c_Q
  double R = 1.0;
  CMat modes;             // n x D node values of the admissible eigenfunctions
  LogDet tilde_logdet;    // log det(Ptilde - z)

  int D() const { return static_cast<int>(modes.cols()); }
  /// Node values of c_Q q_alpha.
  CVec potential(const CVec& alpha) const;
  /// P0 + delta c_Q diag(q_alpha) - z.
  CMat shifted(const CVec& alpha) const;
};

ModelBundle make_bundle(const CMat& P0, const CMat& Ptilde, cd z, double h, double phi,
                        double delta, const ReferenceOperator& ref, double L, double R);

struct LogF {
  double log_abs = 0.0;
  double arg = 0.0;
  bool singular = false;
};

LogF normalized_det(const CVec& alpha, const ModelBundle& b);
/// Variant with the potential added to both numerator and denominator.
double log_abs_F_both_perturbed(const CVec& alpha, const ModelBundle& b);

/// Finite w with det(A + w B) = 0, from the generalized eigenvalues of
/// (A, -B). Refuses when B = 0 or the pencil is singular.
std::vector<cd> pencil_zeros(const CMat& A, const CMat& B);

/// Restriction of F to w -> alpha0 + w alpha1, |alpha1| = R.
struct LineProbe {
  CVec alpha0;
  CVec alpha1;
  double R = 1.0;
  cd center;
  double r0 = 0.0;
  std::vector<cd> zeros;          // all finite zeros of the pencil
  std::vector<cd> zeros_in_disc;  // within 3 r0 / 2 of the center
  int M = 0;
  // log|F| = log_ref + sum_j log|w - w_j| - sum_j log|w_ref - w_j|
  cd w_ref;
  double log_ref = 0.0;

  double log_abs_factorized(cd w) const;
  int zeros_within(double radius) const;
  nlohmann::json to_json() const;
};

/// Center -(alpha0/R | alpha1/R) and radius of the disc |alpha0 + w alpha1| < R.
LineProbe make_probe(const CVec& alpha0, const CVec& alpha1, double R);
/// Fills the zeros of the pencil and the factorized normalization.
void line_zeros(LineProbe& probe, const ModelBundle& b);

/// Radius in [0.9 r0, r0] farthest from every zero modulus |w_j - center|.
double contour_radius(const LineProbe& probe);

struct WindingResult {
  int winding = 0;
  int zeros_inside = 0;
  double radius = 0.0;
  int evaluations = 0;
};

/// Argument principle on |w - center| = radius with the phase of det tracked by
/// LU. Refuses if a phase jump above pi/2 survives the maximal subdivision.
WindingResult winding_count(const LineProbe& probe, const ModelBundle& b, double radius);

struct JensenResult {
  double mean_on_circle = 0.0;
  double at_center = 0.0;
  double zero_sum = 0.0;
  double residual = 0.0;
  int points = 0;
};

/// (2 pi)^-1 oint log|f| - log|f(center)| against sum log(radius/|w_j - center|),
/// with log|f| from LU and trapezoid points doubled until converged.
JensenResult jensen_check(const LineProbe& probe, const ModelBundle& b, double radius);

/// |oint log f(w) dw| / (perimeter * max|log f|) on a square of side `side`
/// centered at w0, the phase of log f continued along the path.
double cauchy_riemann_residual(const LineProbe& probe, const ModelBundle& b, cd w0,
                               double side);

struct SmallValueMeasure {
  std::vector<double> eps;
  std::vector<double> measure;
  std::vector<double> bound_shape;  // (eps0/h) exp(h ln(eps) / eps0)
  int samples = 0;
  nlohmann::json to_json() const;
};

/// Lebesgue measure of {r in [0, r0] : |F(alpha0 + r alpha1)| < eps} from a
/// 2048-point grid with three refinement passes; the same sample set serves
/// every eps, so the result is monotone in eps.
SmallValueMeasure small_value_measure(const LineProbe& probe, std::vector<double> eps,
                                      double eps0, double h);

struct WilsonInterval {
  double lo = 0.0;
  double hi = 0.0;
};
WilsonInterval wilson_interval(int k, int n, double zscore = 1.96);

struct FailureCurve {
  std::vector<double> eps_tilde;
  std::vector<int> failures;
  std::vector<double> p;
  std::vector<WilsonInterval> ci;
  std::vector<double> log_abs_F;  // per draw
  int n_draws = 0;
  bool non_increasing = false;
  double fit_intercept = 0.0;  // log p = intercept - rate * eps_tilde
  double fit_rate = 0.0;
  double fit_r2 = 0.0;
  int fit_points = 0;
  nlohmann::json to_json() const;
};

/// Empirical P(log|F(alpha)| < -eps_tilde / h) over draws alpha ~ law, and a
/// least-squares fit of log p against eps_tilde over the nonzero estimates.
FailureCurve failure_probability_mc(const ModelBundle& b, const CoefficientLaw& law,
                                    std::vector<double> eps_tilde, int n_draws,
                                    std::uint64_t root_seed, std::uint64_t key);

}  // namespace weyllab
