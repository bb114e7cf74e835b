#pragma once

#include <complex>

#include <Eigen/Dense>

namespace weyllab {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

/// Thin SVD A = U diag(s) V^*, singular values in descending order.
struct Svd {
  CMat U;
  RVec s;
  CMat V;
};

RVec singular_values(const CMat& A);
Svd svd(const CMat& A);

/// Eigenvalues of a general complex matrix (LAPACK zgeev, no vectors).
CVec eigenvalues(const CMat& A);

/// Generalized eigenvalues lambda = alpha/beta of A x = lambda B x.
struct GeneralizedEigen {
  CVec alpha;
  CVec beta;
};
GeneralizedEigen generalized_eigenvalues(const CMat& A, const CMat& B);

/// log|det A| and the principal argument of det A, from an LU factorization.
struct LogDet {
  double log_abs = 0.0;
  double arg = 0.0;
  bool singular = false;
};
LogDet log_det_lu(const CMat& A);

/// log|det A| as a sum of log singular values (-inf if singular).
double log_abs_det_svd(const CMat& A);

double op_norm(const CMat& A);

/// Smallest singular value.
double sigma_min(const CMat& A);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

}  // namespace weyllab
