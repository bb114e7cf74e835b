#include "weyllab/linalg.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace weyllab {

namespace {

void check_info(lapack_int info, const char* routine) {
  if (info != 0) {
    throw std::runtime_error(std::string(routine) + " failed, info=" +
                             std::to_string(info));
  }
}

}  // namespace

RVec singular_values(const CMat& A) {
  const lapack_int m = static_cast<lapack_int>(A.rows());
  const lapack_int n = static_cast<lapack_int>(A.cols());
  const lapack_int k = std::min(m, n);
  if (k == 0) return RVec();
  CMat work = A;
  RVec s(k);
  lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', m, n, work.data(), m,
                                   s.data(), nullptr, 1, nullptr, 1);
  check_info(info, "zgesdd");
  return s;
}

Svd svd(const CMat& A) {
  const lapack_int m = static_cast<lapack_int>(A.rows());
  const lapack_int n = static_cast<lapack_int>(A.cols());
  const lapack_int k = std::min(m, n);
  Svd out;
  if (k == 0) return out;
  CMat work = A;
  out.s.resize(k);
  out.U.resize(m, k);
  CMat Vh(k, n);
  lapack_int info =
      LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'S', m, n, work.data(), m, out.s.data(),
                     out.U.data(), m, Vh.data(), k);
  check_info(info, "zgesdd");
  out.V = Vh.adjoint();
  return out;
}

CVec eigenvalues(const CMat& A) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  if (A.rows() != A.cols()) throw std::invalid_argument("eigenvalues: not square");
  if (n == 0) return CVec();
  CMat work = A;
  CVec w(n);
  lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, work.data(), n,
                                  w.data(), nullptr, 1, nullptr, 1);
  check_info(info, "zgeev");
  return w;
}

GeneralizedEigen generalized_eigenvalues(const CMat& A, const CMat& B) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  if (A.rows() != A.cols() || B.rows() != A.rows() || B.cols() != A.cols()) {
    throw std::invalid_argument("generalized_eigenvalues: shape mismatch");
  }
  GeneralizedEigen out;
  out.alpha.resize(n);
  out.beta.resize(n);
  if (n == 0) return out;
  CMat a = A;
  CMat b = B;
  lapack_int info =
      LAPACKE_zggev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n, b.data(), n,
                    out.alpha.data(), out.beta.data(), nullptr, 1, nullptr, 1);
  check_info(info, "zggev");
  return out;
}

LogDet log_det_lu(const CMat& A) {
  LogDet out;
  const Eigen::Index n = A.rows();
  if (n == 0) return out;
  Eigen::PartialPivLU<CMat> lu(A);
  const CMat& LU = lu.matrixLU();
  double arg = lu.permutationP().determinant() < 0 ? std::numbers::pi : 0.0;
  double log_abs = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mag = std::abs(LU(i, i));
    if (mag == 0.0) {
      out.singular = true;
      out.log_abs = -std::numeric_limits<double>::infinity();
      out.arg = 0.0;
      return out;
    }
    log_abs += std::log(mag);
    arg = wrap_angle(arg + std::arg(LU(i, i)));
  }
  out.log_abs = log_abs;
  out.arg = arg;
  return out;
}

double log_abs_det_svd(const CMat& A) {
  const RVec s = singular_values(A);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) == 0.0) return -std::numeric_limits<double>::infinity();
    acc += std::log(s(i));
  }
  return acc;
}

double op_norm(const CMat& A) {
  if (A.size() == 0) return 0.0;
  return singular_values(A)(0);
}

double sigma_min(const CMat& A) {
  const RVec s = singular_values(A);
  return s.size() == 0 ? 0.0 : s(s.size() - 1);
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

}  // namespace weyllab
