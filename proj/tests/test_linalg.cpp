#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "weyllab/linalg.hpp"
#include "weyllab/rng.hpp"

using namespace weyllab;

namespace {

CMat random_matrix(std::uint64_t seed, int rows, int cols) {
  Stream s(seed, fnv1a("test-linalg"));
  CMat A(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) A(i, j) = s.complex_normal();
  }
  return A;
}

}  // namespace

TEST_CASE("singular values of a 2x2 matrix with known spectrum") {
  CMat A(2, 2);
  A << 3.0, 0.0, 4.0, 5.0;
  const RVec s = singular_values(A);
  CHECK(s(0) == doctest::Approx(std::sqrt(45.0)).epsilon(1e-14));
  CHECK(s(1) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-14));
  CHECK(sigma_min(A) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-14));
  CHECK(op_norm(A) == doctest::Approx(std::sqrt(45.0)).epsilon(1e-14));
}

TEST_CASE("svd agrees with an independent Jacobi SVD and reconstructs A") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const CMat A = random_matrix(seed, 9, 7);
    const Svd d = svd(A);
    Eigen::JacobiSVD<CMat> jac(A);
    CHECK((d.s - jac.singularValues()).norm() <= 1e-12 * d.s(0));
    const CMat back = d.U * d.s.asDiagonal() * d.V.adjoint();
    CHECK((back - A).norm() <= 1e-12 * A.norm());
    for (int i = 1; i < d.s.size(); ++i) CHECK(d.s(i) <= d.s(i - 1));
  }
}

TEST_CASE("eigenvalues agree with Eigen's complex eigensolver") {
  const CMat A = random_matrix(11, 12, 12);
  CVec a = eigenvalues(A);
  Eigen::ComplexEigenSolver<CMat> ces(A, false);
  CVec b = ces.eigenvalues();
  auto key = [](const cd& x, const cd& y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  };
  std::sort(a.data(), a.data() + a.size(), key);
  std::sort(b.data(), b.data() + b.size(), key);
  CHECK((a - b).norm() <= 1e-10 * A.norm());
}

TEST_CASE("generalized eigenvalues solve det(A - lambda B) = 0") {
  const CMat A = random_matrix(21, 6, 6);
  const CMat B = random_matrix(22, 6, 6);
  const GeneralizedEigen g = generalized_eigenvalues(A, B);
  const CMat BinvA = B.partialPivLu().solve(A);
  for (int i = 0; i < 6; ++i) {
    const cd lambda = g.alpha(i) / g.beta(i);
    CHECK(sigma_min(BinvA - lambda * CMat::Identity(6, 6)) <= 1e-9 * op_norm(BinvA));
  }
}

TEST_CASE("log_det_lu matches the product of diagonal entries") {
  CMat T = CMat::Zero(3, 3);
  T(0, 0) = cd(2.0, 0.0);
  T(1, 1) = cd(0.0, 3.0);
  T(2, 2) = cd(-1.0, 0.0);
  T(0, 2) = cd(7.0, 1.0);
  const LogDet d = log_det_lu(T);
  CHECK_FALSE(d.singular);
  CHECK(d.log_abs == doctest::Approx(std::log(6.0)).epsilon(1e-14));
  // det = 2 * 3i * (-1) = -6i, argument -pi/2
  CHECK(d.arg == doctest::Approx(-std::numbers::pi / 2).epsilon(1e-14));
  CHECK(log_abs_det_svd(T) == doctest::Approx(std::log(6.0)).epsilon(1e-13));
}

TEST_CASE("log|det| by LU and by SVD agree on random matrices") {
  for (std::uint64_t seed = 30; seed < 35; ++seed) {
    const CMat A = random_matrix(seed, 15, 15);
    const double a = log_det_lu(A).log_abs;
    const double b = log_abs_det_svd(A);
    CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
    const cd det = A.determinant();
    CHECK(a == doctest::Approx(std::log(std::abs(det))).epsilon(1e-10));
    CHECK(std::abs(wrap_angle(log_det_lu(A).arg - std::arg(det))) <= 1e-9);
  }
}

TEST_CASE("singular matrix is flagged") {
  CMat A = CMat::Zero(3, 3);
  A(0, 0) = 1.0;
  CHECK(log_det_lu(A).singular);
  CHECK(std::isinf(log_abs_det_svd(A)));
  CHECK(log_abs_det_svd(A) < 0);
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  const double pi = std::numbers::pi;
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(pi) == doctest::Approx(pi));
  CHECK(wrap_angle(-pi) == doctest::Approx(pi));
  CHECK(wrap_angle(3 * pi / 2) == doctest::Approx(-pi / 2));
  for (double a = -20.0; a < 20.0; a += 0.37) {
    const double w = wrap_angle(a);
    CHECK(w > -pi);
    CHECK(w <= pi);
    CHECK(std::abs(std::remainder(w - a, 2 * pi)) <= 1e-12);
  }
}
