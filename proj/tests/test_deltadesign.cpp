#include <doctest.h>

#include <cmath>
#include <numbers>

#include "weyllab/deltadesign.hpp"
#include "weyllab/errors.hpp"

using namespace weyllab;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<int> centered_modes(int N) {
  std::vector<int> m;
  for (int k = -(N / 2); static_cast<int>(m.size()) < N; ++k) m.push_back(k);
  return m;
}

// sum over all integers k of (1 + (h k)^2)^-2 in closed form: with a = 1/h,
// a^4 [pi coth(pi a) / (2 a^3) + pi^2 / (2 a^2 sinh^2(pi a))].
double full_sum_s2(double h) {
  const double a = 1.0 / h;
  const double pa = kPi * a;
  return std::pow(a, 4) * (kPi / (2 * a * a * a * std::tanh(pa)) +
                           kPi * kPi / (2 * a * a * std::sinh(pa) * std::sinh(pa)));
}

double remainder_oracle_s2(double h, double L) {
  const int K = static_cast<int>(std::floor(L / h * (1 + 1e-12)));
  double head = 0.0;
  for (int k = -K; k <= K; ++k) head += std::pow(1.0 + h * h * k * k, -2.0);
  return std::sqrt((full_sum_s2(h) - head) / (2 * kPi));
}

// value at a of (e_j e_k) minus its Fourier partial sum over |n| <= K, by
// quadrature on a fine grid.
double product_tail_at(const SmoothFrame& f, int j, int k, double a, int K) {
  const int G = 4096;
  std::vector<double> g(G);
  for (int i = 0; i < G; ++i) g[i] = f.value(j, 2 * kPi * i / G) * f.value(k, 2 * kPi * i / G);
  cd partial = 0.0;
  for (int n = -K; n <= K; ++n) {
    cd c = 0.0;
    for (int i = 0; i < G; ++i) c += g[i] * std::polar(1.0, -n * 2 * kPi * i / G);
    partial += c / static_cast<double>(G) * std::polar(1.0, n * a);
  }
  return f.value(j, a) * f.value(k, a) - partial.real();
}

}  // namespace

TEST_CASE("Fourier candidates have an identity Gramian on a fine grid") {
  const CandidateSet c = fourier_candidates(centered_modes(6), 64);
  CHECK(c.dimension() == 6);
  CHECK(c.volume == doctest::Approx(2 * kPi));
  const CMat G = c.weight() * c.values.adjoint() * c.values;
  CHECK((G - CMat::Identity(6, 6)).norm() < 1e-12);
}

TEST_CASE("greedy selection meets every step floor and the determinant floor") {
  for (int N = 1; N <= 12; ++N) {
    const PointSelection sel = select_points(fourier_candidates(centered_modes(N), 256), N);
    CHECK(sel.certificate_holds);
    CHECK(sel.gram_deviation < 1e-12);
    for (int M = 0; M < N; ++M) {
      // identity Gramian: the ledger is N - M and the floor sqrt((N - M) / 2 pi)
      CHECK(sel.ledger(M) == doctest::Approx(N - M));
      CHECK(sel.achieved(M) >= sel.step_floor(M) * (1 - 1e-12));
    }
    // |det E| >= sqrt(N!) / (2 pi)^(N/2)
    const double floor = 0.5 * std::lgamma(N + 1.0) - 0.5 * N * std::log(2 * kPi);
    CHECK(sel.log_det_floor == doctest::Approx(floor));
    CHECK(std::log(std::abs(sel.E.determinant())) >= floor - 1e-10);
    CHECK(sel.log_det_E == doctest::Approx(std::log(std::abs(sel.E.determinant()))));
  }
}

TEST_CASE("point-mass matrix determinant and singular value floors") {
  for (int N = 2; N <= 10; N += 2) {
    const int grid = 128;
    const CandidateSet c = fourier_candidates(centered_modes(N), grid);
    const PointSelection sel = select_points(c, N);
    const CVec q = point_mass_potential(grid, sel.candidate_index, c.weight());
    const CMat M = mq_matrix(q, c.values, c.values.conjugate(), c.weight());
    // M = E E^T with the point values as columns of E
    CHECK((M - sel.E * sel.E.transpose()).norm() < 1e-10 * M.norm());
    const double log_det_M = std::log(std::abs(M.determinant()));
    CHECK(log_det_M >= log_det_M_floor(sel) - 1e-9);
    CHECK(log_det_M_floor(sel) == doctest::Approx(std::lgamma(N + 1.0) - N * std::log(2 * kPi)));
    const RVec sv = singular_values(M);
    CHECK(mq_s1_floor(sel) <= sv(0) * (1 + 1e-12));
    const auto floors = mq_singular_floors(sel, sv(0));
    for (int k = 0; k < N; ++k) CHECK(floors[k] <= sv(k) * (1 + 1e-10));
  }
}

TEST_CASE("selection refuses mismatched sizes") {
  const CandidateSet c = fourier_candidates(centered_modes(4), 32);
  CHECK_THROWS_AS(select_points(c, 3), Refusal);
  const CandidateSet tiny = fourier_candidates(centered_modes(4), 3);
  CHECK_THROWS_AS(select_points(tiny, 4), Refusal);
}

TEST_CASE("delta remainder norm matches the coth closed form for s = 2") {
  for (double h : {0.1, 0.05, 0.02}) {
    for (double L : {0.5, 1.0, 2.0}) {
      CHECK(delta_remainder_norm(h, L, 2.0) == doctest::Approx(remainder_oracle_s2(h, L)).epsilon(1e-6));
    }
  }
  CHECK_THROWS_AS(delta_remainder_norm(0.1, 1.0, 0.5), Refusal);
}

TEST_CASE("delta remainder decays like L^-(s - 1/2)") {
  const double h = 1e-3, s = 2.0;
  const double a = std::log(delta_remainder_norm(h, 8.0, s));
  const double b = std::log(delta_remainder_norm(h, 64.0, s));
  const double slope = (b - a) / std::log(8.0);
  CHECK(slope == doctest::Approx(-(s - 0.5)).epsilon(0.02));
}

TEST_CASE("truncated delta is the Dirichlet kernel") {
  const SpectralBasis b(64, 0.1);
  const ReferenceOperator ref = reference_eigenbasis(b, 64);
  const double a = b.node(5);
  const DeltaApproximation d = approximate_delta(a, ref, 1.0, 2.0);
  CHECK(d.indices.size() == 21);  // |k| <= 10
  const CVec v = d.node_values(ref);
  CHECK(v(5).real() == doctest::Approx(d.value_at_target()));
  CHECK(d.value_at_target() == doctest::Approx(21.0 / (2 * kPi)));
  for (int j = 0; j < 64; ++j) {
    const double t = b.node(j) - a;
    const double dirichlet = std::abs(std::sin(t / 2)) < 1e-12
                                 ? 21.0 / (2 * kPi)
                                 : std::sin(10.5 * t) / std::sin(t / 2) / (2 * kPi);
    CHECK(std::abs(v(j) - dirichlet) < 1e-12);
  }
  CHECK_THROWS_AS(approximate_delta(NAN, ref, 1.0, 2.0), Refusal);
}

TEST_CASE("smooth frame is L2-normalized") {
  Stream s(1, fnv1a("frame"));
  const SmoothFrame f = SmoothFrame::random(4, 0.5, 2.0, s);
  for (int j = 0; j < 4; ++j) {
    double acc = 0.0;
    for (int i = 0; i < 2048; ++i) acc += std::pow(f.value(j, 2 * kPi * i / 2048), 2);
    CHECK(acc * 2 * kPi / 2048 == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(f.hs_frame_constant(0.1, 2.0) >= 1.0);
}

TEST_CASE("point-mass remainder matrix agrees with quadrature and obeys its bound") {
  Stream s(2, fnv1a("mq"));
  const SmoothFrame f = SmoothFrame::random(3, 0.5, 2.0, s);
  const double h = 0.1, L = 0.8, a = 1.3;
  const MqRemainderCheck chk = mq_remainder_check(f, a, L, 2.0, h);
  CHECK(chk.ok);
  CMat Mr(3, 3);
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) Mr(j, k) = product_tail_at(f, j, k, a, 8);
  }
  CHECK(chk.actual == doctest::Approx(op_norm(Mr)).epsilon(1e-8));
  CHECK(mq_perturbation_bound(2.0, 0.25, 3.0) == doctest::Approx(12.0));
}
