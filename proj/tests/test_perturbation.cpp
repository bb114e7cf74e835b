#include <doctest.h>

#include <cmath>

#include "weyllab/errors.hpp"
#include "weyllab/perturbation.hpp"

using namespace weyllab;

TEST_CASE("schedule exponents for n = 1, kappa = 1, s = 2, eps = 1/2") {
  ScheduleInput in;
  in.n = 1;
  in.kappa = 1.0;
  in.s = 2.0;
  in.eps = 0.5;
  in.n2_slack = 0.5;
  const ParameterSchedule sch = build_schedule(in);
  // M >= (3n - kappa) / (s - n/2 - eps) = 2
  CHECK(sch.M == doctest::Approx(2.0));
  // Mtilde >= 3n/2 - kappa + (n/2 + eps) M = 2.5
  CHECK(sch.Mtilde == doctest::Approx(2.5));
  // N1 = Mtilde + s M + n/2 = 7, N2 = 2 (N1 + n) + slack = 16.5
  CHECK(sch.N1 == doctest::Approx(7.0));
  CHECK(sch.N2 == doctest::Approx(16.5));
  CHECK(sch.delta_paper(0.1, 0.5) == doctest::Approx(0.5 * std::pow(0.1, 8.0)));
  CHECK(sch.L_paper(0.1) == doctest::Approx(100.0));
  CHECK(sch.R_paper(0.1) == doctest::Approx(std::pow(10.0, 2.5)));
}

TEST_CASE("explicit M and Mtilde above their floors are kept") {
  ScheduleInput in;
  in.M = 3.0;
  in.Mtilde = 10.0;
  const ParameterSchedule sch = build_schedule(in);
  CHECK(sch.M == 3.0);
  CHECK(sch.Mtilde == 10.0);
  CHECK(sch.N1 == doctest::Approx(10.0 + 2.0 * 3.0 + 0.5));
}

TEST_CASE("lab schedule uses the configured delta rule and fixed cutoffs") {
  ScheduleInput in;
  in.mode = ScheduleMode::Lab;
  in.eps_delta = 0.15;
  in.L = 3.0;
  in.R = 1.0;
  ParameterSchedule sch = build_schedule(in);
  CHECK(sch.delta(0.02, 0.5) == doctest::Approx(std::exp(-7.5)));
  CHECK(sch.L(0.02) == 3.0);
  CHECK(sch.R(0.02) == 1.0);
  in.delta_rule = "power";
  in.k_lab = 3.0;
  sch = build_schedule(in);
  CHECK(sch.delta(0.1, 0.5) == doctest::Approx(1e-3));
  in.mode = ScheduleMode::Paper;
  sch = build_schedule(in);
  CHECK(sch.delta(0.1, 0.5) == doctest::Approx(sch.delta_paper(0.1, 0.5)));
}

TEST_CASE("eps0 matches its closed form") {
  ScheduleInput in;
  in.kappa = 1.0;
  const ParameterSchedule sch = build_schedule(in);
  const double h = 0.05, tau0 = 0.5, lh = std::log(20.0);
  CHECK(sch.eps0(h, tau0) == doctest::Approx((h + h * lh) * (std::log(2.0) + lh * lh)));
}

TEST_CASE("infeasible schedules list every violated constraint") {
  ScheduleInput in;
  in.s = 0.4;
  auto errs = schedule_violations(in);
  REQUIRE_FALSE(errs.empty());
  CHECK(errs[0].find("s > n/2") != std::string::npos);

  ScheduleInput low;
  low.M = 1.0;
  low.Mtilde = 0.0;
  errs = schedule_violations(low);
  REQUIRE(errs.size() == 2);
  CHECK(errs[0].find("M >= (3n-kappa)/(s-n/2-eps)") != std::string::npos);
  CHECK(errs[1].find("Mtilde >=") != std::string::npos);
  CHECK_THROWS_AS(build_schedule(low), Refusal);

  ScheduleInput bad;
  bad.kappa = 1.5;
  bad.delta_rule = "linear";
  CHECK(schedule_violations(bad).size() >= 1);
  bad.kappa = 1.0;
  CHECK(schedule_violations(bad).size() == 1);
}

TEST_CASE("uniform ball law: support and radial distribution") {
  const CoefficientLaw law = CoefficientLaw::uniform_ball(2.0);
  Stream s(1, fnv1a("ball"));
  const int D = 3, n = 20000;
  // |alpha|^(2D) / R^(2D) is uniform on [0, 1] for the complex ball
  double mean = 0.0;
  int outside = 0;
  for (int i = 0; i < n; ++i) {
    const CVec a = law.sample(D, s);
    if (a.norm() > 2.0 * (1 + 1e-14)) ++outside;
    mean += std::pow(a.norm() / 2.0, 2 * D);
  }
  CHECK(outside == 0);
  CHECK(mean / n == doctest::Approx(0.5).epsilon(0.02));
  CHECK(law.gradient_bound() == 0.0);
}

TEST_CASE("real-only ball law stays real") {
  CoefficientLaw law = CoefficientLaw::uniform_ball(1.0);
  law.real_only = true;
  Stream s(2, fnv1a("real"));
  const CVec a = law.sample(5, s);
  CHECK(a.imag().norm() == 0.0);
  CHECK(a.norm() <= 1.0);
}

TEST_CASE("truncated Gaussian law stays in the ball") {
  const CoefficientLaw law = CoefficientLaw::truncated_gaussian({0.3}, 1.0);
  Stream s(3, fnv1a("gauss"));
  for (int i = 0; i < 1000; ++i) CHECK(law.sample(4, s).norm() <= 1.0);
  CHECK(law.gradient_bound() == doctest::Approx(1.0 / 0.09));
  const CoefficientLaw tiny = CoefficientLaw::truncated_gaussian({100.0}, 1e-6);
  CHECK_THROWS_AS(tiny.sample(4, s), Refusal);
}

TEST_CASE("admissible potentials are the expected mode sums") {
  const SpectralBasis b(31, 0.1);
  const ReferenceOperator ref = reference_eigenbasis(b, 31);
  const auto idx = ref.admissible(0.25);
  REQUIRE(idx.size() == 4);
  CVec alpha(4);
  alpha << 1.0, cd(0.0, 1.0), -0.5, 0.25;
  const AdmissiblePotential q = make_potential(ref, idx, alpha, 0.25, 2.0);
  for (int j = 0; j < b.size(); ++j) {
    cd v = 0.0;
    for (int c = 0; c < 4; ++c) {
      v += alpha(c) * std::polar(1.0, ref.modes[idx[c]] * b.node(j)) / std::sqrt(2 * M_PI);
    }
    CHECK(std::abs(q.node_values(j) - v) < 1e-13);
  }
  double hs2 = 0.0;
  for (int c = 0; c < 4; ++c) hs2 += std::pow(1 + std::pow(ref.mu(idx[c]), 2), 2.0) * std::norm(alpha(c));
  CHECK(q.hs_norm == doctest::Approx(std::sqrt(hs2)));
  CHECK_THROWS_AS(make_potential(ref, idx, alpha, 0.15, 2.0), Refusal);
  CHECK_THROWS_AS(make_potential(ref, idx, CVec::Ones(3), 0.25, 2.0), Refusal);
}

TEST_CASE("coupling constant keeps the potential bounded by one") {
  const SpectralBasis b(65, 0.05);
  const ReferenceOperator ref = reference_eigenbasis(b, 65);
  const double L = 1.0, R = 1.5;
  const CoefficientLaw law = CoefficientLaw::uniform_ball(R);
  Stream s(4, fnv1a("coupling"));
  const int D = static_cast<int>(ref.admissible(L).size());
  const double c = coupling_constant(R, D);
  for (int i = 0; i < 200; ++i) {
    const AdmissiblePotential q = draw_potential(law, ref, L, 2.0, s);
    CHECK(c * q.sup_norm <= 1.0 + 1e-12);
    const NormAudit audit = potential_norm_audit(q, 0.05, 2.0, R, sup_norm_constant(0.05, 2.0, 32));
    CHECK(audit.sup_ok);
    CHECK(audit.hs_ok);
  }
  // the bound is attained by alpha aligned with conj(eps_k(x0))
  CVec aligned = CVec::Constant(D, cd(R / std::sqrt(D), 0.0));
  const AdmissiblePotential peak = make_potential(ref, ref.admissible(L), aligned, L, 2.0);
  CHECK(c * std::abs(peak.node_values(0)) == doctest::Approx(1.0));
}
