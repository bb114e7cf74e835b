#include <doctest.h>

#include <cmath>

#include "weyllab/errors.hpp"
#include "weyllab/renorm.hpp"

using namespace weyllab;

TEST_CASE("ladder shrinks geometrically, then by one") {
  CHECK(renorm_ladder(20, 0.2, 8) == std::vector<int>{20, 16, 12, 9, 7, 6, 5, 4, 3, 2, 1, 0});
  CHECK(renorm_ladder(0, 0.2, 8) == std::vector<int>{0});
  CHECK(renorm_ladder(3, 0.1, 1) == std::vector<int>{3, 2, 1, 0});
  CHECK_THROWS_AS(renorm_ladder(10, 0.25, 8), Refusal);
  CHECK_THROWS_AS(renorm_ladder(10, 0.0, 8), Refusal);
  for (int N0 = 1; N0 < 200; N0 += 7) {
    const auto l = renorm_ladder(N0, 0.2, 8);
    for (std::size_t k = 1; k < l.size(); ++k) CHECK(l[k] < l[k - 1]);
    CHECK(l.back() == 0);
  }
}

TEST_CASE("thresholds and stage sizes") {
  RenormOptions opt;
  opt.h = 0.5;
  opt.tau0 = 0.5;
  opt.n2_lab = 3.0;
  opt.n1_lab = 1.0;
  opt.n = 1;
  CHECK(opt.tau(0) == 0.5);
  CHECK(opt.tau(2) == doctest::Approx(0.5 * std::pow(0.5, 6)));
  CHECK(opt.stage_delta(1, 2.0) == doctest::Approx(0.5 * 0.25 / 2.0));
}

TEST_CASE("stage decision looks only at the band") {
  RVec t(5);
  t << 1e-6, 1e-3, 0.1, 0.2, 1.0;
  CHECK(stage_needs_perturbation(t, 3, 1, 0.01));   // t_2 = 1e-3 < 0.01
  CHECK_FALSE(stage_needs_perturbation(t, 5, 3, 0.01));
  CHECK_FALSE(stage_needs_perturbation(t, 3, 2, 0.01));
}

TEST_CASE("band margins are per-band minimum ratios") {
  RenormOptions opt;
  opt.h = 0.1;
  opt.tau0 = 1.0;
  opt.n2_lab = 1.0;
  RVec t(4);
  t << 0.02, 0.05, 0.2, 0.5;
  const auto m = band_margins(t, {3, 1, 0}, opt);
  REQUIRE(m.size() == 2);
  CHECK(m[0] == doctest::Approx(0.05 / 0.1));   // band {2, 3} against tau(1) = 0.1
  CHECK(m[1] == doctest::Approx(0.02 / 0.01));   // band {1} against tau(2) = 0.01
}

TEST_CASE("clustered model has the requested singular values") {
  const CMat A = clustered_model(64, 6, 1e-8, 3);
  const RVec t = singular_values(A).reverse();
  for (int i = 0; i < 6; ++i) CHECK(t(i) == doctest::Approx(1e-8).epsilon(1e-6));
  CHECK(t(6) >= 1.0 - 1e-12);
  CHECK(t(63) <= 2.0 + 1e-12);
  CHECK((A - A.transpose()).norm() < 1e-12 * A.norm());
  CHECK_THROWS_AS(clustered_model(16, 5, 1e-8, 1), Refusal);
}

TEST_CASE("staged renormalization lifts a small cluster") {
  const int dim = 64;
  const CMat A = clustered_model(dim, 6, 1e-8, 4);
  RenormOptions opt;
  const SpectralBasis basis(dim, opt.h);
  const RenormTrace tr = run_renorm(A, 0.0, basis, opt);
  CHECK(tr.all_bands_certified);
  CHECK(tr.ladder.front() == 6);
  CHECK(static_cast<int>(tr.stages.size()) <= tr.stage_count_bound);
  for (const auto& s : tr.stages) CHECK(s.certified);
  // the construction only adds a multiplication operator
  const CMat diff = tr.final_matrix - A;
  CHECK((diff - CMat(diff.diagonal().asDiagonal())).norm() == 0.0);
  CHECK((diff.diagonal() - tr.cumulative_potential).norm() < 1e-15);
  const RVec t = singular_values(tr.final_matrix).reverse();
  CHECK((t - tr.final_t).norm() < 1e-12);
  CHECK(tr.alpha_total_norm <= tr.alpha_sum_of_norms + 1e-15);
  const auto jsonl = tr.summary();
  CHECK(jsonl["all_bands_certified"] == true);
}

TEST_CASE("disabled renormalization leaves the small cluster below its floors") {
  const CMat A = clustered_model(64, 6, 1e-8, 4);
  RenormOptions opt;
  opt.enabled = false;
  const RenormTrace tr = run_renorm(A, 0.0, SpectralBasis(64, opt.h), opt);
  CHECK_FALSE(tr.all_bands_certified);
  CHECK((tr.final_matrix - A).norm() == 0.0);
}

TEST_CASE("renormalization refuses mismatched sizes") {
  const CMat A = clustered_model(32, 2, 1e-8, 1);
  CHECK_THROWS_AS(run_renorm(A, 0.0, SpectralBasis(31, 0.5), RenormOptions{}), Refusal);
}

TEST_CASE("log-det bounds compare against the phase term") {
  CMat rel = CMat::Identity(3, 3) * 2.0;
  CMat sh = CMat::Identity(3, 3);
  const LogdetBounds b = logdet_bounds(rel, sh, 0.2, 0.1, 0.05, 2.0);
  CHECK(b.actual == doctest::Approx(3 * std::log(2.0)));
  CHECK(b.phi_term == doctest::Approx(2.0));
  CHECK(b.lower == doctest::Approx(1.0));
  CHECK(b.upper == doctest::Approx(3.0));
  CHECK(b.contained);
  CHECK(b.min_ratio == doctest::Approx(2.0));
}
