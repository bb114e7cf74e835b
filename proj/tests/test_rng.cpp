#include <doctest.h>

#include <cmath>
#include <set>

#include "weyllab/rng.hpp"

using namespace weyllab;

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("splitmix64 reference value") {
  // first output of the reference generator seeded with 0
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("streams are reproducible and keyed") {
  Stream a(42, 7, 3);
  Stream b(42, 7, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  std::set<std::uint64_t> ids;
  for (std::uint64_t root = 0; root < 4; ++root) {
    for (std::uint64_t k1 = 0; k1 < 4; ++k1) {
      for (std::uint64_t k2 = 0; k2 < 4; ++k2) ids.insert(stream_id(root, k1, k2));
    }
  }
  CHECK(ids.size() == 64);
  CHECK(Stream(1, 2, 3).id() == stream_id(1, 2, 3));
}

TEST_CASE("uniform values lie in their ranges with the right moments") {
  Stream s(5, fnv1a("uniform"));
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  int out_of_range = 0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    const double v = s.uniform_open_below();
    if (!(u >= 0.0 && u < 1.0) || !(v > 0.0 && v <= 1.0)) ++out_of_range;
    sum += u;
    sum2 += u * u;
  }
  CHECK(out_of_range == 0);
  const double mean = sum / n;
  CHECK(std::abs(mean - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(sum2 / n - mean * mean - 1.0 / 12.0) < 2e-3);
}

TEST_CASE("normal and complex normal moments") {
  Stream s(6, fnv1a("normal"));
  const int n = 200000;
  double m1 = 0.0, m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    m1 += x;
    m2 += x * x;
    m4 += x * x * x * x;
  }
  CHECK(std::abs(m1 / n) < 5.0 / std::sqrt(n));
  CHECK(m2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(m4 / n == doctest::Approx(3.0).epsilon(0.05));

  double c2 = 0.0, re2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto w = s.complex_normal(4.0);
    c2 += std::norm(w);
    re2 += w.real() * w.real();
  }
  CHECK(c2 / n == doctest::Approx(4.0).epsilon(0.02));
  CHECK(re2 / n == doctest::Approx(2.0).epsilon(0.02));
}
