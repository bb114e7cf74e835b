#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace weyllab {

std::uint64_t splitmix64(std::uint64_t x);

/// FNV-1a hash, used to turn experiment names into stream keys.
std::uint64_t fnv1a(std::string_view text);

/// Derives an independent stream id from a root seed and two integer keys.
std::uint64_t stream_id(std::uint64_t root, std::uint64_t key1,
                        std::uint64_t key2 = 0);

/// Random stream keyed by (root, key1, key2). Uniforms and normals are
/// produced by explicit formulas on top of mt19937_64 so that values do not
/// depend on the standard library's distribution implementations.
class Stream {
 public:
  Stream(std::uint64_t root, std::uint64_t key1, std::uint64_t key2 = 0);

  std::uint64_t id() const { return id_; }
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in (0, 1].
  double uniform_open_below();
  double normal();
  /// Complex normal with E|w|^2 = variance (variance/2 per component).
  std::complex<double> complex_normal(double variance = 1.0);

 private:
  std::uint64_t id_;
  std::mt19937_64 engine_;
};

}  // namespace weyllab
