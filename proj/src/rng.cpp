#include "weyllab/rng.hpp"

#include <cmath>
#include <numbers>

namespace weyllab {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t stream_id(std::uint64_t root, std::uint64_t key1,
                        std::uint64_t key2) {
  return splitmix64(splitmix64(splitmix64(root) ^ key1) ^ (key2 * 0x9e37ULL + 1));
}

Stream::Stream(std::uint64_t root, std::uint64_t key1, std::uint64_t key2)
    : id_(stream_id(root, key1, key2)), engine_(id_) {}

double Stream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Stream::uniform_open_below() { return 1.0 - uniform(); }

double Stream::normal() {
  const double u1 = uniform_open_below();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::complex<double> Stream::complex_normal(double variance) {
  const double sd = std::sqrt(variance / 2.0);
  const double re = normal();
  const double im = normal();
  return {sd * re, sd * im};
}

}  // namespace weyllab
