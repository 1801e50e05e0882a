#pragma once
#include <cmath>
#include <cstdint>
#include <string_view>

namespace liflab::rng {

// 64-bit finalizer from splitmix64 (public domain, Vigna).  Used both as
// the core generator and to derive decorrelated seeds for named streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t x = 0xcbf29ce484222325ULL;
  for (char c : s) {
    x ^= static_cast<unsigned char>(c);
    x *= 0x00000100000001b3ULL;
  }
  return x;
}

// Seed for stream (name, index) under a master seed.  Distinct names or
// indices give statistically independent streams, and the mapping is fixed
// for all time so runs are reproducible across platforms and thread counts.
inline std::uint64_t stream_seed(std::uint64_t master, std::string_view name,
                                 std::uint64_t index = 0) {
  return mix64(mix64(mix64(master) ^ fnv1a(name)) ^ index);
}

// Small counter-based generator: state advances by splitmix64.  8 bytes of
// state lets us keep one private stream per neuron in large ensembles.
// All samplers are written out explicitly (no std::*_distribution) so the
// byte stream of results is identical on every platform.
class Stream {
 public:
  Stream() : s_(0) {}
  explicit Stream(std::uint64_t seed) : s_(seed) {}
  Stream(std::uint64_t master, std::string_view name, std::uint64_t index = 0)
      : s_(stream_seed(master, name, index)) {}

  std::uint64_t bits() {
    s_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = s_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1]: strictly positive so log() below is always finite.
  double uniform01() { return static_cast<double>((bits() >> 11) + 1) * 0x1.0p-53; }

  // Uniform on [a, b).
  double uniform(double a, double b) {
    return a + (b - a) * (static_cast<double>(bits() >> 11) * 0x1.0p-53);
  }

  double exponential(double rate) { return -std::log(uniform01()) / rate; }

  bool bernoulli(double p) { return uniform01() <= p; }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t lim = (-n) % n;  // 2^64 mod n
    std::uint64_t r;
    do {
      r = bits();
    } while (r < lim);
    return r % n;
  }

  // Standard normal, Box-Muller with a cached spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

 private:
  std::uint64_t s_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace liflab::rng
