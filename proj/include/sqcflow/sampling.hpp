#pragma once

// Counter-based random streams. Draw number j of stream i under seed s is a
// pure function of (s, i, j), so sample blocks are reproducible, can be
// generated in any order and a run with N samples is a prefix of one with 2N.

#include "sqcflow/core.hpp"

#include <cstdint>
#include <numbers>

namespace sqcflow {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

class SampleStream {
 public:
  SampleStream(std::uint64_t seed, std::uint64_t index)
      : key_(detail::splitmix64(detail::splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ULL))) {}

  std::uint64_t next_u64() { return detail::splitmix64(key_ + 0x632BE59BD9B4E019ULL * ++counter_); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller; written out so streams are identical
  /// across standard libraries.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Point normal_vector(int dim) {
    Point v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal();
    return v;
  }

  /// Uniform unit direction.
  Point direction(int dim) {
    for (;;) {
      Point v = normal_vector(dim);
      const double n = v.norm();
      if (n > 1e-300) return v / n;
    }
  }

  /// Uniform point of the (bounded) domain, rejection on attached constraints
  /// and on `exclude`.
  Point uniform_in(const DomainSpec& domain, const Predicate& exclude = {}) {
    constexpr int kMaxRejections = 1000;
    if (!domain.bounded())
      throw Error(ErrorKind::DomainSamplingFailure,
                  "cannot sample uniformly from an unbounded domain; set a sample region");
    for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
      Point x = raw_sample(domain);
      if (domain.contains(x) && (!exclude || !exclude(x))) return x;
    }
    throw Error(ErrorKind::DomainSamplingFailure,
                "1000 consecutive rejections while sampling " + domain.describe());
  }

 private:
  Point raw_sample(const DomainSpec& domain) {
    const int n = domain.dim();
    if (domain.kind() == DomainSpec::Kind::Ball) {
      const Point dir = direction(n);
      const double r = domain.radius() * std::pow(uniform(), 1.0 / n);
      return domain.center() + r * dir;
    }
    Point x(n);
    for (int i = 0; i < n; ++i) x[i] = uniform(domain.lower()[i], domain.upper()[i]);
    return x;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace sqcflow
