#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tripletnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or inner dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation contract was violated (empty batch, non-scalar loss, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// A run configuration is invalid or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset ingestion or file parsing failed.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A NaN/Inf reached a point where finiteness is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// splitmix64 step, also used to derive independent seed streams.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Small deterministic generator. We keep our own instead of <random>
/// distributions so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) throw ValueError("uniform_int: n must be positive");
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via the polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Caps the number of worker threads used inside kernels. Results are
/// bit-identical for any thread count: parallelism is only across
/// independent output elements and every reduction keeps a fixed order.
void set_max_threads(int n);
int max_threads();

}  // namespace tripletnet
