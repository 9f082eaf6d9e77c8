#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mga {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or extent disagreement between tensors/operations.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid model/run configuration (bad preset, key, or structural constraint).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input data (labels, TSV lines, unknown classes).
struct DataError : Error {
  using Error::Error;
};

// File I/O and format failures (WAV headers, checkpoints, feature files).
struct IoError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required (NaN loss and friends).
struct NumericError : Error {
  using Error::Error;
};

// API misuse (backward on an untracked tensor, double backward, ...).
struct UsageError : Error {
  using Error::Error;
};

/// Deterministic RNG. mt19937_64 raw output is standardized; the value
/// transforms are done by hand so streams are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed), seed_(seed) {}

  Rng(uint64_t seed, uint64_t stream)
      : gen_(mix(seed, stream)), seed_(mix(seed, stream)) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // [0, n)
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(gen_()) *
                             static_cast<unsigned __int128>(n)) >>
                            64);
  }

  // standard normal, Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  /// Derive an independent stream (e.g. one per epoch) without disturbing
  /// this generator's state.
  Rng fork(uint64_t salt) const { return Rng(seed_, salt); }

 private:
  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a * 0x9e3779b97f4a7c15ULL + b + 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  std::mt19937_64 gen_;
  uint64_t seed_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mga
