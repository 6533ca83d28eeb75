#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace attenuate {

using cplx = std::complex<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad tensor/layer dimensions (zero counts, length mismatches).
class DimensionError : public Error { public: using Error::Error; };
// Tensor shape does not match what the consumer expects.
class ShapeError : public Error { public: using Error::Error; };
// Stream chunk length not a multiple of the resampling frame.
class AlignmentError : public Error { public: using Error::Error; };
// Unsupported resampling factor / rate / bit depth.
class FactorError : public Error { public: using Error::Error; };
// Clean reference has no usable power.
class SilentInputError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class CorruptFileError : public Error { public: using Error::Error; };
class VersionError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class OverflowError : public Error { public: using Error::Error; };
class DiagonalizationError : public Error { public: using Error::Error; };
class DivergenceError : public Error { public: using Error::Error; };

/// Seedable RNG used for all weight init and synthetic data.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    return d(gen_);
  }
  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(gen_);
  }
  std::uint64_t next_u64() { return gen_(); }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline double softplus(double x) {
  // max(x,0) + log1p(exp(-|x|)) avoids overflow on both tails
  double ax = x < 0 ? -x : x;
  return (x > 0 ? x : 0.0) + std::log1p(std::exp(-ax));
}

inline double logistic(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace attenuate
