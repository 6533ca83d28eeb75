#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace attenuate {

constexpr bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Radix-2 complex FFT over a fixed power-of-two length. Twiddles and the
/// bit-reversal permutation are precomputed so the object can be reused
/// across the many transforms of one convolution pass.
template <typename Real>
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }

  void forward(std::complex<Real>* data) const;
  /// Inverse transform including the 1/n scaling.
  void inverse(std::complex<Real>* data) const;

 private:
  void run(std::complex<Real>* data, bool inverse) const;

  std::size_t n_;
  std::vector<std::uint32_t> rev_;
  std::vector<std::complex<Real>> tw_;  // forward-sign roots, n/2 entries
};

extern template class Fft<float>;
extern template class Fft<double>;

}  // namespace attenuate
