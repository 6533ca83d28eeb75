#include "attenuate/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace attenuate {

template <typename Real>
Fft<Real>::Fft(std::size_t n) : n_(n) {
  if (!is_pow2(n)) throw std::invalid_argument("fft length must be a power of two");
  rev_.resize(n);
  rev_[0] = 0;
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 1; i < n; ++i) {
    rev_[i] = static_cast<std::uint32_t>((rev_[i >> 1] >> 1) | ((i & 1) << (bits - 1)));
  }
  tw_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    tw_[k] = std::complex<Real>(static_cast<Real>(std::cos(ang)), static_cast<Real>(std::sin(ang)));
  }
}

template <typename Real>
void Fft<Real>::run(std::complex<Real>* a, bool inverse) const {
  const std::size_t n = n_;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t j = rev_[i];
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len >> 1;
    const std::size_t step = n / len;
    for (std::size_t base = 0; base < n; base += len) {
      for (std::size_t k = 0; k < half; ++k) {
        std::complex<Real> w = tw_[k * step];
        if (inverse) w = std::conj(w);
        std::complex<Real> u = a[base + k];
        std::complex<Real> v = a[base + k + half] * w;
        a[base + k] = u + v;
        a[base + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const Real s = Real(1) / static_cast<Real>(n);
    for (std::size_t i = 0; i < n; ++i) a[i] *= s;
  }
}

template <typename Real>
void Fft<Real>::forward(std::complex<Real>* data) const { run(data, false); }

template <typename Real>
void Fft<Real>::inverse(std::complex<Real>* data) const { run(data, true); }

template class Fft<float>;
template class Fft<double>;

}  // namespace attenuate
