#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "attenuate/contraction.hpp"
#include "attenuate/ssm.hpp"

namespace attenuate {

/// Cached spectra of one layer's per-state basis kernels for a given signal
/// length. fft_len is a power of two >= 2*len - 1, so the convolution is
/// linear, never circular.
struct FftPlan {
  std::size_t signal_len = 0;
  std::size_t fft_len = 0;
  int h = 0;
  std::vector<std::complex<double>> basis;  // h x fft_len
};

FftPlan make_fft_plan(const DiscreteSsm& d, std::size_t len);

/// Causal convolution of an n x len input with the layer's impulse-response
/// kernels (kernel length = signal length), computed in the Fourier domain
/// under the given contraction order. Returns m x len.
std::vector<double> fft_convolve(std::span<const double> input, std::size_t len,
                                 const DiscreteSsm& d, const FftPlan& plan,
                                 ContractionVariant order);
std::vector<double> fft_convolve(std::span<const double> input, std::size_t len,
                                 const DiscreteSsm& d, ContractionVariant order);
std::vector<double> fft_convolve(std::span<const double> input, std::size_t len,
                                 const DiscreteSsm& d);

/// Complex internal state of one streaming SSM layer.
struct SsmStreamState {
  std::vector<cplx> x;  // h
};

SsmStreamState make_ssm_state(const DiscreteSsm& d);

/// One recurrence step: x <- diag(a) x + b_eff u, returns y = c Re(x).
/// The first output after a reset already includes the b_eff u term, so the
/// streamed impulse response starts at k[0] = c Re(b_eff).
std::vector<double> step_recurrent(SsmStreamState& state, const DiscreteSsm& d,
                                   std::span<const double> u);

/// Convenience: run the recurrence over a whole n x len block. Matches
/// fft_convolve on the same input to rounding error.
std::vector<double> run_recurrent(SsmStreamState& state, const DiscreteSsm& d,
                                  std::span<const double> input, std::size_t len);

}  // namespace attenuate
