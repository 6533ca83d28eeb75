// Templated single-layer primitives shared by the public double-precision
// ops and the float/double network engine.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "attenuate/contraction.hpp"
#include "attenuate/fft.hpp"
#include "attenuate/ssm.hpp"

namespace attenuate::detail {

template <typename Real>
struct SsmLayerT {
  int n = 0, m = 0, h = 0;
  std::vector<std::complex<Real>> a, zoh;
  std::vector<Real> b, c;
};

template <typename Real>
SsmLayerT<Real> cast_ssm(const DiscreteSsm& d) {
  SsmLayerT<Real> out;
  out.n = d.n;
  out.m = d.m;
  out.h = d.h;
  out.a.reserve(d.a.size());
  for (cplx v : d.a) out.a.emplace_back(Real(v.real()), Real(v.imag()));
  out.zoh.reserve(d.zoh.size());
  for (cplx v : d.zoh) out.zoh.emplace_back(Real(v.real()), Real(v.imag()));
  out.b.assign(d.b.begin(), d.b.end());
  out.c.assign(d.c.begin(), d.c.end());
  return out;
}

template <typename Real>
struct SsmPlanT {
  std::size_t signal_len = 0;
  std::size_t fft_len = 0;
  int h = 0;
  std::vector<std::complex<Real>> basis;  // h x fft_len spectra of Re(zoh * a^tau)
};

// Basis kernels are generated in double regardless of Real so the iterated
// powers do not drift, then rounded once before the transform.
template <typename Real>
SsmPlanT<Real> make_ssm_plan(const DiscreteSsm& d, std::size_t len) {
  SsmPlanT<Real> plan;
  plan.signal_len = len;
  plan.fft_len = next_pow2(std::max<std::size_t>(2, 2 * len - 1));
  plan.h = d.h;
  plan.basis.assign(std::size_t(d.h) * plan.fft_len, std::complex<Real>{});
  Fft<Real> fft(plan.fft_len);
  for (int s = 0; s < d.h; ++s) {
    std::complex<Real>* row = &plan.basis[std::size_t(s) * plan.fft_len];
    cplx pw = d.zoh[s];
    for (std::size_t t = 0; t < len; ++t) {
      row[t] = std::complex<Real>(Real(pw.real()), Real(0));
      pw *= d.a[s];
    }
    fft.forward(row);
  }
  return plan;
}

template <typename Real>
std::vector<Real> ssm_conv_input_first(std::span<const Real> input, std::size_t len,
                                       const SsmLayerT<Real>& lay, const SsmPlanT<Real>& plan) {
  const std::size_t nf = plan.fft_len;
  Fft<Real> fft(nf);
  std::vector<std::complex<Real>> work(nf);
  std::vector<Real> out(std::size_t(lay.m) * len, Real(0));
  std::vector<Real> srow(len);
  for (int s = 0; s < lay.h; ++s) {
    std::fill(work.begin(), work.end(), std::complex<Real>{});
    const Real* brow = &lay.b[std::size_t(s) * lay.n];
    for (std::size_t t = 0; t < len; ++t) {
      Real acc = 0;
      for (int i = 0; i < lay.n; ++i) acc += brow[i] * input[std::size_t(i) * len + t];
      work[t] = acc;
    }
    fft.forward(work.data());
    const std::complex<Real>* krow = &plan.basis[std::size_t(s) * nf];
    for (std::size_t f = 0; f < nf; ++f) work[f] *= krow[f];
    fft.inverse(work.data());
    for (std::size_t t = 0; t < len; ++t) srow[t] = work[t].real();
    for (int j = 0; j < lay.m; ++j) {
      const Real cj = lay.c[std::size_t(j) * lay.h + s];
      if (cj == Real(0)) continue;
      Real* orow = &out[std::size_t(j) * len];
      for (std::size_t t = 0; t < len; ++t) orow[t] += cj * srow[t];
    }
  }
  return out;
}

template <typename Real>
std::vector<Real> ssm_conv_kernel_first(std::span<const Real> input, std::size_t len,
                                        const SsmLayerT<Real>& lay, const SsmPlanT<Real>& plan) {
  const std::size_t nf = plan.fft_len;
  Fft<Real> fft(nf);

  std::vector<std::complex<Real>> kernel(std::size_t(lay.m) * lay.n * nf, std::complex<Real>{});
  for (int j = 0; j < lay.m; ++j) {
    for (int s = 0; s < lay.h; ++s) {
      const Real cj = lay.c[std::size_t(j) * lay.h + s];
      if (cj == Real(0)) continue;
      const std::complex<Real>* krow = &plan.basis[std::size_t(s) * nf];
      for (int i = 0; i < lay.n; ++i) {
        const Real w = cj * lay.b[std::size_t(s) * lay.n + i];
        if (w == Real(0)) continue;
        std::complex<Real>* dst = &kernel[(std::size_t(j) * lay.n + i) * nf];
        for (std::size_t f = 0; f < nf; ++f) dst[f] += w * krow[f];
      }
    }
  }

  std::vector<std::complex<Real>> inputs_f(std::size_t(lay.n) * nf, std::complex<Real>{});
  for (int i = 0; i < lay.n; ++i) {
    std::complex<Real>* row = &inputs_f[std::size_t(i) * nf];
    for (std::size_t t = 0; t < len; ++t) row[t] = input[std::size_t(i) * len + t];
    fft.forward(row);
  }

  std::vector<Real> out(std::size_t(lay.m) * len, Real(0));
  std::vector<std::complex<Real>> acc(nf);
  for (int j = 0; j < lay.m; ++j) {
    std::fill(acc.begin(), acc.end(), std::complex<Real>{});
    for (int i = 0; i < lay.n; ++i) {
      const std::complex<Real>* krow = &kernel[(std::size_t(j) * lay.n + i) * nf];
      const std::complex<Real>* urow = &inputs_f[std::size_t(i) * nf];
      for (std::size_t f = 0; f < nf; ++f) acc[f] += krow[f] * urow[f];
    }
    fft.inverse(acc.data());
    for (std::size_t t = 0; t < len; ++t) out[std::size_t(j) * len + t] = acc[t].real();
  }
  return out;
}

template <typename Real>
std::vector<Real> ssm_conv(std::span<const Real> input, std::size_t len,
                           const SsmLayerT<Real>& lay, const SsmPlanT<Real>& plan,
                           ContractionVariant order) {
  return order == ContractionVariant::kInputProjectFirst
             ? ssm_conv_input_first(input, len, lay, plan)
             : ssm_conv_kernel_first(input, len, lay, plan);
}

// One recurrence step over a whole frame: x <- a x + zoh (b u); y = c Re(x).
template <typename Real>
void ssm_step(const SsmLayerT<Real>& lay, std::complex<Real>* x, const Real* u, Real* y) {
  for (int j = 0; j < lay.m; ++j) y[j] = Real(0);
  for (int s = 0; s < lay.h; ++s) {
    Real proj = 0;
    const Real* brow = &lay.b[std::size_t(s) * lay.n];
    for (int i = 0; i < lay.n; ++i) proj += brow[i] * u[i];
    x[s] = x[s] * lay.a[s] + lay.zoh[s] * proj;
    const Real xr = x[s].real();
    const Real* crow = &lay.c[s];
    for (int j = 0; j < lay.m; ++j) y[j] += crow[std::size_t(j) * lay.h] * xr;
  }
}

// Centered depthwise width-3 convolution, zero padded: one frame look-ahead.
template <typename Real>
std::vector<Real> preconv_apply(std::span<const Real> x, int ch, std::size_t len,
                                std::span<const Real> w, std::span<const Real> bias) {
  std::vector<Real> out(std::size_t(ch) * len);
  for (int c = 0; c < ch; ++c) {
    const Real w0 = w[std::size_t(c) * 3 + 0];
    const Real w1 = w[std::size_t(c) * 3 + 1];
    const Real w2 = w[std::size_t(c) * 3 + 2];
    const Real b = bias.empty() ? Real(0) : bias[c];
    const Real* in = &x[std::size_t(c) * len];
    Real* o = &out[std::size_t(c) * len];
    for (std::size_t t = 0; t < len; ++t) {
      const Real prev = t > 0 ? in[t - 1] : Real(0);
      const Real next = t + 1 < len ? in[t + 1] : Real(0);
      o[t] = w0 * prev + w1 * in[t] + w2 * next + b;
    }
  }
  return out;
}

// (ch, len) -> (out_ch, len/r): r consecutive frames concatenated
// (frame-major) then projected.
template <typename Real>
std::vector<Real> downsample_apply(std::span<const Real> x, int ch, std::size_t len, int r,
                                   std::span<const Real> w, std::span<const Real> bias,
                                   int out_ch) {
  const std::size_t groups = len / std::size_t(r);
  const int in_dim = ch * r;
  std::vector<Real> out(std::size_t(out_ch) * groups);
  std::vector<Real> frame(in_dim);
  for (std::size_t g = 0; g < groups; ++g) {
    for (int q = 0; q < r; ++q)
      for (int c = 0; c < ch; ++c)
        frame[std::size_t(q) * ch + c] = x[std::size_t(c) * len + g * r + q];
    for (int o = 0; o < out_ch; ++o) {
      Real acc = bias.empty() ? Real(0) : bias[o];
      const Real* wro = &w[std::size_t(o) * in_dim];
      for (int k = 0; k < in_dim; ++k) acc += wro[k] * frame[k];
      out[std::size_t(o) * groups + g] = acc;
    }
  }
  return out;
}

// (ch, len) -> (out_ch, len*r): channels split into r sub-frames
// (contiguous blocks of ch/r), each projected.
template <typename Real>
std::vector<Real> upsample_apply(std::span<const Real> x, int ch, std::size_t len, int r,
                                 std::span<const Real> w, std::span<const Real> bias,
                                 int out_ch) {
  const int sub = ch / r;
  const std::size_t out_len = len * std::size_t(r);
  std::vector<Real> out(std::size_t(out_ch) * out_len);
  std::vector<Real> frame(sub);
  for (std::size_t t = 0; t < len; ++t) {
    for (int q = 0; q < r; ++q) {
      for (int c = 0; c < sub; ++c) frame[c] = x[std::size_t(q * sub + c) * len + t];
      const std::size_t ot = t * r + q;
      for (int o = 0; o < out_ch; ++o) {
        Real acc = bias.empty() ? Real(0) : bias[o];
        const Real* wro = &w[std::size_t(o) * sub];
        for (int c = 0; c < sub; ++c) acc += wro[c] * frame[c];
        out[std::size_t(o) * out_len + ot] = acc;
      }
    }
  }
  return out;
}

inline constexpr double kNormEps = 1e-5;

// LayerNorm over the channel dimension, one frame at a time.
template <typename Real>
void layernorm_frame(Real* frame, int ch, const Real* gamma, const Real* beta) {
  Real mean = 0;
  for (int c = 0; c < ch; ++c) mean += frame[c];
  mean /= Real(ch);
  Real var = 0;
  for (int c = 0; c < ch; ++c) {
    const Real dv = frame[c] - mean;
    var += dv * dv;
  }
  var /= Real(ch);
  const Real inv = Real(1) / std::sqrt(var + Real(kNormEps));
  for (int c = 0; c < ch; ++c) frame[c] = gamma[c] * (frame[c] - mean) * inv + beta[c];
}

// BatchNorm at inference: running statistics per channel.
template <typename Real>
void batchnorm_frame(Real* frame, int ch, const Real* gamma, const Real* beta,
                     const Real* rmean, const Real* rvar) {
  for (int c = 0; c < ch; ++c) {
    const Real inv = Real(1) / std::sqrt(rvar[c] + Real(kNormEps));
    frame[c] = gamma[c] * (frame[c] - rmean[c]) * inv + beta[c];
  }
}

template <typename Real>
Real silu(Real v) {
  return v / (Real(1) + std::exp(-v));
}

template <typename Real>
Real relu(Real v) {
  return v > Real(0) ? v : Real(0);
}

}  // namespace attenuate::detail
