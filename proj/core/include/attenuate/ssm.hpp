#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "attenuate/common.hpp"

namespace attenuate {

/// Learnable parameterization of one MIMO state-space layer.
///
/// The diagonal state matrix is a = -softplus(a_re) + i*a_im per state, so
/// its real part is negative for every finite a_re and the layer is stable
/// by construction. b mixes n input channels into h states, c reads m output
/// channels out of them, dt is the per-state timestep.
struct ContinuousSsm {
  int n = 0;  // input channels
  int m = 0;  // output channels
  int h = 0;  // states
  std::vector<double> a_re;  // h, pre-softplus real-part parameter
  std::vector<double> a_im;  // h
  std::vector<double> b;     // h x n, row-major
  std::vector<double> c;     // m x h, row-major
  std::vector<double> dt;    // h, positive

  cplx pole(int s) const { return {-softplus(a_re[s]), a_im[s]}; }
};

/// Inference-ready discrete form of a ContinuousSsm.
///
/// a holds the diagonal of the discrete state matrix exp(dt*pole); zoh is
/// the per-state input gain (exp(dt*pole)-1)/pole. The mixing matrices b and
/// c stay real; the effective (complex) discrete input matrix is
/// diag(zoh) * b.
struct DiscreteSsm {
  int n = 0;
  int m = 0;
  int h = 0;
  std::vector<cplx> a;    // h
  std::vector<cplx> zoh;  // h
  std::vector<double> b;  // h x n
  std::vector<double> c;  // m x h

  cplx b_eff(int s, int i) const { return zoh[std::size_t(s)] * b[std::size_t(s) * n + i]; }
};

/// Materialized impulse-response kernels, k[j][i][tau] for tau in [0, len).
struct KernelBank {
  int n = 0;
  int m = 0;
  std::size_t len = 0;
  std::vector<double> k;  // m x n x len

  double at(int j, int i, std::size_t tau) const {
    return k[(std::size_t(j) * n + i) * len + tau];
  }
};

/// Non-diagonal real system, importable via diagonalize().
struct DenseSsm {
  int n = 0;
  int m = 0;
  int h = 0;
  std::vector<double> a;  // h x h
  std::vector<double> b;  // h x n
  std::vector<double> c;  // m x h
};

/// Fully complex diagonal form with the similarity transform absorbed into
/// b and c. Verification-only: the production DiscreteSsm keeps b and c real.
struct DiagonalizedSsm {
  int n = 0;
  int m = 0;
  int h = 0;
  std::vector<cplx> a;  // h
  std::vector<cplx> b;  // h x n
  std::vector<cplx> c;  // m x h
};

// Scalar ZOH pieces, shared by discretization and the kernel gradients.
// zoh_gain switches to a 3-term series below |dt*a| = 1e-4 to avoid the
// 0/0 at a = 0.
cplx zoh_pole(cplx a, double dt);
cplx zoh_gain(cplx a, double dt);

ContinuousSsm init_ssm(int n, int m, int h, std::uint64_t seed);
DiscreteSsm discretize_zoh(const ContinuousSsm& ssm);
KernelBank materialize_kernel(const DiscreteSsm& d, std::size_t len);
KernelBank materialize_kernel(const DiagonalizedSsm& d, std::size_t len);
DiagonalizedSsm diagonalize(const DenseSsm& dense);

/// Per-state real basis kernel r_s[tau] = Re(zoh_s * a_s^tau), the building
/// block of both execution modes: k[j][i][tau] = sum_s c[j][s]*b[s][i]*r_s[tau].
std::vector<double> basis_kernel(const DiscreteSsm& d, int s, std::size_t len);

double delta_init(int index, int h);

}  // namespace attenuate
