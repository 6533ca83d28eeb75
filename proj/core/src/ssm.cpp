#include "attenuate/ssm.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace attenuate {

cplx zoh_pole(cplx a, double dt) { return std::exp(dt * a); }

cplx zoh_gain(cplx a, double dt) {
  const cplx z = dt * a;
  if (std::abs(z) < 1e-4) {
    // (e^z - 1)/a = dt * (1 + z/2 + z^2/6)
    return dt * (1.0 + z / 2.0 + z * z / 6.0);
  }
  return (std::exp(z) - 1.0) / a;
}

double delta_init(int index, int h) {
  // Geometric ladder 0.001 -> 0.1 in blocks of 16 states. The block exponent
  // is normalized so the endpoints hold for any h >= 32; h = 32 reduces to
  // 0.001 * 100^(block).
  const double block = static_cast<double>(index / 16);
  const double denom = std::max(1.0, static_cast<double>(h) / 16.0 - 1.0);
  return 0.001 * std::pow(100.0, block / denom);
}

ContinuousSsm init_ssm(int n, int m, int h, std::uint64_t seed) {
  if (n < 1 || m < 1 || h < 1) throw DimensionError("init_ssm: all dimensions must be >= 1");
  ContinuousSsm s;
  s.n = n;
  s.m = m;
  s.h = h;
  s.a_re.assign(h, -0.4328);  // softplus(0.4328) = 0.5, so Re(pole) = -1/2
  s.a_im.resize(h);
  for (int i = 0; i < h; ++i) s.a_im[i] = std::numbers::pi * i;
  s.b.assign(std::size_t(h) * n, 1.0);
  s.c.resize(std::size_t(m) * h);
  Rng rng(seed);
  const double stddev = std::sqrt(2.0 / h);  // Kaiming, fan-in h
  for (auto& v : s.c) v = rng.normal(0.0, stddev);
  s.dt.resize(h);
  for (int i = 0; i < h; ++i) s.dt[i] = delta_init(i, h);
  return s;
}

DiscreteSsm discretize_zoh(const ContinuousSsm& ssm) {
  DiscreteSsm d;
  d.n = ssm.n;
  d.m = ssm.m;
  d.h = ssm.h;
  d.a.resize(ssm.h);
  d.zoh.resize(ssm.h);
  for (int s = 0; s < ssm.h; ++s) {
    const cplx a = ssm.pole(s);
    d.a[s] = zoh_pole(a, ssm.dt[s]);
    d.zoh[s] = zoh_gain(a, ssm.dt[s]);
  }
  d.b = ssm.b;
  d.c = ssm.c;
  return d;
}

std::vector<double> basis_kernel(const DiscreteSsm& d, int s, std::size_t len) {
  std::vector<double> r(len);
  cplx pw = d.zoh[s];
  for (std::size_t t = 0; t < len; ++t) {
    r[t] = pw.real();
    pw *= d.a[s];
  }
  return r;
}

KernelBank materialize_kernel(const DiscreteSsm& d, std::size_t len) {
  if (len < 1) throw DimensionError("materialize_kernel: len must be >= 1");
  KernelBank bank;
  bank.n = d.n;
  bank.m = d.m;
  bank.len = len;
  bank.k.assign(std::size_t(d.m) * d.n * len, 0.0);
  for (int s = 0; s < d.h; ++s) {
    const std::vector<double> r = basis_kernel(d, s, len);
    for (int j = 0; j < d.m; ++j) {
      const double cj = d.c[std::size_t(j) * d.h + s];
      if (cj == 0.0) continue;
      for (int i = 0; i < d.n; ++i) {
        const double w = cj * d.b[std::size_t(s) * d.n + i];
        double* out = &bank.k[(std::size_t(j) * d.n + i) * len];
        for (std::size_t t = 0; t < len; ++t) out[t] += w * r[t];
      }
    }
  }
  return bank;
}

KernelBank materialize_kernel(const DiagonalizedSsm& d, std::size_t len) {
  if (len < 1) throw DimensionError("materialize_kernel: len must be >= 1");
  KernelBank bank;
  bank.n = d.n;
  bank.m = d.m;
  bank.len = len;
  bank.k.assign(std::size_t(d.m) * d.n * len, 0.0);
  std::vector<cplx> pw(d.h);
  for (int s = 0; s < d.h; ++s) pw[s] = 1.0;
  for (std::size_t t = 0; t < len; ++t) {
    for (int j = 0; j < d.m; ++j) {
      for (int i = 0; i < d.n; ++i) {
        cplx acc = 0.0;
        for (int s = 0; s < d.h; ++s) {
          acc += d.c[std::size_t(j) * d.h + s] * pw[s] * d.b[std::size_t(s) * d.n + i];
        }
        bank.k[(std::size_t(j) * d.n + i) * len + t] = acc.real();
      }
    }
    for (int s = 0; s < d.h; ++s) pw[s] *= d.a[s];
  }
  return bank;
}

DiagonalizedSsm diagonalize(const DenseSsm& dense) {
  const int h = dense.h;
  Eigen::MatrixXd a(h, h);
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < h; ++col) a(r, col) = dense.a[std::size_t(r) * h + col];

  Eigen::EigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) {
    throw DiagonalizationError("diagonalize: eigendecomposition failed to converge");
  }
  Eigen::MatrixXcd v = solver.eigenvectors();

  // Reject numerically defective systems: the similarity transform must be
  // invertible well away from machine precision.
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
  const double smin = svd.singularValues()(h - 1);
  const double smax = svd.singularValues()(0);
  if (smin <= 0.0 || smax / smin > 1e12) {
    throw DiagonalizationError("diagonalize: eigenvector matrix is numerically singular");
  }

  Eigen::MatrixXcd b(h, dense.n);
  for (int r = 0; r < h; ++r)
    for (int i = 0; i < dense.n; ++i) b(r, i) = dense.b[std::size_t(r) * dense.n + i];
  Eigen::MatrixXcd c(dense.m, h);
  for (int j = 0; j < dense.m; ++j)
    for (int s = 0; s < h; ++s) c(j, s) = dense.c[std::size_t(j) * h + s];

  // A = V L V^-1, so C A^t B = (C V) L^t (V^-1 B).
  Eigen::MatrixXcd babs = v.partialPivLu().solve(b);
  Eigen::MatrixXcd cabs = c * v;

  DiagonalizedSsm out;
  out.n = dense.n;
  out.m = dense.m;
  out.h = h;
  out.a.resize(h);
  for (int s = 0; s < h; ++s) out.a[s] = solver.eigenvalues()(s);
  out.b.resize(std::size_t(h) * dense.n);
  for (int s = 0; s < h; ++s)
    for (int i = 0; i < dense.n; ++i) out.b[std::size_t(s) * dense.n + i] = babs(s, i);
  out.c.resize(std::size_t(dense.m) * h);
  for (int j = 0; j < dense.m; ++j)
    for (int s = 0; s < h; ++s) out.c[std::size_t(j) * h + s] = cabs(j, s);
  return out;
}

}  // namespace attenuate
