#include "attenuate/exec.hpp"

#include <algorithm>

#include "engine_ops.hpp"

namespace attenuate {

namespace {

void check_input(std::span<const double> input, std::size_t len, const DiscreteSsm& d) {
  if (len < 1) throw DimensionError("fft_convolve: signal length must be >= 1");
  if (input.size() != std::size_t(d.n) * len) {
    throw ShapeError("fft_convolve: input channel count does not match the layer");
  }
}

}  // namespace

FftPlan make_fft_plan(const DiscreteSsm& d, std::size_t len) {
  if (len < 1) throw DimensionError("fft plan: signal length must be >= 1");
  detail::SsmPlanT<double> p = detail::make_ssm_plan<double>(d, len);
  FftPlan plan;
  plan.signal_len = p.signal_len;
  plan.fft_len = p.fft_len;
  plan.h = p.h;
  plan.basis = std::move(p.basis);
  return plan;
}

std::vector<double> fft_convolve(std::span<const double> input, std::size_t len,
                                 const DiscreteSsm& d, const FftPlan& plan,
                                 ContractionVariant order) {
  check_input(input, len, d);
  if (plan.signal_len != len || plan.h != d.h) {
    throw ShapeError("fft_convolve: plan does not match layer/signal");
  }
  detail::SsmPlanT<double> p;
  p.signal_len = plan.signal_len;
  p.fft_len = plan.fft_len;
  p.h = plan.h;
  p.basis = plan.basis;
  return detail::ssm_conv<double>(input, len, detail::cast_ssm<double>(d), p, order);
}

std::vector<double> fft_convolve(std::span<const double> input, std::size_t len,
                                 const DiscreteSsm& d, ContractionVariant order) {
  check_input(input, len, d);
  detail::SsmPlanT<double> p = detail::make_ssm_plan<double>(d, len);
  return detail::ssm_conv<double>(input, len, detail::cast_ssm<double>(d), p, order);
}

std::vector<double> fft_convolve(std::span<const double> input, std::size_t len,
                                 const DiscreteSsm& d) {
  check_input(input, len, d);
  ContractionDims dims;
  dims.batch = 1;
  dims.in_ch = std::uint64_t(d.n);
  dims.out_ch = std::uint64_t(d.m);
  dims.states = std::uint64_t(d.h);
  dims.modes = next_pow2(std::max<std::size_t>(2, 2 * len - 1));
  return fft_convolve(input, len, d, plan_contraction(dims).variant);
}

SsmStreamState make_ssm_state(const DiscreteSsm& d) {
  SsmStreamState st;
  st.x.assign(d.h, cplx{0.0, 0.0});
  return st;
}

std::vector<double> step_recurrent(SsmStreamState& state, const DiscreteSsm& d,
                                   std::span<const double> u) {
  if (u.size() != std::size_t(d.n)) throw ShapeError("step_recurrent: input size != n");
  if (state.x.size() != std::size_t(d.h)) throw ShapeError("step_recurrent: state size != h");
  std::vector<double> y(d.m, 0.0);
  for (int s = 0; s < d.h; ++s) {
    double proj = 0.0;
    const double* brow = &d.b[std::size_t(s) * d.n];
    for (int i = 0; i < d.n; ++i) proj += brow[i] * u[i];
    state.x[s] = state.x[s] * d.a[s] + d.zoh[s] * proj;
    const double xr = state.x[s].real();
    for (int j = 0; j < d.m; ++j) y[j] += d.c[std::size_t(j) * d.h + s] * xr;
  }
  return y;
}

std::vector<double> run_recurrent(SsmStreamState& state, const DiscreteSsm& d,
                                  std::span<const double> input, std::size_t len) {
  check_input(input, len, d);
  std::vector<double> out(std::size_t(d.m) * len);
  std::vector<double> u(d.n);
  for (std::size_t t = 0; t < len; ++t) {
    for (int i = 0; i < d.n; ++i) u[i] = input[std::size_t(i) * len + t];
    const std::vector<double> y = step_recurrent(state, d, u);
    for (int j = 0; j < d.m; ++j) out[std::size_t(j) * len + t] = y[j];
  }
  return out;
}

}  // namespace attenuate
