#include "attenuate/contraction.hpp"

#include <limits>

namespace attenuate {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("contraction cost overflows 64-bit range");
  return r;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw OverflowError("contraction cost overflows 64-bit range");
  return r;
}

void validate(const ContractionDims& d) {
  if (d.batch < 1 || d.in_ch < 1 || d.out_ch < 1 || d.states < 1 || d.modes < 1) {
    throw DimensionError("contraction dims must all be >= 1");
  }
}

}  // namespace

ContractionCosts contraction_costs(const ContractionDims& d) {
  validate(d);
  const std::uint64_t B = d.batch, I = d.in_ch, J = d.out_ch, N = d.states, F = d.modes;
  ContractionCosts c;
  c.input_project_first = checked_add(
      checked_add(checked_mul(checked_mul(B, N), checked_mul(I, F)), checked_mul(checked_mul(B, N), F)),
      checked_mul(checked_mul(B, J), checked_mul(N, F)));
  c.kernel_first = checked_add(
      checked_add(checked_mul(checked_mul(J, N), I), checked_mul(checked_mul(J, N), checked_mul(I, F))),
      checked_mul(checked_mul(B, J), checked_mul(I, F)));
  return c;
}

ContractionOrder plan_contraction(const ContractionDims& d) {
  validate(d);
  // 1/B + 1/N >= 1/I + 1/J  <=>  (B+N)*I*J >= (I+J)*B*N, exact in 128 bits.
  const unsigned __int128 lhs =
      (unsigned __int128)(d.batch + d.states) * d.in_ch * d.out_ch;
  const unsigned __int128 rhs =
      (unsigned __int128)(d.in_ch + d.out_ch) * d.batch * d.states;
  ContractionOrder order;
  order.variant = lhs >= rhs ? ContractionVariant::kInputProjectFirst : ContractionVariant::kKernelFirst;
  // Report the exact cost of the chosen order; saturate rather than throw so
  // the decision is always available.
  try {
    const ContractionCosts costs = contraction_costs(d);
    order.cost = order.variant == ContractionVariant::kInputProjectFirst ? costs.input_project_first
                                                                         : costs.kernel_first;
  } catch (const OverflowError&) {
    order.cost = std::numeric_limits<std::uint64_t>::max();
  }
  return order;
}

const char* to_string(ContractionVariant v) {
  return v == ContractionVariant::kInputProjectFirst ? "input-project-first" : "kernel-first";
}

}  // namespace attenuate
