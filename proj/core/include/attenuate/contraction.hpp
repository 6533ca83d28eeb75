#pragma once

#include <cstdint>

#include "attenuate/common.hpp"

namespace attenuate {

/// Sizes of the five dimensions of the frequency-domain layer contraction
/// y[b,j,f] = x[b,i,f] * B[n,i] * K[n,f] * C[j,n].
struct ContractionDims {
  std::uint64_t batch = 1;    // B
  std::uint64_t in_ch = 1;    // I
  std::uint64_t out_ch = 1;   // J
  std::uint64_t states = 1;   // N
  std::uint64_t modes = 1;    // F
};

enum class ContractionVariant {
  kInputProjectFirst,  // project input into states, convolve, project out
  kKernelFirst,        // materialize the full m x n kernel spectrum, then convolve
};

struct ContractionCosts {
  std::uint64_t input_project_first = 0;  // B*N*I*F + B*N*F + B*J*N*F
  std::uint64_t kernel_first = 0;         // J*N*I + J*N*I*F + B*J*I*F
};

struct ContractionOrder {
  ContractionVariant variant = ContractionVariant::kInputProjectFirst;
  std::uint64_t cost = 0;  // exact formula value for the chosen variant
};

/// Exact multiply-accumulate counts of the two orders. Throws OverflowError
/// if either exceeds the 64-bit range.
ContractionCosts contraction_costs(const ContractionDims& d);

/// Chooses input-project-first iff 1/B + 1/N >= 1/I + 1/J (exact integer
/// comparison; ties go to input-project-first, which avoids materializing
/// the m x n x F kernel).
ContractionOrder plan_contraction(const ContractionDims& d);

const char* to_string(ContractionVariant v);

}  // namespace attenuate
