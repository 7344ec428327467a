#pragma once

#include <cstdint>

#include "qfeq/model.hpp"

namespace qfeq {

/// Operation counts of the weight path of the integer forward pass. Per-output
/// rescaling by the stored full-precision scales is not counted.
struct IntOpCounter {
  std::uint64_t multiplies = 0;
  std::uint64_t shifts = 0;
  std::uint64_t adds = 0;
};

/// Fixed-point forward pass of a quantized model with complete activation books.
///
/// Inputs and activations become uniform indices r_x (x = a_x + s_x r_x).
/// Uniform weights w = a_w + s_w r_w accumulate sum(r_w r_x) in 32-bit
/// integers; PoT/APoT weights w = scale * m + shift accumulate sum(m r_x) 2^F
/// with shifts and adds only. Scales are applied once per output. Any 32-bit
/// overflow raises an overflow error.
Output forward_quantized_int(const InputWindow& window, const ModelParams& params, IntOpCounter* counter = nullptr);

}  // namespace qfeq
