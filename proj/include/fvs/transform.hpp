#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "fvs/scene_io.hpp"

namespace fvs {

// Quantized coefficients of a 16x16 residual: sixteen 4x4 transform blocks
// in raster order, each stored row-major.
using Coefficients = std::array<std::int16_t, kMbPixels>;
using Residual = std::array<std::int16_t, kMbPixels>;

// Orthonormal 4x4 DCT-II on every sub-block, then uniform scalar
// quantization with step `qstep` (round half away from zero).
Coefficients forward_quantize(const Residual& residual, int qstep);

// Dequantization and inverse transform, rounded to integers.
Residual dequantize_inverse(const Coefficients& coeffs, int qstep);

bool all_zero(const Coefficients& coeffs);

// Length in bits of the signed exp-Golomb code for `value`.
int signed_exp_golomb_length(int value);

// Empirical zero-order entropy of the coefficient symbols, in bits for the
// whole block (not per symbol), before rounding.
double empirical_entropy_bits(std::span<const std::int16_t> symbols);

// Residual cost used by the rate model: the empirical entropy rounded up.
int residual_bits(const Coefficients& coeffs);

}  // namespace fvs
