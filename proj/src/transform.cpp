#include "fvs/transform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fvs {

namespace {

struct DctMatrix {
  double m[4][4];
  DctMatrix() {
    for (int k = 0; k < 4; ++k) {
      const double scale = k == 0 ? 0.5 : std::sqrt(0.5);
      for (int n = 0; n < 4; ++n) m[k][n] = scale * std::cos((2 * n + 1) * k * std::numbers::pi / 8.0);
    }
  }
};

const DctMatrix& dct() {
  static const DctMatrix matrix;
  return matrix;
}

int round_half_away(double x) { return static_cast<int>(std::lround(x)); }

}  // namespace

Coefficients forward_quantize(const Residual& residual, int qstep) {
  if (qstep < 1) throw std::invalid_argument("forward_quantize: qstep must be >= 1");
  const auto& a = dct().m;
  Coefficients out{};
  for (int by = 0; by < 4; ++by) {
    for (int bx = 0; bx < 4; ++bx) {
      double x[4][4];
      bool nonzero = false;
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
          x[r][c] = residual[(by * 4 + r) * kMbSize + bx * 4 + c];
          nonzero = nonzero || x[r][c] != 0.0;
        }
      }
      const int base = (by * 4 + bx) * 16;
      if (!nonzero) continue;
      double tmp[4][4];
      for (int k = 0; k < 4; ++k) {
        for (int c = 0; c < 4; ++c) {
          double s = 0.0;
          for (int n = 0; n < 4; ++n) s += a[k][n] * x[n][c];
          tmp[k][c] = s;
        }
      }
      for (int k = 0; k < 4; ++k) {
        for (int l = 0; l < 4; ++l) {
          double s = 0.0;
          for (int n = 0; n < 4; ++n) s += tmp[k][n] * a[l][n];
          out[base + k * 4 + l] = static_cast<std::int16_t>(round_half_away(s / qstep));
        }
      }
    }
  }
  return out;
}

Residual dequantize_inverse(const Coefficients& coeffs, int qstep) {
  if (qstep < 1) throw std::invalid_argument("dequantize_inverse: qstep must be >= 1");
  const auto& a = dct().m;
  Residual out{};
  for (int blk = 0; blk < 16; ++blk) {
    const int base = blk * 16;
    bool nonzero = false;
    for (int k = 0; k < 16; ++k) nonzero = nonzero || coeffs[base + k] != 0;
    if (!nonzero) continue;
    double tmp[4][4];
    for (int n = 0; n < 4; ++n) {
      for (int l = 0; l < 4; ++l) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += a[k][n] * (coeffs[base + k * 4 + l] * static_cast<double>(qstep));
        tmp[n][l] = s;
      }
    }
    const int by = blk / 4;
    const int bx = blk % 4;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        double s = 0.0;
        for (int l = 0; l < 4; ++l) s += tmp[r][l] * a[l][c];
        out[(by * 4 + r) * kMbSize + bx * 4 + c] = static_cast<std::int16_t>(round_half_away(s));
      }
    }
  }
  return out;
}

bool all_zero(const Coefficients& coeffs) {
  return std::all_of(coeffs.begin(), coeffs.end(), [](std::int16_t v) { return v == 0; });
}

int signed_exp_golomb_length(int value) {
  const unsigned code = value > 0 ? 2u * static_cast<unsigned>(value) - 1u : 2u * static_cast<unsigned>(-value);
  int bits = 0;
  for (unsigned v = code + 1; v > 1; v >>= 1) ++bits;
  return 2 * bits + 1;
}

double empirical_entropy_bits(std::span<const std::int16_t> symbols) {
  if (symbols.empty()) return 0.0;
  std::vector<std::int16_t> sorted(symbols.begin(), symbols.end());
  std::sort(sorted.begin(), sorted.end());
  const double total = static_cast<double>(sorted.size());
  double bits = 0.0;
  std::size_t run_start = 0;
  for (std::size_t k = 1; k <= sorted.size(); ++k) {
    if (k == sorted.size() || sorted[k] != sorted[run_start]) {
      const double count = static_cast<double>(k - run_start);
      bits += count * std::log2(total / count);
      run_start = k;
    }
  }
  return bits;
}

int residual_bits(const Coefficients& coeffs) {
  if (all_zero(coeffs)) return 0;
  // The tolerance keeps exact integers (e.g. 256 bits for a 50/50 split)
  // from rounding up on the last ulp.
  return static_cast<int>(std::ceil(empirical_entropy_bits(coeffs) - 1e-9));
}

}  // namespace fvs
