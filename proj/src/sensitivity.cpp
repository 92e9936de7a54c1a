#include "fvs/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fvs {

void SensitivityParams::validate() const {
  if (!(threshold > 0.0)) throw std::invalid_argument("SensitivityParams: threshold must be positive");
  if (max_deviation < 1) throw std::invalid_argument("SensitivityParams: max_deviation must be >= 1");
}

double pixel_mismatch(const SensitivityInput& in, int i, int j, int eps) {
  const double shift = (in.own_disparity.at(i, j) + eps) * in.eta;
  const double mapped = in.view == ViewId::kLeft ? j - shift : j + shift;
  const int col = std::clamp(static_cast<int>(std::floor(mapped + 0.5)), 0, in.other_texture.width() - 1);
  return std::abs(int{in.own_texture.at(i, j)} - int{in.other_texture.at(i, col)});
}

std::vector<double> pixel_profile(const SensitivityInput& in, int i, int j, int max_deviation) {
  std::vector<double> out(static_cast<std::size_t>(2 * max_deviation + 1));
  for (int e = -max_deviation; e <= max_deviation; ++e) out[static_cast<std::size_t>(e + max_deviation)] = pixel_mismatch(in, i, j, e);
  return out;
}

std::vector<double> distortion_profile(const SensitivityInput& in, int mb, int max_deviation) {
  const auto [top, left] = mb_origin(in.own_texture, mb);
  std::vector<double> out(static_cast<std::size_t>(2 * max_deviation + 1), 0.0);
  for (int e = -max_deviation; e <= max_deviation; ++e) {
    double sum = 0.0;
    for (int y = 0; y < kMbSize; ++y) {
      for (int x = 0; x < kMbSize; ++x) sum += pixel_mismatch(in, top + y, left + x, e);
    }
    out[static_cast<std::size_t>(e + max_deviation)] = sum / kMbPixels;
  }
  return out;
}

double pixel_curvature(std::span<const double> profile, double threshold) {
  if (profile.size() % 2 == 0 || profile.size() < 3) throw std::invalid_argument("pixel_curvature: profile must be odd-sized, >= 3");
  const int max = static_cast<int>(profile.size() / 2);
  auto boundary = [&](int direction) {
    for (int e = 1; e <= max; ++e) {
      if (profile[static_cast<std::size_t>(max + direction * e)] >= threshold) return e;
    }
    return 0;
  };
  const int upper = boundary(1);
  const int lower = boundary(-1);
  if (upper == 0 && lower == 0) return 0.0;
  auto side = [&](int b) {
    const double d = b == 0 ? max : b;
    return 2.0 * threshold / (d * d);
  };
  return std::max(side(upper), side(lower));
}

double block_curvature(std::span<const double> pixel_curvatures) {
  if (pixel_curvatures.empty()) return 0.0;
  double sum = 0.0;
  for (double a : pixel_curvatures) sum += a;
  return sum / static_cast<double>(pixel_curvatures.size());
}

std::vector<double> curvature_map(const SensitivityInput& in, const SensitivityParams& params) {
  params.validate();
  const int count = in.own_texture.mb_count();
  std::vector<double> out(static_cast<std::size_t>(count));
  std::vector<double> profile(static_cast<std::size_t>(2 * params.max_deviation + 1));
  std::vector<double> pixels(kMbPixels);
  for (int mb = 0; mb < count; ++mb) {
    const auto [top, left] = mb_origin(in.own_texture, mb);
    for (int y = 0; y < kMbSize; ++y) {
      for (int x = 0; x < kMbSize; ++x) {
        for (int e = -params.max_deviation; e <= params.max_deviation; ++e) {
          profile[static_cast<std::size_t>(e + params.max_deviation)] = pixel_mismatch(in, top + y, left + x, e);
        }
        pixels[static_cast<std::size_t>(y * kMbSize + x)] = pixel_curvature(profile, params.threshold);
      }
    }
    out[static_cast<std::size_t>(mb)] = block_curvature(pixels);
  }
  return out;
}

void save_curvature_pgm(std::span<const double> curvatures, int width, int height, double threshold,
                        const std::filesystem::path& path) {
  FramePlane plane(width, height);
  if (static_cast<int>(curvatures.size()) != plane.mb_count()) throw std::invalid_argument("save_curvature_pgm: size mismatch");
  for (int mb = 0; mb < plane.mb_count(); ++mb) {
    const int level = std::clamp(static_cast<int>(std::floor(curvatures[static_cast<std::size_t>(mb)] / (2.0 * threshold) * 255.0 + 0.5)), 0, 255);
    Block16 tile;
    tile.fill(static_cast<std::uint8_t>(level));
    const auto [top, left] = mb_origin(plane, mb);
    store_block(plane, top, left, tile);
  }
  save_plane(plane, path);
}

}  // namespace fvs
