#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "fvs/scene_io.hpp"

namespace fvs {

struct SensitivityParams {
  double threshold = 5.0;  // T, mean absolute intensity
  int max_deviation = 16;  // largest disparity error examined, in levels

  void validate() const;
};

// Texture planes and disparity of the view being analysed plus the opposing
// texture. For the left view a pixel maps to column j - (Y+eps)*eta of the
// right view; for the right view to j + (Y+eps)*eta of the left view.
struct SensitivityInput {
  const FramePlane& own_texture;
  const FramePlane& own_disparity;
  const FramePlane& other_texture;
  ViewId view = ViewId::kLeft;
  double eta = 1.0;
};

// Mismatch of one pixel against its (shifted) correspondence; the mapped
// column is clamped to the frame.
double pixel_mismatch(const SensitivityInput& in, int i, int j, int eps);

// Mean over the macroblock of pixel_mismatch, for eps = -max..max.
std::vector<double> distortion_profile(const SensitivityInput& in, int mb, int max_deviation);

// Per-pixel profile for eps = -max..max (index eps + max).
std::vector<double> pixel_profile(const SensitivityInput& in, int i, int j, int max_deviation);

// Parabola fitted through the nearest threshold crossings on each side of
// eps = 0; the sharper one is kept. A side without a crossing contributes
// 2T/max^2; no crossing on either side gives 0.
double pixel_curvature(std::span<const double> profile, double threshold);

double block_curvature(std::span<const double> pixel_curvatures);

// Quadratic penalty 0.5 * a * eps^2.
inline double g_eval(double curvature, double eps) { return 0.5 * curvature * eps * eps; }

// One curvature per macroblock, raster order.
std::vector<double> curvature_map(const SensitivityInput& in, const SensitivityParams& params);

// Curvatures scaled so that 2T maps to 255, one 16x16 tile per macroblock.
void save_curvature_pgm(std::span<const double> curvatures, int width, int height, double threshold,
                        const std::filesystem::path& path);

}  // namespace fvs
