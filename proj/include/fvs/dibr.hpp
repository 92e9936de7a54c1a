#pragma once

#include <filesystem>
#include <span>

#include "fvs/scene_io.hpp"

namespace fvs {

enum class BlendMode { kStandard, kAdaptive };

struct SynthesisParams {
  double v = 0.5;    // virtual view position, 0 = left, 1 = right
  double eta = 1.0;  // pixels of shift per disparity level at full baseline
  double c = 1.0;    // reliability regulariser
  BlendMode mode = BlendMode::kStandard;

  void validate() const;
};

// Horizontal shift per disparity level for pixels of `source` when rendering
// at params.v: v*eta for the left view, (1-v)*eta for the right.
double warp_scale(const SynthesisParams& params, ViewId source);

inline constexpr int kNoSource = -1;

// Integer-pel forward warp. Left pixels land at round(j - Y*scale), right
// pixels at round(j + Y*scale). Each output entry is the winning source
// column or kNoSource; larger disparity wins, ties keep the smaller column.
Grid<int> forward_warp(const FramePlane& disparity, ViewId source, double scale);

struct CorrespondenceMap {
  Grid<int> left;   // source column in the left view, or kNoSource
  Grid<int> right;  // source column in the right view, or kNoSource

  bool hole(int i, int j) const { return left.at(i, j) == kNoSource && right.at(i, j) == kNoSource; }
  bool both(int i, int j) const { return left.at(i, j) != kNoSource && right.at(i, j) != kNoSource; }
};

CorrespondenceMap build_correspondence(const FramePlane& left_disparity, const FramePlane& right_disparity,
                                       const SynthesisParams& params);

struct SynthesisResult {
  FramePlane image;
  Grid<std::uint8_t> holes;  // 1 where no source pixel landed
  FramePlane disparity;      // disparity of the contributing source pixels; 0 in holes
};

struct StereoPlanes {
  const FramePlane& left_texture;
  const FramePlane& left_disparity;
  const FramePlane& right_texture;
  const FramePlane& right_disparity;
};

// (1-v)*X0 + v*X1 rounded half up where both exist, the single source where
// one exists, a hole otherwise.
SynthesisResult blend_standard(const CorrespondenceMap& corr, const StereoPlanes& views, double v);

// Per-macroblock tracked errors of one view at the current instant.
struct ViewErrors {
  std::span<const double> texture;    // e per MB
  std::span<const double> disparity;  // eps per MB
};

// max over l in [j-r, j+r] of e(b(i,l)) + |X(i,l) - X(i,j)| with
// r = ceil(eps(b(i,j)) * scale), clamped to the frame.
double worst_case_distortion(int i, int j, const FramePlane& texture, const ViewErrors& errors, double scale);

// Row-span form used by the tests: block errors are given per column.
double worst_case_distortion(std::span<const std::uint8_t> row, std::span<const double> column_error, int j,
                             int radius);

struct ReliabilityWeights {
  double left = 0.5;
  double right = 0.5;
};

ReliabilityWeights reliability_weights(double d_left, double d_right, double c);

struct ReliabilityMap {
  Grid<double> d_left;
  Grid<double> d_right;
  Grid<double> r_left;
  Grid<double> r_right;
};

// Evaluated on every pixel with both correspondences; zero elsewhere.
ReliabilityMap build_reliability(const CorrespondenceMap& corr, const StereoPlanes& views,
                                 const ViewErrors& left_errors, const ViewErrors& right_errors,
                                 const SynthesisParams& params);

// Blend weights (1-v)*r0 and v*r1, renormalised. Pixels whose worst-case
// distortions are equal take the standard path, so zero errors reproduce
// blend_standard exactly.
SynthesisResult blend_adaptive(const CorrespondenceMap& corr, const StereoPlanes& views,
                               const ReliabilityMap& reliability, double v);

// Each hole takes the nearest non-hole pixel on the side with the smaller
// disparity (the background); at frame edges the only available side; rows
// without any source pixel become 128.
FramePlane fill_holes(const FramePlane& image, const Grid<std::uint8_t>& holes, const FramePlane& disparity);

// Complete synthesis. `left_errors`/`right_errors` are only read in
// adaptive mode.
FramePlane synthesize(const StereoPlanes& views, const SynthesisParams& params, const ViewErrors& left_errors = {},
                      const ViewErrors& right_errors = {});

// r0 scaled to 0..255; pixels without two correspondences are written as 0.
void save_reliability_pgm(const ReliabilityMap& map, const std::filesystem::path& path);

}  // namespace fvs
