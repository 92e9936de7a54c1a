#include "fvs/dibr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fvs {

namespace {

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

std::uint8_t clamp_u8(int x) { return static_cast<std::uint8_t>(std::clamp(x, 0, 255)); }

void check_same_shape(const FramePlane& a, const FramePlane& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument(std::string(what) + ": plane dimensions differ");
  }
}

int mb_of(const FramePlane& plane, int i, int j) { return (i / kMbSize) * plane.mb_cols() + j / kMbSize; }

}  // namespace

void SynthesisParams::validate() const {
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("SynthesisParams: v must lie in [0,1]");
  if (!(eta > 0.0)) throw std::invalid_argument("SynthesisParams: eta must be positive");
  if (!(c > 0.0)) throw std::invalid_argument("SynthesisParams: c must be positive");
}

double warp_scale(const SynthesisParams& params, ViewId source) {
  return source == ViewId::kLeft ? params.v * params.eta : (1.0 - params.v) * params.eta;
}

Grid<int> forward_warp(const FramePlane& disparity, ViewId source, double scale) {
  const int h = disparity.height();
  const int w = disparity.width();
  Grid<int> out(h, w, kNoSource);
  const double sign = source == ViewId::kLeft ? -1.0 : 1.0;
  for (int i = 0; i < h; ++i) {
    auto src_row = disparity.row(i);
    auto dst_row = out.row(i);
    for (int j = 0; j < w; ++j) {
      const int target = round_half_up(j + sign * src_row[j] * scale);
      if (target < 0 || target >= w) continue;
      const int current = dst_row[target];
      if (current == kNoSource || src_row[j] > src_row[current]) dst_row[target] = j;
    }
  }
  return out;
}

CorrespondenceMap build_correspondence(const FramePlane& left_disparity, const FramePlane& right_disparity,
                                       const SynthesisParams& params) {
  params.validate();
  check_same_shape(left_disparity, right_disparity, "build_correspondence");
  return {forward_warp(left_disparity, ViewId::kLeft, warp_scale(params, ViewId::kLeft)),
          forward_warp(right_disparity, ViewId::kRight, warp_scale(params, ViewId::kRight))};
}

namespace {

SynthesisResult blank_result(const FramePlane& like) {
  return {FramePlane(like.width(), like.height()), Grid<std::uint8_t>(like.height(), like.width(), 0),
          FramePlane(like.width(), like.height())};
}

// Fills single-source and hole pixels; returns true when both sources exist.
bool place_single(const CorrespondenceMap& corr, const StereoPlanes& views, int i, int j, SynthesisResult& out) {
  const int jl = corr.left.at(i, j);
  const int jr = corr.right.at(i, j);
  if (jl != kNoSource && jr != kNoSource) {
    out.disparity.at(i, j) = std::max(views.left_disparity.at(i, jl), views.right_disparity.at(i, jr));
    return true;
  }
  if (jl != kNoSource) {
    out.image.at(i, j) = views.left_texture.at(i, jl);
    out.disparity.at(i, j) = views.left_disparity.at(i, jl);
  } else if (jr != kNoSource) {
    out.image.at(i, j) = views.right_texture.at(i, jr);
    out.disparity.at(i, j) = views.right_disparity.at(i, jr);
  } else {
    out.holes.at(i, j) = 1;
  }
  return false;
}

std::uint8_t standard_pixel(int left, int right, double v) {
  return clamp_u8(round_half_up((1.0 - v) * left + v * right));
}

}  // namespace

SynthesisResult blend_standard(const CorrespondenceMap& corr, const StereoPlanes& views, double v) {
  check_same_shape(views.left_texture, views.right_texture, "blend_standard");
  SynthesisResult out = blank_result(views.left_texture);
  for (int i = 0; i < out.image.height(); ++i) {
    for (int j = 0; j < out.image.width(); ++j) {
      if (!place_single(corr, views, i, j, out)) continue;
      out.image.at(i, j) =
          standard_pixel(views.left_texture.at(i, corr.left.at(i, j)), views.right_texture.at(i, corr.right.at(i, j)), v);
    }
  }
  return out;
}

double worst_case_distortion(std::span<const std::uint8_t> row, std::span<const double> column_error, int j,
                             int radius) {
  const int w = static_cast<int>(row.size());
  const int lo = std::max(0, j - radius);
  const int hi = std::min(w - 1, j + radius);
  const int centre = row[static_cast<std::size_t>(j)];
  double worst = 0.0;
  for (int l = lo; l <= hi; ++l) {
    const double d = column_error[static_cast<std::size_t>(l)] + std::abs(int{row[static_cast<std::size_t>(l)]} - centre);
    worst = std::max(worst, d);
  }
  return worst;
}

double worst_case_distortion(int i, int j, const FramePlane& texture, const ViewErrors& errors, double scale) {
  const int mb = mb_of(texture, i, j);
  const double eps = errors.disparity.empty() ? 0.0 : errors.disparity[static_cast<std::size_t>(mb)];
  const int radius = static_cast<int>(std::ceil(eps * scale));
  const int lo = std::max(0, j - radius);
  const int hi = std::min(texture.width() - 1, j + radius);
  const int centre = texture.at(i, j);
  const int mb_row = (i / kMbSize) * texture.mb_cols();
  double worst = 0.0;
  for (int l = lo; l <= hi; ++l) {
    const double e = errors.texture.empty() ? 0.0 : errors.texture[static_cast<std::size_t>(mb_row + l / kMbSize)];
    worst = std::max(worst, e + std::abs(int{texture.at(i, l)} - centre));
  }
  return worst;
}

ReliabilityWeights reliability_weights(double d_left, double d_right, double c) {
  if (d_left < 0.0 || d_right < 0.0) throw std::invalid_argument("reliability_weights: negative distortion");
  if (!(c > 0.0)) throw std::invalid_argument("reliability_weights: c must be positive");
  const double denom = d_left + d_right + c;
  const double raw_left = (d_right + c) / denom;
  const double raw_right = (d_left + c) / denom;
  const double total = raw_left + raw_right;
  return {raw_left / total, raw_right / total};
}

ReliabilityMap build_reliability(const CorrespondenceMap& corr, const StereoPlanes& views,
                                 const ViewErrors& left_errors, const ViewErrors& right_errors,
                                 const SynthesisParams& params) {
  params.validate();
  const int h = views.left_texture.height();
  const int w = views.left_texture.width();
  ReliabilityMap map{Grid<double>(h, w), Grid<double>(h, w), Grid<double>(h, w), Grid<double>(h, w)};
  const double left_scale = warp_scale(params, ViewId::kLeft);
  const double right_scale = warp_scale(params, ViewId::kRight);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!corr.both(i, j)) continue;
      const double dl = worst_case_distortion(i, corr.left.at(i, j), views.left_texture, left_errors, left_scale);
      const double dr = worst_case_distortion(i, corr.right.at(i, j), views.right_texture, right_errors, right_scale);
      const ReliabilityWeights r = reliability_weights(dl, dr, params.c);
      map.d_left.at(i, j) = dl;
      map.d_right.at(i, j) = dr;
      map.r_left.at(i, j) = r.left;
      map.r_right.at(i, j) = r.right;
    }
  }
  return map;
}

SynthesisResult blend_adaptive(const CorrespondenceMap& corr, const StereoPlanes& views,
                               const ReliabilityMap& reliability, double v) {
  check_same_shape(views.left_texture, views.right_texture, "blend_adaptive");
  SynthesisResult out = blank_result(views.left_texture);
  for (int i = 0; i < out.image.height(); ++i) {
    for (int j = 0; j < out.image.width(); ++j) {
      if (!place_single(corr, views, i, j, out)) continue;
      const int xl = views.left_texture.at(i, corr.left.at(i, j));
      const int xr = views.right_texture.at(i, corr.right.at(i, j));
      if (reliability.d_left.at(i, j) == reliability.d_right.at(i, j)) {
        out.image.at(i, j) = standard_pixel(xl, xr, v);
        continue;
      }
      const double wl = (1.0 - v) * reliability.r_left.at(i, j);
      const double wr = v * reliability.r_right.at(i, j);
      out.image.at(i, j) = clamp_u8(round_half_up((wl * xl + wr * xr) / (wl + wr)));
    }
  }
  return out;
}

FramePlane fill_holes(const FramePlane& image, const Grid<std::uint8_t>& holes, const FramePlane& disparity) {
  FramePlane out = image;
  const int w = image.width();
  for (int i = 0; i < image.height(); ++i) {
    int j = 0;
    while (j < w) {
      if (!holes.at(i, j)) {
        ++j;
        continue;
      }
      int end = j;
      while (end < w && holes.at(i, end)) ++end;
      const int before = j - 1;  // nearest source on the left, or -1
      const int after = end;     // nearest source on the right, or w
      int from = -1;
      if (before >= 0 && after < w) {
        from = disparity.at(i, after) < disparity.at(i, before) ? after : before;
      } else if (before >= 0) {
        from = before;
      } else if (after < w) {
        from = after;
      }
      const std::uint8_t value = from < 0 ? std::uint8_t{128} : image.at(i, from);
      for (int k = j; k < end; ++k) out.at(i, k) = value;
      j = end;
    }
  }
  return out;
}

FramePlane synthesize(const StereoPlanes& views, const SynthesisParams& params, const ViewErrors& left_errors,
                      const ViewErrors& right_errors) {
  const CorrespondenceMap corr = build_correspondence(views.left_disparity, views.right_disparity, params);
  SynthesisResult blended;
  if (params.mode == BlendMode::kAdaptive) {
    blended = blend_adaptive(corr, views, build_reliability(corr, views, left_errors, right_errors, params), params.v);
  } else {
    blended = blend_standard(corr, views, params.v);
  }
  return fill_holes(blended.image, blended.holes, blended.disparity);
}

void save_reliability_pgm(const ReliabilityMap& map, const std::filesystem::path& path) {
  const int h = map.r_left.height();
  const int w = map.r_left.width();
  FramePlane plane(w, h);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) plane.at(i, j) = clamp_u8(round_half_up(map.r_left.at(i, j) * 255.0));
  }
  save_plane(plane, path);
}

}  // namespace fvs
