#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace fvs {

inline constexpr int kMbSize = 16;
inline constexpr int kMbPixels = kMbSize * kMbSize;

// Dense row-major 2D array. Coordinates are (row i, column j).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {
    if (height < 0 || width < 0) throw std::invalid_argument("Grid: negative dimensions");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  T& at(int i, int j) { return data_[index(i, j)]; }
  const T& at(int i, int j) const { return data_[index(i, j)]; }

  std::span<T> row(int i) { return {data_.data() + index(i, 0), static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int i) const {
    return {data_.data() + index(i, 0), static_cast<std::size_t>(width_)};
  }

  std::span<T> samples() { return data_; }
  std::span<const T> samples() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(j);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

// An 8-bit luma (texture) or disparity plane. Dimensions are positive
// multiples of the 16x16 macroblock size.
class FramePlane : public Grid<std::uint8_t> {
 public:
  FramePlane() = default;
  FramePlane(int width, int height, std::uint8_t fill = 0);

  int mb_cols() const { return width() / kMbSize; }
  int mb_rows() const { return height() / kMbSize; }
  int mb_count() const { return mb_cols() * mb_rows(); }

  bool operator==(const FramePlane&) const = default;
};

// Raster-ordered 16x16 pixel block.
using Block16 = std::array<std::uint8_t, kMbPixels>;

// Top-left pixel position of macroblock `mb` (raster order).
struct MbOrigin {
  int row;
  int col;
};
MbOrigin mb_origin(const FramePlane& plane, int mb);

Block16 extract_block(const FramePlane& plane, int top, int left);
void store_block(FramePlane& plane, int top, int left, const Block16& block);

// Mean absolute difference between two blocks.
double block_mad(const Block16& a, const Block16& b);

enum class ViewId : int { kLeft = 0, kRight = 1 };

struct ViewFrame {
  ViewId view = ViewId::kLeft;
  int frame_index = 0;
  FramePlane texture;
  FramePlane disparity;

  // Throws if texture and disparity dimensions differ.
  void validate() const;
};

inline constexpr double kDefaultPsnrCap = 99.0;

double mse(const FramePlane& a, const FramePlane& b);
double psnr(const FramePlane& a, const FramePlane& b, double cap_db = kDefaultPsnrCap);
double mean_abs_error(const FramePlane& a, const FramePlane& b);

struct QualityReport {
  std::vector<double> psnr_db;
  std::vector<double> mae;
  double average_psnr_db = 0.0;
  double average_mae = 0.0;
};

QualityReport evaluate_sequence(std::span<const FramePlane> test, std::span<const FramePlane> reference,
                                double cap_db = kDefaultPsnrCap);

enum class PlaneFormat { kPgm, kYuv420 };

struct PlaneFileInfo {
  PlaneFormat format = PlaneFormat::kPgm;
  // Required for raw YUV; ignored for PGM, whose header carries the size.
  int width = 0;
  int height = 0;
  // Frame to read from a multi-frame raw YUV file.
  int frame_index = 0;
};

FramePlane load_plane(const std::filesystem::path& path, const PlaneFileInfo& info = {});
void save_plane(const FramePlane& plane, const std::filesystem::path& path,
                PlaneFormat format = PlaneFormat::kPgm);

}  // namespace fvs
