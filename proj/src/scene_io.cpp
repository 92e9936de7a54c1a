#include "fvs/scene_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace fvs {

FramePlane::FramePlane(int width, int height, std::uint8_t fill) : Grid(height, width, fill) {
  if (width <= 0 || height <= 0 || width % kMbSize != 0 || height % kMbSize != 0) {
    std::ostringstream msg;
    msg << "FramePlane: dimensions " << width << "x" << height
        << " must be positive multiples of " << kMbSize;
    throw std::invalid_argument(msg.str());
  }
}

MbOrigin mb_origin(const FramePlane& plane, int mb) {
  return {(mb / plane.mb_cols()) * kMbSize, (mb % plane.mb_cols()) * kMbSize};
}

Block16 extract_block(const FramePlane& plane, int top, int left) {
  Block16 block{};
  for (int y = 0; y < kMbSize; ++y) {
    auto src = plane.row(top + y).subspan(static_cast<std::size_t>(left), kMbSize);
    std::copy(src.begin(), src.end(), block.begin() + y * kMbSize);
  }
  return block;
}

void store_block(FramePlane& plane, int top, int left, const Block16& block) {
  for (int y = 0; y < kMbSize; ++y) {
    auto dst = plane.row(top + y).subspan(static_cast<std::size_t>(left), kMbSize);
    std::copy(block.begin() + y * kMbSize, block.begin() + (y + 1) * kMbSize, dst.begin());
  }
}

double block_mad(const Block16& a, const Block16& b) {
  int sad = 0;
  for (int k = 0; k < kMbPixels; ++k) sad += std::abs(int{a[k]} - int{b[k]});
  return static_cast<double>(sad) / kMbPixels;
}

void ViewFrame::validate() const {
  if (texture.width() != disparity.width() || texture.height() != disparity.height()) {
    throw std::invalid_argument("ViewFrame: texture and disparity dimensions differ");
  }
}

namespace {

void require_same_size(const FramePlane& a, const FramePlane& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    std::ostringstream msg;
    msg << what << ": dimension mismatch " << a.width() << "x" << a.height() << " vs " << b.width()
        << "x" << b.height();
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

double mse(const FramePlane& a, const FramePlane& b) {
  require_same_size(a, b, "mse");
  auto sa = a.samples();
  auto sb = b.samples();
  std::uint64_t acc = 0;
  for (std::size_t k = 0; k < sa.size(); ++k) {
    const int d = int{sa[k]} - int{sb[k]};
    acc += static_cast<std::uint64_t>(d * d);
  }
  return static_cast<double>(acc) / static_cast<double>(sa.size());
}

double psnr(const FramePlane& a, const FramePlane& b, double cap_db) {
  const double err = mse(a, b);
  if (err == 0.0) return cap_db;
  return 10.0 * std::log10(255.0 * 255.0 / err);
}

double mean_abs_error(const FramePlane& a, const FramePlane& b) {
  require_same_size(a, b, "mean_abs_error");
  auto sa = a.samples();
  auto sb = b.samples();
  std::uint64_t acc = 0;
  for (std::size_t k = 0; k < sa.size(); ++k) acc += static_cast<std::uint64_t>(std::abs(int{sa[k]} - int{sb[k]}));
  return static_cast<double>(acc) / static_cast<double>(sa.size());
}

QualityReport evaluate_sequence(std::span<const FramePlane> test, std::span<const FramePlane> reference,
                                double cap_db) {
  if (test.size() != reference.size()) throw std::invalid_argument("evaluate_sequence: length mismatch");
  QualityReport report;
  for (std::size_t t = 0; t < test.size(); ++t) {
    report.psnr_db.push_back(psnr(test[t], reference[t], cap_db));
    report.mae.push_back(mean_abs_error(test[t], reference[t]));
  }
  if (!test.empty()) {
    double p = 0.0;
    double m = 0.0;
    for (std::size_t t = 0; t < test.size(); ++t) {
      p += report.psnr_db[t];
      m += report.mae[t];
    }
    report.average_psnr_db = p / static_cast<double>(test.size());
    report.average_mae = m / static_cast<double>(test.size());
  }
  return report;
}

// ---------------------------------------------------------------------------
// File I/O

namespace {

// Reads the next whitespace-delimited PGM header token, skipping '#' comments.
std::string next_pgm_token(std::istream& in) {
  std::string token;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(c);
  }
  return token;
}

int parse_header_int(const std::string& token, const std::filesystem::path& path, const char* field) {
  char* end = nullptr;
  const long value = std::strtol(token.c_str(), &end, 10);
  if (token.empty() || *end != '\0' || value <= 0) {
    throw std::runtime_error("load_plane: bad PGM " + std::string(field) + " '" + token + "' in " +
                             path.string());
  }
  return static_cast<int>(value);
}

FramePlane load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_plane: cannot open " + path.string());
  if (next_pgm_token(in) != "P5") throw std::runtime_error("load_plane: not a binary PGM (P5): " + path.string());
  const int width = parse_header_int(next_pgm_token(in), path, "width");
  const int height = parse_header_int(next_pgm_token(in), path, "height");
  const int maxval = parse_header_int(next_pgm_token(in), path, "maxval");
  if (maxval > 255) {
    throw std::runtime_error("load_plane: only 8-bit PGM supported (maxval " + std::to_string(maxval) +
                             ") in " + path.string());
  }
  FramePlane plane(width, height);
  auto samples = plane.samples();
  in.read(reinterpret_cast<char*>(samples.data()), static_cast<std::streamsize>(samples.size()));
  if (in.gcount() != static_cast<std::streamsize>(samples.size())) {
    throw std::runtime_error("load_plane: truncated PGM data in " + path.string());
  }
  return plane;
}

FramePlane load_yuv420(const std::filesystem::path& path, const PlaneFileInfo& info) {
  FramePlane plane(info.width, info.height);
  const auto luma = static_cast<std::uintmax_t>(info.width) * static_cast<std::uintmax_t>(info.height);
  const auto frame_bytes = luma + 2 * (luma / 4);
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec) throw std::runtime_error("load_plane: cannot stat " + path.string());
  if (info.frame_index < 0 || file_size < frame_bytes * static_cast<std::uintmax_t>(info.frame_index + 1)) {
    throw std::runtime_error("load_plane: raw YUV file " + path.string() + " too short for frame " +
                             std::to_string(info.frame_index) + " at " + std::to_string(info.width) + "x" +
                             std::to_string(info.height));
  }
  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(frame_bytes * static_cast<std::uintmax_t>(info.frame_index)));
  auto samples = plane.samples();
  in.read(reinterpret_cast<char*>(samples.data()), static_cast<std::streamsize>(samples.size()));
  if (in.gcount() != static_cast<std::streamsize>(samples.size())) {
    throw std::runtime_error("load_plane: truncated YUV data in " + path.string());
  }
  return plane;
}

}  // namespace

FramePlane load_plane(const std::filesystem::path& path, const PlaneFileInfo& info) {
  switch (info.format) {
    case PlaneFormat::kPgm:
      return load_pgm(path);
    case PlaneFormat::kYuv420:
      return load_yuv420(path, info);
  }
  throw std::invalid_argument("load_plane: unknown format");
}

void save_plane(const FramePlane& plane, const std::filesystem::path& path, PlaneFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_plane: cannot open " + path.string());
  auto samples = plane.samples();
  if (format == PlaneFormat::kPgm) {
    out << "P5\n" << plane.width() << " " << plane.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(samples.data()), static_cast<std::streamsize>(samples.size()));
  } else {
    out.write(reinterpret_cast<const char*>(samples.data()), static_cast<std::streamsize>(samples.size()));
    const std::vector<char> chroma(samples.size() / 2, static_cast<char>(128));
    out.write(chroma.data(), static_cast<std::streamsize>(chroma.size()));
  }
  if (!out) throw std::runtime_error("save_plane: write failed for " + path.string());
}

}  // namespace fvs
