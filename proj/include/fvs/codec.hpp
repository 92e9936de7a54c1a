#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fvs/channel.hpp"
#include "fvs/scene_io.hpp"
#include "fvs/transform.hpp"

namespace fvs {

enum class Mode : std::uint8_t { kIntra = 0, kInter = 1, kSkip = 2 };

const char* mode_name(Mode m);

struct MotionVector {
  int dx = 0;
  int dy = 0;
  int magnitude() const { return (dx < 0 ? -dx : dx) + (dy < 0 ? -dy : dy); }
  bool operator==(const MotionVector&) const = default;
};

// Per-macroblock coding choice. For INTER the reference is an absolute frame
// index; SKIP always predicts from t-1 with a zero vector and no residual.
struct RpsDecision {
  Mode mode = Mode::kIntra;
  int ref_frame = -1;
  MotionVector mv;

  static RpsDecision intra() { return {}; }
  static RpsDecision skip(int t) { return {Mode::kSkip, t - 1, {}}; }
  static RpsDecision inter(int ref, MotionVector mv) { return {Mode::kInter, ref, mv}; }

  bool operator==(const RpsDecision&) const = default;
};

struct CodecParams {
  int search_range = 16;  // S: |dx|, |dy| <= S
  int ref_window = 8;     // W: t - ref <= W
  int qstep = 10;
};

// Encoder- or decoder-side reconstructions reachable from frame `current`.
class ReferenceWindow {
 public:
  explicit ReferenceWindow(int current) : current_(current) {}

  void add(int frame, const FramePlane* plane);
  const FramePlane* find(int frame) const;
  int current() const { return current_; }
  bool empty() const { return frames_.empty(); }
  // Frames ordered nearest first.
  const std::vector<std::pair<int, const FramePlane*>>& frames() const { return frames_; }

 private:
  int current_;
  std::vector<std::pair<int, const FramePlane*>> frames_;
};

struct Candidate {
  RpsDecision decision;
  double distortion = 0.0;  // mean absolute error of the reconstruction vs the source block
  int bits = 0;
  Coefficients residual{};
  Block16 recon{};
};

// Rate model: 2 bits of mode, unary reference distance, signed exp-Golomb
// motion components and the rounded-up empirical entropy of the residual.
int rate_model(const RpsDecision& decision, const Coefficients& residual, int t);

// Sum of absolute differences of the 16x16 block at (top,left) of `src`
// against the block at (top+dy, left+dx) of `ref`.
int block_sad(const FramePlane& src, int top, int left, const FramePlane& ref, int dy, int dx);

struct MotionSearchResult {
  MotionVector mv;
  int sad = 0;
};

// Exhaustive integer-pel search. Ties go to the smaller |mv|, then raster
// order of (dy, dx).
MotionSearchResult full_search(const FramePlane& src, int mb, const FramePlane& ref, int search_range);

// DC predictor for INTRA: rounded mean of the reconstructed left column and
// top row bordering `mb`, taken only from neighbours that are INTRA coded and
// in the same slice. 128 when no such neighbour exists.
int intra_dc_predictor(const FramePlane& recon, int mb, std::span<const Mode> modes,
                       const std::vector<MbRange>& slices);

// SKIP plus, for each reference frame nearest first, the zero vector and the
// SAD-minimising vector when it differs. Canonical order doubles as the
// deterministic tie-break order.
std::vector<Candidate> inter_candidates(const FramePlane& source, int mb, const ReferenceWindow& refs,
                                        const CodecParams& params);

Candidate intra_candidate(const Block16& source, int dc_predictor, int qstep);

// inter_candidates followed by the INTRA candidate.
std::vector<Candidate> candidate_search(const FramePlane& source, int mb, const ReferenceWindow& refs,
                                        const CodecParams& params, int dc_predictor);

// Throws when the referenced frame is outside the window or the vector
// points outside the frame.
Block16 prediction_block(const RpsDecision& decision, int mb, int width, int height, const ReferenceWindow& refs,
                         int dc_predictor);

Block16 reconstruct_block(const RpsDecision& decision, const Coefficients& residual, int mb, int width,
                          int height, const ReferenceWindow& refs, int dc_predictor, int qstep);

// Temporal-copy concealment; mid-grey when there is no previous frame.
Block16 conceal_block(int mb, const FramePlane* previous_reconstruction);

struct MbRecord {
  RpsDecision decision;
  Coefficients residual{};
  int bits = 0;
};

struct EncodedPlane {
  int frame = 0;
  int view = 0;
  Component component = Component::kTexture;
  std::vector<MbRecord> mbs;

  int total_bits() const;
};

// Decodes one plane. Lost macroblocks (`lost[mb] != 0`) are concealed from
// `previous`; received ones are predicted from `refs`.
FramePlane decode_plane(const EncodedPlane& encoded, int width, int height, const std::vector<MbRange>& slices,
                        std::span<const std::uint8_t> lost, const ReferenceWindow& refs, const FramePlane* previous,
                        int qstep);

// Versioned container: magic "FVSB", version, dims, qstep, plane count, then
// per plane (frame, view, component, mb count) and per macroblock (mode,
// ref, mvx, mvy, bits, nonzero count, (position, value) pairs).
struct BitstreamHeader {
  int width = 0;
  int height = 0;
  int qstep = 0;
};

inline constexpr std::uint32_t kBitstreamVersion = 1;

void write_bitstream(const std::filesystem::path& path, const BitstreamHeader& header,
                     std::span<const EncodedPlane> planes);
std::vector<EncodedPlane> read_bitstream(const std::filesystem::path& path, BitstreamHeader& header);

}  // namespace fvs
