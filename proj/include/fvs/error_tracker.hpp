#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "fvs/codec.hpp"
#include "fvs/scene_io.hpp"

namespace fvs {

inline constexpr double kDefaultAttenuation = 0.9;

// Pixel overlap of a displaced 16x16 predictor with the macroblock grid.
// Pixel counts sum to 256.
struct PredictorOverlap {
  int mb = 0;
  int pixels = 0;
};

std::vector<PredictorOverlap> predictor_overlap(int mb, MotionVector mv, int mb_cols, int mb_rows);

// Per-frame, per-macroblock error values of one (view, component) stream.
class ErrorLattice {
 public:
  explicit ErrorLattice(int mb_count = 0) : mb_count_(mb_count) {}

  int mb_count() const { return mb_count_; }
  bool has(int t) const { return frames_.count(t) != 0; }
  // Throws std::out_of_range when frame t has not been tracked.
  const std::vector<double>& at(int t) const;
  void set(int t, std::vector<double> values);
  // Value of mb at t, or 0 before the first frame.
  double value_or_zero(int t, int mb) const;

 private:
  int mb_count_;
  std::map<int, std::vector<double>> frames_;
};

// Error when the block is received: 0 for INTRA, otherwise the attenuated
// overlap-weighted error of the predictor's source blocks. SKIP predicts
// from t-1 with a zero vector.
double e_plus(const RpsDecision& decision, int t, int mb, int mb_cols, int mb_rows, const ErrorLattice& lattice,
              double gamma);

// Error when the block is lost and concealed by temporal copy.
inline double e_minus(double previous_error, double delta) { return previous_error + delta; }

inline double expected_error(double p, double plus, double minus) { return p * plus + (1.0 - p) * minus; }

// One recursion step over a whole plane. `p[m]` is the delivery probability
// of macroblock m (exactly 0 or 1 at the decoder).
std::vector<double> track_plane(int t, std::span<const RpsDecision> decisions, std::span<const double> p,
                                std::span<const double> delta, const ErrorLattice& lattice, int mb_cols,
                                int mb_rows, double gamma);

// Mean absolute difference of co-located macroblocks.
double colocated_mad(const FramePlane& a, const FramePlane& b, int mb);

// Decoder-side inputs for estimating the intensity change of lost blocks of
// one plane at frame t.
struct DeltaContext {
  int t = 0;
  const FramePlane* current = nullptr;          // decoded plane at t, lost blocks concealed
  const FramePlane* previous = nullptr;         // decoded t-1 or null
  const FramePlane* before_previous = nullptr;  // decoded t-2 or null
  std::span<const std::uint8_t> lost;           // per macroblock at t
  const FramePlane* disparity = nullptr;        // this view's decoded disparity at t (neighbour similarity)
  int similar_disparity = 2;
};

// Rule 2 (co-located change between t-1 and t-2) or, with fewer than two
// previous frames, rule 3 (mean change of received 4-neighbours with
// similar disparity; a missing previous frame counts as mid-grey).
double delta_temporal(const DeltaContext& ctx, int mb);

// The opposing view's texture and disparity projected into this view.
struct CrossViewEvidence {
  const FramePlane* texture = nullptr;    // opposing decoded texture at t
  const FramePlane* disparity = nullptr;  // opposing decoded disparity at t
  std::span<const std::uint8_t> lost;     // opposing texture loss flags at t
  std::span<const double> received_error; // opposing e+ at t per MB
  ViewId opposing = ViewId::kRight;
  double eta = 1.0;
};

// Rule 1 when the projected opposing block covers at least half of `mb`,
// every covering opposing block was received, and the worst of their errors
// is strictly below this block's temporal estimate e(t-1) + delta_temporal.
// Otherwise rules 2/3.
double estimate_delta_decoder(const DeltaContext& ctx, int mb, double previous_error,
                              const CrossViewEvidence* evidence);

// Encoder-side expected error of one (view, component) stream. Decisions,
// deltas and delivery probabilities are kept for every committed frame so
// that feedback can rewrite probabilities and re-run the recursion.
class ExpectedErrorTracker {
 public:
  ExpectedErrorTracker(int mb_cols, int mb_rows, double gamma = kDefaultAttenuation);

  void commit(int t, std::vector<RpsDecision> decisions, std::vector<double> delta, std::vector<double> p);

  // Replace delivery probabilities of frame t (e.g. from ACK/NACK) and
  // re-propagate every later committed frame.
  void rewrite(int t, std::vector<double> p);

  const ErrorLattice& lattice() const { return lattice_; }
  int mb_cols() const { return mb_cols_; }
  int mb_rows() const { return mb_rows_; }
  double gamma() const { return gamma_; }
  int last_frame() const { return last_frame_; }
  const std::vector<RpsDecision>& decisions(int t) const { return frames_.at(t).decisions; }
  const std::vector<double>& delta(int t) const { return frames_.at(t).delta; }

 private:
  struct FrameRecord {
    std::vector<RpsDecision> decisions;
    std::vector<double> delta;
    std::vector<double> p;
  };

  void recompute_from(int t);

  int mb_cols_;
  int mb_rows_;
  double gamma_;
  int last_frame_ = -1;
  std::map<int, FrameRecord> frames_;
  ErrorLattice lattice_;
};

struct ErrorCsvRow {
  int t = 0;
  int view = 0;
  Component component = Component::kTexture;
  int mb = 0;
  double value = 0.0;
};

// CSV with header `t,view,component,mb,e,eps`; texture rows fill e, depth rows eps.
void write_error_csv(const std::filesystem::path& path, std::span<const ErrorCsvRow> rows);

}  // namespace fvs
