#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fvs/codec.hpp"
#include "fvs/error_tracker.hpp"
#include "fvs/scene_io.hpp"
#include "fvs/sensitivity.hpp"

namespace fvs {

// kReactive: source distortion + lambda*bits over untainted references.
// kIndependent: every block uses the separable own-view objective.
// kCrossView: blocks with an opposing correspondence use the two-step
// min(own, opposing) objective.
enum class RpsMode { kReactive, kIndependent, kCrossView };

struct CorrespondenceSets {
  std::vector<std::uint8_t> linked;        // 1 when the block has an opposing correspondence
  std::vector<std::vector<int>> covering;  // opposing blocks holding the corresponding pixels, ascending
};

// Warps every pixel to the opposing view at full baseline. A pixel
// corresponds when it lands in frame on an opposing pixel whose disparity is
// within one level of its own (same surface, not occluded). A block is
// linked when at least half of its pixels correspond.
CorrespondenceSets build_correspondences(const FramePlane& own_disparity, const FramePlane& other_disparity,
                                         ViewId own, double eta);

inline double dbar_eval(double texture_error, double curvature, double disparity_error) {
  return texture_error + g_eval(curvature, disparity_error);
}

inline double d_eval(double own, double opposing) { return own < opposing ? own : opposing; }

struct OpposingState {
  std::span<const double> texture_error;    // opposing view, previous frame
  std::span<const double> disparity_error;  // opposing view, previous frame
  std::span<const double> curvature;        // opposing view
};

// max over covering blocks k of e(k) + g(a(k), eps(k)) + delta.
double opposing_term(std::span<const int> covering, const OpposingState& state, double delta);

struct ScoredCandidate {
  const Candidate* candidate = nullptr;
  double error = 0.0;  // expected texture error e or disparity error eps
};

struct BlockProblem {
  std::span<const ScoredCandidate> texture;
  std::span<const ScoredCandidate> depth;
  double curvature = 0.0;
  bool linked = false;
  double opposing = 0.0;
};

struct BlockChoice {
  std::size_t texture = 0;
  std::size_t depth = 0;
  double texture_cost = 0.0;
  double depth_cost = 0.0;
  double dbar = 0.0;
  double d = 0.0;
};

// Candidate lists are in canonical order; the first strict minimum wins.
BlockChoice optimize_block(const BlockProblem& problem, double lambda, RpsMode mode);

// Everything about one (view, component) plane at frame t that does not
// depend on lambda.
struct PlaneInputs {
  const FramePlane* source = nullptr;
  int t = 0;
  int qstep = 1;
  std::vector<MbRange> slices;
  std::vector<std::vector<Candidate>> inter;          // per MB, canonical order
  std::vector<std::vector<double>> inter_error;       // expected error of each inter candidate
  std::vector<double> intra_error;                    // expected error of INTRA per MB
  mutable std::map<std::pair<int, int>, Candidate> intra_cache;  // (mb, dc) -> candidate

  const Candidate& intra(int mb, int dc) const;
};

// Filters inter candidates; returning false removes the candidate.
using CandidateFilter = std::function<bool(const RpsDecision&, int mb)>;

struct ExpectedErrorInputs {
  const ErrorLattice* lattice = nullptr;  // null: no error model (all errors 0)
  double p = 1.0;                         // delivery probability of the current frame
  std::span<const double> delta;          // encoder delta per MB
  double gamma = kDefaultAttenuation;
};

PlaneInputs prepare_plane(const FramePlane& source, const ReferenceWindow& refs, const CodecParams& params,
                          std::vector<MbRange> slices, const ExpectedErrorInputs& model,
                          const CandidateFilter& filter = {});

struct ViewInputs {
  std::array<const PlaneInputs*, 2> planes{};  // texture, depth
  std::vector<double> curvature;
  CorrespondenceSets correspondences;
  std::vector<double> opposing;  // per MB; read for linked blocks only
};

struct PlaneOutcome {
  EncodedPlane encoded;
  FramePlane recon;
  std::vector<double> error;  // expected error of the chosen candidate
  std::vector<double> dbar;
  std::vector<double> d;
};

struct FramePairOutcome {
  std::array<std::array<PlaneOutcome, 2>, 2> planes;  // [view][component]
  int bits = 0;
  double cost = 0.0;  // total Lagrangian cost
};

// Called once per block pair with the exact problem that was solved.
using BlockObserver = std::function<void(int view, int mb, const BlockProblem&, const BlockChoice&)>;

FramePairOutcome optimize_frame_pair(const std::array<ViewInputs, 2>& views, double lambda, RpsMode mode,
                                     const BlockObserver& observer = {});

struct LambdaBracket {
  std::optional<double> over;   // largest lambda seen that produced too many bits
  std::optional<double> under;  // smallest lambda seen that produced too few bits
};

inline constexpr double kLambdaStep = 1.25;

// Keeps lambda when bits fall within target*(1 +/- band); otherwise records
// the bracket and moves by `step`, or bisects geometrically once both sides
// of the target have been seen.
double tune_lambda(double lambda, int produced_bits, int target_bits, double band, LambdaBracket& bracket,
                   double step = kLambdaStep);

inline bool within_band(int bits, int target, double band) {
  return bits >= target * (1.0 - band) && bits <= target * (1.0 + band);
}

// Reactive taint of one plane at frame t: NACKed blocks plus non-INTRA
// blocks whose predictor overlaps a tainted block of their reference.
// Frames absent from `taint` count as clean.
std::vector<std::uint8_t> propagate_taint(int t, std::span<const RpsDecision> decisions,
                                          std::span<const std::uint8_t> nacked,
                                          const std::map<int, std::vector<std::uint8_t>>& taint, int mb_cols,
                                          int mb_rows);

bool reference_tainted(const RpsDecision& decision, int t, int mb,
                       const std::map<int, std::vector<std::uint8_t>>& taint, int mb_cols, int mb_rows);

}  // namespace fvs
