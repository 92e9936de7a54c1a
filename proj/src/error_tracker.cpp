#include "fvs/error_tracker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "fvs/dibr.hpp"

namespace fvs {

std::vector<PredictorOverlap> predictor_overlap(int mb, MotionVector mv, int mb_cols, int mb_rows) {
  const int top = (mb / mb_cols) * kMbSize + mv.dy;
  const int left = (mb % mb_cols) * kMbSize + mv.dx;
  if (top < 0 || left < 0 || top + kMbSize > mb_rows * kMbSize || left + kMbSize > mb_cols * kMbSize) {
    throw std::invalid_argument("predictor_overlap: predictor outside the frame");
  }
  std::vector<PredictorOverlap> out;
  const int r0 = top / kMbSize;
  const int c0 = left / kMbSize;
  const int rows_first = kMbSize - top % kMbSize;
  const int cols_first = kMbSize - left % kMbSize;
  for (int r = 0; r < 2; ++r) {
    const int rows = r == 0 ? rows_first : kMbSize - rows_first;
    if (rows == 0) continue;
    for (int c = 0; c < 2; ++c) {
      const int cols = c == 0 ? cols_first : kMbSize - cols_first;
      if (cols == 0) continue;
      out.push_back({(r0 + r) * mb_cols + c0 + c, rows * cols});
    }
  }
  return out;
}

const std::vector<double>& ErrorLattice::at(int t) const {
  auto it = frames_.find(t);
  if (it == frames_.end()) throw std::out_of_range("ErrorLattice: frame " + std::to_string(t) + " is not tracked");
  return it->second;
}

void ErrorLattice::set(int t, std::vector<double> values) {
  if (static_cast<int>(values.size()) != mb_count_) throw std::invalid_argument("ErrorLattice: wrong macroblock count");
  frames_[t] = std::move(values);
}

double ErrorLattice::value_or_zero(int t, int mb) const {
  if (t < 0) return 0.0;
  return at(t)[static_cast<std::size_t>(mb)];
}

double e_plus(const RpsDecision& decision, int t, int mb, int mb_cols, int mb_rows, const ErrorLattice& lattice,
              double gamma) {
  if (decision.mode == Mode::kIntra) return 0.0;
  const int ref = decision.mode == Mode::kSkip ? t - 1 : decision.ref_frame;
  const MotionVector mv = decision.mode == Mode::kSkip ? MotionVector{} : decision.mv;
  if (ref >= t) throw std::invalid_argument("e_plus: reference must precede the current frame");
  const auto& prev = lattice.at(ref);
  double sum = 0.0;
  for (const auto& o : predictor_overlap(mb, mv, mb_cols, mb_rows)) {
    sum += static_cast<double>(o.pixels) / kMbPixels * prev[static_cast<std::size_t>(o.mb)];
  }
  return gamma * sum;
}

std::vector<double> track_plane(int t, std::span<const RpsDecision> decisions, std::span<const double> p,
                                std::span<const double> delta, const ErrorLattice& lattice, int mb_cols,
                                int mb_rows, double gamma) {
  const std::size_t count = static_cast<std::size_t>(mb_cols * mb_rows);
  if (decisions.size() != count || p.size() != count || delta.size() != count) {
    throw std::invalid_argument("track_plane: per-macroblock inputs have the wrong size");
  }
  std::vector<double> out(count);
  for (std::size_t m = 0; m < count; ++m) {
    const int mb = static_cast<int>(m);
    const double minus = e_minus(lattice.value_or_zero(t - 1, mb), delta[m]);
    if (p[m] == 0.0) {
      out[m] = minus;
      continue;
    }
    const double plus = e_plus(decisions[m], t, mb, mb_cols, mb_rows, lattice, gamma);
    out[m] = p[m] == 1.0 ? plus : expected_error(p[m], plus, minus);
  }
  return out;
}

double colocated_mad(const FramePlane& a, const FramePlane& b, int mb) {
  const auto [top, left] = mb_origin(a, mb);
  return block_mad(extract_block(a, top, left), extract_block(b, top, left));
}

namespace {

double mean_disparity(const FramePlane& disparity, int mb) {
  const auto [top, left] = mb_origin(disparity, mb);
  int sum = 0;
  for (int y = 0; y < kMbSize; ++y) {
    for (int x = 0; x < kMbSize; ++x) sum += disparity.at(top + y, left + x);
  }
  return static_cast<double>(sum) / kMbPixels;
}

double mad_against_grey(const FramePlane& a, int mb) {
  const auto [top, left] = mb_origin(a, mb);
  double sum = 0.0;
  for (int y = 0; y < kMbSize; ++y) {
    for (int x = 0; x < kMbSize; ++x) sum += std::abs(int{a.at(top + y, left + x)} - 128);
  }
  return sum / kMbPixels;
}

}  // namespace

double delta_temporal(const DeltaContext& ctx, int mb) {
  if (ctx.previous != nullptr && ctx.before_previous != nullptr) return colocated_mad(*ctx.previous, *ctx.before_previous, mb);
  const FramePlane& cur = *ctx.current;
  const int cols = cur.mb_cols();
  const int rows = cur.mb_rows();
  const int r = mb / cols;
  const int c = mb % cols;
  const double own = ctx.disparity != nullptr ? mean_disparity(*ctx.disparity, mb) : 0.0;
  double sum = 0.0;
  int count = 0;
  const int dr[4] = {-1, 1, 0, 0};
  const int dc[4] = {0, 0, -1, 1};
  for (int k = 0; k < 4; ++k) {
    const int nr = r + dr[k];
    const int nc = c + dc[k];
    if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
    const int n = nr * cols + nc;
    if (ctx.lost[static_cast<std::size_t>(n)]) continue;
    if (ctx.disparity != nullptr && std::abs(mean_disparity(*ctx.disparity, n) - own) > ctx.similar_disparity) continue;
    sum += ctx.previous != nullptr ? colocated_mad(cur, *ctx.previous, n) : mad_against_grey(cur, n);
    ++count;
  }
  return count == 0 ? 0.0 : sum / count;
}

double estimate_delta_decoder(const DeltaContext& ctx, int mb, double previous_error,
                              const CrossViewEvidence* evidence) {
  const double temporal = delta_temporal(ctx, mb);
  if (evidence == nullptr) return temporal;

  const FramePlane& cur = *ctx.current;
  const auto [top, left] = mb_origin(cur, mb);
  const int w = cur.width();
  const FramePlane& disp = *evidence->disparity;
  const double sign = evidence->opposing == ViewId::kLeft ? -1.0 : 1.0;
  const int cols = disp.mb_cols();

  double diff = 0.0;
  int covered = 0;
  std::set<int> sources;
  for (int y = 0; y < kMbSize; ++y) {
    const int i = top + y;
    // Row-local z-buffer of the opposing row restricted to this block's columns.
    int winner[kMbSize];
    std::fill(std::begin(winner), std::end(winner), kNoSource);
    for (int j = 0; j < w; ++j) {
      const int target = static_cast<int>(std::floor(j + sign * disp.at(i, j) * evidence->eta + 0.5));
      if (target < left || target >= left + kMbSize) continue;
      int& slot = winner[target - left];
      if (slot == kNoSource || disp.at(i, j) > disp.at(i, slot)) slot = j;
    }
    for (int x = 0; x < kMbSize; ++x) {
      if (winner[x] == kNoSource) continue;
      ++covered;
      sources.insert((i / kMbSize) * cols + winner[x] / kMbSize);
      const int prev = ctx.previous != nullptr ? ctx.previous->at(i, left + x) : 128;
      diff += std::abs(int{evidence->texture->at(i, winner[x])} - prev);
    }
  }
  if (2 * covered < kMbPixels) return temporal;
  double worst = 0.0;
  for (int k : sources) {
    if (evidence->lost[static_cast<std::size_t>(k)]) return temporal;
    worst = std::max(worst, evidence->received_error[static_cast<std::size_t>(k)]);
  }
  if (!(worst < previous_error + temporal)) return temporal;
  return diff / covered;
}

ExpectedErrorTracker::ExpectedErrorTracker(int mb_cols, int mb_rows, double gamma)
    : mb_cols_(mb_cols), mb_rows_(mb_rows), gamma_(gamma), lattice_(mb_cols * mb_rows) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("ExpectedErrorTracker: gamma must lie in (0,1]");
}

void ExpectedErrorTracker::commit(int t, std::vector<RpsDecision> decisions, std::vector<double> delta,
                                  std::vector<double> p) {
  if (t != last_frame_ + 1) throw std::invalid_argument("ExpectedErrorTracker: frames must be committed in order");
  for (double q : p) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("ExpectedErrorTracker: probability outside [0,1]");
  }
  frames_[t] = {std::move(decisions), std::move(delta), std::move(p)};
  last_frame_ = t;
  recompute_from(t);
}

void ExpectedErrorTracker::rewrite(int t, std::vector<double> p) {
  auto it = frames_.find(t);
  if (it == frames_.end()) throw std::out_of_range("ExpectedErrorTracker: frame was never committed");
  if (it->second.p == p) return;
  it->second.p = std::move(p);
  recompute_from(t);
}

void ExpectedErrorTracker::recompute_from(int t) {
  for (int f = t; f <= last_frame_; ++f) {
    const auto& rec = frames_.at(f);
    lattice_.set(f, track_plane(f, rec.decisions, rec.p, rec.delta, lattice_, mb_cols_, mb_rows_, gamma_));
  }
}

void write_error_csv(const std::filesystem::path& path, std::span<const ErrorCsvRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_error_csv: cannot open " + path.string());
  out << "t,view,component,mb,e,eps\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.value);
    out << r.t << ',' << r.view << ',' << component_name(r.component) << ',' << r.mb << ',';
    if (r.component == Component::kTexture) {
      out << buf << ",\n";
    } else {
      out << ',' << buf << '\n';
    }
  }
}

}  // namespace fvs
