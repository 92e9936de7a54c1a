#include "fvs/rps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <tuple>

namespace fvs {

CorrespondenceSets build_correspondences(const FramePlane& own_disparity, const FramePlane& other_disparity,
                                         ViewId own, double eta) {
  if (own_disparity.width() != other_disparity.width() || own_disparity.height() != other_disparity.height()) {
    throw std::invalid_argument("build_correspondences: plane dimensions differ");
  }
  const int count = own_disparity.mb_count();
  const int cols = own_disparity.mb_cols();
  const int w = own_disparity.width();
  const double sign = own == ViewId::kLeft ? -1.0 : 1.0;
  CorrespondenceSets out;
  out.linked.assign(static_cast<std::size_t>(count), 0);
  out.covering.resize(static_cast<std::size_t>(count));
  for (int mb = 0; mb < count; ++mb) {
    const auto [top, left] = mb_origin(own_disparity, mb);
    std::set<int> cover;
    int matched = 0;
    for (int y = 0; y < kMbSize; ++y) {
      const int i = top + y;
      for (int x = 0; x < kMbSize; ++x) {
        const int level = own_disparity.at(i, left + x);
        const int target = static_cast<int>(std::floor(left + x + sign * level * eta + 0.5));
        if (target < 0 || target >= w) continue;
        if (std::abs(int{other_disparity.at(i, target)} - level) > 1) continue;
        ++matched;
        cover.insert((i / kMbSize) * cols + target / kMbSize);
      }
    }
    if (2 * matched >= kMbPixels) {
      out.linked[static_cast<std::size_t>(mb)] = 1;
      out.covering[static_cast<std::size_t>(mb)].assign(cover.begin(), cover.end());
    }
  }
  return out;
}

double opposing_term(std::span<const int> covering, const OpposingState& state, double delta) {
  double worst = 0.0;
  for (int k : covering) {
    const auto idx = static_cast<std::size_t>(k);
    worst = std::max(worst, dbar_eval(state.texture_error[idx], state.curvature[idx], state.disparity_error[idx]));
  }
  return worst + delta;
}

namespace {

std::size_t first_min_error(std::span<const ScoredCandidate> cands) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < cands.size(); ++k) {
    if (cands[k].error < cands[best].error) best = k;
  }
  return best;
}

template <typename CostFn>
std::pair<std::size_t, double> first_min_cost(std::span<const ScoredCandidate> cands, CostFn cost) {
  std::size_t best = 0;
  double best_cost = cost(cands[0]);
  for (std::size_t k = 1; k < cands.size(); ++k) {
    const double c = cost(cands[k]);
    if (c < best_cost) {
      best = k;
      best_cost = c;
    }
  }
  return {best, best_cost};
}

}  // namespace

BlockChoice optimize_block(const BlockProblem& problem, double lambda, RpsMode mode) {
  if (problem.texture.empty() || problem.depth.empty()) throw std::invalid_argument("optimize_block: empty candidate list");
  const double a = problem.curvature;
  const bool cross = mode == RpsMode::kCrossView && problem.linked;
  auto rate = [lambda](const ScoredCandidate& s) { return s.candidate->distortion + lambda * s.candidate->bits; };

  BlockChoice choice;
  if (mode == RpsMode::kReactive) {
    std::tie(choice.texture, choice.texture_cost) = first_min_cost(problem.texture, rate);
    std::tie(choice.depth, choice.depth_cost) = first_min_cost(problem.depth, rate);
  } else if (!cross) {
    std::tie(choice.texture, choice.texture_cost) =
        first_min_cost(problem.texture, [&](const ScoredCandidate& s) { return rate(s) + s.error; });
    std::tie(choice.depth, choice.depth_cost) =
        first_min_cost(problem.depth, [&](const ScoredCandidate& s) { return rate(s) + g_eval(a, s.error); });
  } else {
    const double best_texture_error = problem.texture[first_min_error(problem.texture)].error;
    const double best_depth_error = problem.depth[first_min_error(problem.depth)].error;
    const double opp = problem.opposing;
    std::tie(choice.texture, choice.texture_cost) = first_min_cost(problem.texture, [&](const ScoredCandidate& s) {
      return rate(s) + d_eval(dbar_eval(s.error, a, best_depth_error), opp);
    });
    std::tie(choice.depth, choice.depth_cost) = first_min_cost(problem.depth, [&](const ScoredCandidate& s) {
      return rate(s) + d_eval(dbar_eval(best_texture_error, a, s.error), opp);
    });
  }
  choice.dbar = dbar_eval(problem.texture[choice.texture].error, a, problem.depth[choice.depth].error);
  choice.d = cross ? d_eval(choice.dbar, problem.opposing) : choice.dbar;
  return choice;
}

const Candidate& PlaneInputs::intra(int mb, int dc) const {
  auto key = std::make_pair(mb, dc);
  auto it = intra_cache.find(key);
  if (it != intra_cache.end()) return it->second;
  const auto [top, left] = mb_origin(*source, mb);
  return intra_cache.emplace(key, intra_candidate(extract_block(*source, top, left), dc, qstep)).first->second;
}

PlaneInputs prepare_plane(const FramePlane& source, const ReferenceWindow& refs, const CodecParams& params,
                          std::vector<MbRange> slices, const ExpectedErrorInputs& model, const CandidateFilter& filter) {
  PlaneInputs in;
  in.source = &source;
  in.t = refs.current();
  in.qstep = params.qstep;
  in.slices = std::move(slices);
  const int count = source.mb_count();
  const int cols = source.mb_cols();
  const int rows = source.mb_rows();
  in.inter.resize(static_cast<std::size_t>(count));
  in.inter_error.resize(static_cast<std::size_t>(count));
  in.intra_error.assign(static_cast<std::size_t>(count), 0.0);
  for (int mb = 0; mb < count; ++mb) {
    const auto m = static_cast<std::size_t>(mb);
    auto cands = inter_candidates(source, mb, refs, params);
    if (filter) {
      std::erase_if(cands, [&](const Candidate& c) { return !filter(c.decision, mb); });
    }
    double minus = 0.0;
    if (model.lattice != nullptr) {
      minus = e_minus(model.lattice->value_or_zero(in.t - 1, mb), model.delta.empty() ? 0.0 : model.delta[m]);
      in.intra_error[m] = expected_error(model.p, 0.0, minus);
    }
    auto& errors = in.inter_error[m];
    errors.reserve(cands.size());
    for (const auto& c : cands) {
      if (model.lattice == nullptr) {
        errors.push_back(0.0);
        continue;
      }
      const double plus = e_plus(c.decision, in.t, mb, cols, rows, *model.lattice, model.gamma);
      errors.push_back(model.p == 1.0 ? plus : expected_error(model.p, plus, minus));
    }
    in.inter[m] = std::move(cands);
  }
  return in;
}

FramePairOutcome optimize_frame_pair(const std::array<ViewInputs, 2>& views, double lambda, RpsMode mode,
                                     const BlockObserver& observer) {
  FramePairOutcome out;
  for (int view = 0; view < 2; ++view) {
    const ViewInputs& vin = views[static_cast<std::size_t>(view)];
    const PlaneInputs& tex = *vin.planes[0];
    const PlaneInputs& dep = *vin.planes[1];
    const int count = tex.source->mb_count();
    if (dep.source->mb_count() != count) throw std::invalid_argument("optimize_frame_pair: plane sizes differ");

    std::array<PlaneOutcome, 2>& po = out.planes[static_cast<std::size_t>(view)];
    std::array<std::vector<Mode>, 2> modes;
    for (int c = 0; c < 2; ++c) {
      const PlaneInputs& pin = *vin.planes[static_cast<std::size_t>(c)];
      PlaneOutcome& o = po[static_cast<std::size_t>(c)];
      o.encoded.frame = pin.t;
      o.encoded.view = view;
      o.encoded.component = static_cast<Component>(c);
      o.encoded.mbs.resize(static_cast<std::size_t>(count));
      o.recon = FramePlane(pin.source->width(), pin.source->height());
      o.error.assign(static_cast<std::size_t>(count), 0.0);
      o.dbar.assign(static_cast<std::size_t>(count), 0.0);
      o.d.assign(static_cast<std::size_t>(count), 0.0);
      modes[static_cast<std::size_t>(c)].assign(static_cast<std::size_t>(count), Mode::kSkip);
    }

    std::array<std::vector<ScoredCandidate>, 2> lists;
    for (int mb = 0; mb < count; ++mb) {
      const auto m = static_cast<std::size_t>(mb);
      for (int c = 0; c < 2; ++c) {
        const PlaneInputs& pin = *vin.planes[static_cast<std::size_t>(c)];
        auto& list = lists[static_cast<std::size_t>(c)];
        list.clear();
        for (std::size_t k = 0; k < pin.inter[m].size(); ++k) list.push_back({&pin.inter[m][k], pin.inter_error[m][k]});
        const int dc = intra_dc_predictor(po[static_cast<std::size_t>(c)].recon, mb, modes[static_cast<std::size_t>(c)], pin.slices);
        list.push_back({&pin.intra(mb, dc), pin.intra_error[m]});
      }
      BlockProblem problem{lists[0], lists[1], vin.curvature.empty() ? 0.0 : vin.curvature[m],
                           !vin.correspondences.linked.empty() && vin.correspondences.linked[m] != 0,
                           vin.opposing.empty() ? 0.0 : vin.opposing[m]};
      const BlockChoice choice = optimize_block(problem, lambda, mode);
      if (observer) observer(view, mb, problem, choice);
      out.cost += choice.texture_cost + choice.depth_cost;
      const std::array<std::size_t, 2> picked{choice.texture, choice.depth};
      for (int c = 0; c < 2; ++c) {
        const auto cs = static_cast<std::size_t>(c);
        const ScoredCandidate& s = lists[cs][picked[cs]];
        PlaneOutcome& o = po[cs];
        auto& rec = o.encoded.mbs[m];
        rec.decision = s.candidate->decision;
        rec.residual = s.candidate->residual;
        rec.bits = s.candidate->bits;
        out.bits += rec.bits;
        const auto [top, left] = mb_origin(o.recon, mb);
        store_block(o.recon, top, left, s.candidate->recon);
        modes[cs][m] = rec.decision.mode;
        o.error[m] = s.error;
        o.dbar[m] = choice.dbar;
        o.d[m] = choice.d;
      }
    }
  }
  return out;
}

double tune_lambda(double lambda, int produced_bits, int target_bits, double band, LambdaBracket& bracket,
                   double step) {
  if (!(lambda > 0.0)) throw std::invalid_argument("tune_lambda: lambda must be positive");
  if (within_band(produced_bits, target_bits, band)) return lambda;
  if (produced_bits > target_bits) {
    if (!bracket.over || lambda > *bracket.over) bracket.over = lambda;
  } else {
    if (!bracket.under || lambda < *bracket.under) bracket.under = lambda;
  }
  if (bracket.over && bracket.under && *bracket.over < *bracket.under) {
    return std::sqrt(*bracket.over * *bracket.under);
  }
  return produced_bits > target_bits ? lambda * step : lambda / step;
}

bool reference_tainted(const RpsDecision& decision, int t, int mb,
                       const std::map<int, std::vector<std::uint8_t>>& taint, int mb_cols, int mb_rows) {
  if (decision.mode == Mode::kIntra) return false;
  const int ref = decision.mode == Mode::kSkip ? t - 1 : decision.ref_frame;
  const MotionVector mv = decision.mode == Mode::kSkip ? MotionVector{} : decision.mv;
  auto it = taint.find(ref);
  if (it == taint.end()) return false;
  for (const auto& o : predictor_overlap(mb, mv, mb_cols, mb_rows)) {
    if (it->second[static_cast<std::size_t>(o.mb)]) return true;
  }
  return false;
}

std::vector<std::uint8_t> propagate_taint(int t, std::span<const RpsDecision> decisions,
                                          std::span<const std::uint8_t> nacked,
                                          const std::map<int, std::vector<std::uint8_t>>& taint, int mb_cols,
                                          int mb_rows) {
  const std::size_t count = static_cast<std::size_t>(mb_cols * mb_rows);
  std::vector<std::uint8_t> out(count, 0);
  for (std::size_t m = 0; m < count; ++m) {
    if (!nacked.empty() && nacked[m]) {
      out[m] = 1;
      continue;
    }
    out[m] = reference_tainted(decisions[m], t, static_cast<int>(m), taint, mb_cols, mb_rows) ? 1 : 0;
  }
  return out;
}

}  // namespace fvs
