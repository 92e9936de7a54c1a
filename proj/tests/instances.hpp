#pragma once

// Randomised block-optimisation instances shared by the optimizer tests and
// the acceptance run: small frame pairs with three reference frames, search
// range 4, random error histories, curvatures and correspondence links.

#include <algorithm>
#include <array>
#include <memory>
#include <random>
#include <vector>

#include "fvs/rps.hpp"
#include "oracles.hpp"

namespace instance {

inline constexpr int kFrame = 3;
inline constexpr int kWindow = 3;
inline constexpr int kRange = 4;

struct PlaneData {
  fvs::FramePlane source;
  std::vector<fvs::FramePlane> refs;  // refs[f] is frame f
  fvs::ErrorLattice lattice;
  std::vector<double> delta;
  fvs::CodecParams codec;
  std::vector<fvs::MbRange> slices;
};

struct Instance {
  int cols = 1;
  int rows = 1;
  double p = 1.0;
  double gamma = 0.9;
  double lambda = 0.1;
  std::array<std::array<PlaneData, 2>, 2> planes;  // [view][component]
  std::array<std::array<fvs::PlaneInputs, 2>, 2> inputs;
  std::array<fvs::ViewInputs, 2> views;
};

namespace detail {

inline fvs::FramePlane moved(const fvs::FramePlane& from, int dx, int dy, int noise, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> jitter(-noise, noise);
  fvs::FramePlane out(from.width(), from.height());
  for (int i = 0; i < from.height(); ++i) {
    for (int j = 0; j < from.width(); ++j) {
      const int si = (i - dy + from.height()) % from.height();
      const int sj = (j - dx + from.width()) % from.width();
      const int v = from.at(si, sj) + (noise ? jitter(rng) : 0);
      out.at(i, j) = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
  }
  return out;
}

inline fvs::FramePlane texture(int w, int h, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> px(0, 255);
  fvs::FramePlane p(w, h);
  for (auto& s : p.samples()) s = static_cast<std::uint8_t>(px(rng));
  return p;
}

inline fvs::FramePlane depth(int w, int h, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> level(0, 20);
  fvs::FramePlane p(w, h);
  for (int ti = 0; ti < h; ti += 8) {
    for (int tj = 0; tj < w; tj += 8) {
      const auto v = static_cast<std::uint8_t>(level(rng));
      for (int i = ti; i < ti + 8; ++i) {
        for (int j = tj; j < tj + 8; ++j) p.at(i, j) = v;
      }
    }
  }
  return p;
}

inline std::vector<double> errors(int n, double high, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> e(0.0, high);
  std::bernoulli_distribution zero(0.3);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = zero(rng) ? 0.0 : e(rng);
  return out;
}

}  // namespace detail

// Instances are heap allocated because the prepared inputs point into them.
// A clean instance has an all-zero error history and certain delivery.
inline std::unique_ptr<Instance> make_instance(std::uint64_t seed, bool clean = false) {
  std::mt19937_64 rng(seed);
  auto in = std::make_unique<Instance>();
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_int_distribution<int> shift(-2, 2);
  in->cols = dim(rng);
  in->rows = dim(rng);
  const std::array<double, 4> ps{1.0, 0.95, 0.9, 0.8};
  const std::array<double, 5> lambdas{0.0, 0.02, 0.2, 1.0, 6.0};
  in->p = ps[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 3)(rng))];
  in->lambda = lambdas[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 4)(rng))];
  if (clean) in->p = 1.0;
  const int w = in->cols * fvs::kMbSize;
  const int h = in->rows * fvs::kMbSize;
  const int count = in->cols * in->rows;

  for (int view = 0; view < 2; ++view) {
    for (int c = 0; c < 2; ++c) {
      PlaneData& pd = in->planes[static_cast<std::size_t>(view)][static_cast<std::size_t>(c)];
      pd.refs.push_back(c == 0 ? detail::texture(w, h, rng) : detail::depth(w, h, rng));
      const int noise = c == 0 ? 4 : 0;
      for (int f = 1; f <= kFrame; ++f) pd.refs.push_back(detail::moved(pd.refs.back(), shift(rng), shift(rng), noise, rng));
      pd.source = pd.refs.back();
      pd.refs.pop_back();
      pd.lattice = fvs::ErrorLattice(count);
      for (int f = 0; f < kFrame; ++f) {
        auto e = detail::errors(count, c == 0 ? 20.0 : 3.0, rng);
        if (clean) std::fill(e.begin(), e.end(), 0.0);
        pd.lattice.set(f, std::move(e));
      }
      pd.delta = detail::errors(count, 10.0, rng);
      pd.codec = fvs::CodecParams{kRange, kWindow, c == 0 ? 10 : 2};
      pd.slices = fvs::packetize(count, std::min(count, 2));
    }
  }

  for (int view = 0; view < 2; ++view) {
    const auto vs = static_cast<std::size_t>(view);
    for (int c = 0; c < 2; ++c) {
      const auto cs = static_cast<std::size_t>(c);
      const PlaneData& pd = in->planes[vs][cs];
      fvs::ReferenceWindow refs(kFrame);
      for (int f = kFrame - 1; f >= kFrame - kWindow; --f) refs.add(f, &pd.refs[static_cast<std::size_t>(f)]);
      const fvs::ExpectedErrorInputs model{&pd.lattice, in->p, pd.delta, in->gamma};
      in->inputs[vs][cs] = fvs::prepare_plane(pd.source, refs, pd.codec, pd.slices, model);
    }
    fvs::ViewInputs& vin = in->views[vs];
    vin.planes = {&in->inputs[vs][0], &in->inputs[vs][1]};
    vin.curvature = detail::errors(count, 10.0, rng);
    vin.correspondences.linked.resize(static_cast<std::size_t>(count));
    vin.correspondences.covering.resize(static_cast<std::size_t>(count));
    std::bernoulli_distribution link(0.5);
    for (int mb = 0; mb < count; ++mb) {
      const auto m = static_cast<std::size_t>(mb);
      vin.correspondences.linked[m] = link(rng) ? 1 : 0;
      if (vin.correspondences.linked[m]) vin.correspondences.covering[m] = {mb};
    }
    vin.opposing = detail::errors(count, 30.0, rng);
  }
  return in;
}

// Recomputes every scored candidate of one block from first principles:
// distortion against the source block, bits from the rate model, the
// reconstruction of inter candidates from the references, and the expected
// error from the recursion definition. Returns false on any mismatch.
inline bool candidates_consistent(const Instance& in, int view, int mb, const fvs::BlockProblem& problem) {
  std::array<std::span<const fvs::ScoredCandidate>, 2> lists{problem.texture, problem.depth};
  for (int c = 0; c < 2; ++c) {
    const PlaneData& pd = in.planes[static_cast<std::size_t>(view)][static_cast<std::size_t>(c)];
    std::map<int, std::vector<double>> history;
    for (int f = 0; f < kFrame; ++f) history[f] = pd.lattice.at(f);
    fvs::ReferenceWindow refs(kFrame);
    for (int f = kFrame - 1; f >= 0; --f) refs.add(f, &pd.refs[static_cast<std::size_t>(f)]);
    const auto [top, left] = fvs::mb_origin(pd.source, mb);
    const fvs::Block16 src = fvs::extract_block(pd.source, top, left);
    const double minus = pd.lattice.at(kFrame - 1)[static_cast<std::size_t>(mb)] + pd.delta[static_cast<std::size_t>(mb)];
    for (const auto& s : lists[static_cast<std::size_t>(c)]) {
      const fvs::Candidate& cand = *s.candidate;
      if (cand.distortion != fvs::block_mad(cand.recon, src)) return false;
      if (cand.bits != fvs::rate_model(cand.decision, cand.residual, kFrame)) return false;
      if (cand.decision.mode != fvs::Mode::kIntra) {
        if (kFrame - cand.decision.ref_frame > kWindow) return false;
        if (std::abs(cand.decision.mv.dx) > kRange || std::abs(cand.decision.mv.dy) > kRange) return false;
        const auto rec = fvs::reconstruct_block(cand.decision, cand.residual, mb, pd.source.width(),
                                                pd.source.height(), refs, 128, pd.codec.qstep);
        if (rec != cand.recon) return false;
      }
      const double plus = oracle::received_error(cand.decision, kFrame, mb, in.cols, in.rows, history, in.gamma);
      const double expected = in.p == 1.0 ? plus : in.p * plus + (1.0 - in.p) * minus;
      if (std::abs(s.error - expected) > 1e-9 * std::max(1.0, expected)) return false;
    }
  }
  return true;
}

}  // namespace instance
