#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "fvs/codec.hpp"
#include "fvs/session.hpp"
#include "fvs/synthetic_scene.hpp"
#include "fvs/transform.hpp"
#include "oracles.hpp"

using namespace fvs;

namespace {

FramePlane noise_plane(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> level(0, 255);
  FramePlane p(w, h);
  for (auto& s : p.samples()) s = static_cast<std::uint8_t>(level(rng));
  return p;
}

// Content of `p` moved right by `dx` pixels; uncovered columns repeat the edge.
FramePlane shifted(const FramePlane& p, int dx) {
  FramePlane out(p.width(), p.height());
  for (int i = 0; i < p.height(); ++i) {
    for (int j = 0; j < p.width(); ++j) out.at(i, j) = p.at(i, std::clamp(j - dx, 0, p.width() - 1));
  }
  return out;
}

Coefficients quantized_noise(std::mt19937_64& rng, int amplitude, int qstep) {
  std::uniform_int_distribution<int> v(-amplitude, amplitude);
  Residual r{};
  for (auto& x : r) x = static_cast<std::int16_t>(v(rng));
  return forward_quantize(r, qstep);
}

}  // namespace

TEST_CASE("rate model signalling costs") {
  Coefficients zero{};
  CHECK(rate_model(RpsDecision::skip(5), zero, 5) == 2);
  CHECK(rate_model(RpsDecision::inter(4, {0, 0}), zero, 5) == 5);
  CHECK(rate_model(RpsDecision::inter(2, {0, 0}), zero, 5) == 7);
  CHECK(rate_model(RpsDecision::inter(4, {1, -2}), zero, 5) == 2 + 1 + 3 + 5);
  CHECK(rate_model(RpsDecision::intra(), zero, 5) == 2);
}

TEST_CASE("signed exp-golomb lengths") {
  CHECK(signed_exp_golomb_length(0) == 1);
  CHECK(signed_exp_golomb_length(1) == 3);
  CHECK(signed_exp_golomb_length(-1) == 3);
  CHECK(signed_exp_golomb_length(2) == 5);
  CHECK(signed_exp_golomb_length(-3) == 5);
  CHECK(signed_exp_golomb_length(4) == 7);
}

TEST_CASE("residual bits agree with an arithmetic coder within 10 percent") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const int amplitude = 8 + 4 * (trial % 10);
    const Coefficients c = quantized_noise(rng, amplitude, 4);
    if (all_zero(c)) continue;
    const std::vector<std::int16_t> symbols(c.begin(), c.end());
    const oracle::ArithmeticCoder coder(symbols);
    const auto bits = coder.encode(symbols);
    REQUIRE(coder.decode(bits, symbols.size()) == symbols);
    const double measured = static_cast<double>(bits.size());
    CHECK(std::abs(residual_bits(c) - measured) <= 0.1 * measured);
  }
}

TEST_CASE("entropy of simple symbol sets") {
  std::vector<std::int16_t> half(256, 0);
  for (int k = 0; k < 128; ++k) half[static_cast<std::size_t>(k)] = 3;
  CHECK(empirical_entropy_bits(half) == doctest::Approx(256.0));
  Coefficients c{};
  std::copy(half.begin(), half.end(), c.begin());
  CHECK(residual_bits(c) == 256);
  CHECK(residual_bits(Coefficients{}) == 0);
}

TEST_CASE("raising a coefficient to an unused value never lowers residual bits") {
  // Splitting a symbol class refines the partition, which cannot lower the
  // empirical entropy.
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pos(0, kMbPixels - 1);
  for (int trial = 0; trial < 300; ++trial) {
    Coefficients c = quantized_noise(rng, 6 + trial % 20, 5);
    const int before = residual_bits(c);
    const auto k = static_cast<std::size_t>(pos(rng));
    const int magnitude = *std::max_element(c.begin(), c.end(), [](auto a, auto b) { return std::abs(a) < std::abs(b); });
    c[k] = static_cast<std::int16_t>(std::abs(magnitude) + 1 + trial % 3);
    REQUIRE(residual_bits(c) >= before);
  }
}

TEST_CASE("raising a coefficient onto an existing value can lower residual bits") {
  // Entropy coding is not monotone in magnitude: merging two symbol classes
  // removes information.
  Coefficients c{};
  c[0] = 1;
  c[1] = 2;
  const int before = residual_bits(c);
  c[0] = 2;
  CHECK(residual_bits(c) < before);
}

TEST_CASE("zero vector, zero residual copies the co-located block") {
  const FramePlane prev = noise_plane(48, 32, 1);
  ReferenceWindow refs(3);
  refs.add(2, &prev);
  const Block16 b = reconstruct_block(RpsDecision::inter(2, {0, 0}), Coefficients{}, 4, 48, 32, refs, 128, 10);
  CHECK(b == extract_block(prev, 16, 16));
  CHECK(reconstruct_block(RpsDecision::skip(3), Coefficients{}, 4, 48, 32, refs, 128, 10) == b);
}

TEST_CASE("intra with border mean 100 and residual +5 gives 105") {
  Residual r;
  r.fill(5);
  const Coefficients c = forward_quantize(r, 10);
  ReferenceWindow refs(0);
  const Block16 b = reconstruct_block(RpsDecision::intra(), c, 0, 32, 32, refs, 100, 10);
  CHECK(std::all_of(b.begin(), b.end(), [](std::uint8_t v) { return v == 105; }));
}

TEST_CASE("intra dc predictor uses intra neighbours of the same slice") {
  FramePlane recon(48, 32, 0);
  for (int i = 0; i < 16; ++i) recon.at(16 + i, 15) = 90;   // right column of mb 3
  for (int j = 0; j < 16; ++j) recon.at(15, 16 + j) = 110;  // bottom row of mb 1
  std::vector<Mode> modes(6, Mode::kIntra);
  const std::vector<MbRange> one_slice{{0, 6}};
  CHECK(intra_dc_predictor(recon, 4, modes, one_slice) == 100);
  const std::vector<MbRange> split{{0, 3}, {3, 6}};
  CHECK(intra_dc_predictor(recon, 4, modes, split) == 90);
  modes[3] = Mode::kInter;
  CHECK(intra_dc_predictor(recon, 4, modes, split) == 128);
  CHECK(intra_dc_predictor(recon, 0, modes, one_slice) == 128);
}

TEST_CASE("static content makes skip free of distortion and cheapest") {
  const FramePlane frame = noise_plane(32, 32, 3);
  ReferenceWindow refs(1);
  refs.add(0, &frame);
  const CodecParams params{4, 3, 10};
  for (int mb = 0; mb < 4; ++mb) {
    const auto cands = candidate_search(frame, mb, refs, params, 128);
    REQUIRE(cands.front().decision.mode == Mode::kSkip);
    CHECK(cands.front().distortion == 0.0);
    CHECK(cands.front().bits == 2);
    for (const auto& c : cands) CHECK(c.bits >= 2);
  }
}

TEST_CASE("constructed motion is found exactly") {
  const FramePlane prev = noise_plane(64, 48, 11);
  ReferenceWindow refs(1);
  refs.add(0, &prev);
  const CodecParams params{8, 3, 10};
  SUBCASE("content moved right by 2") {
    // The vector addresses the predictor, so rightward motion reads from the left.
    const FramePlane cur = shifted(prev, 2);
    const auto hit = full_search(cur, 5, prev, 8);
    CHECK(hit.mv == MotionVector{-2, 0});
    CHECK(hit.sad == 0);
  }
  SUBCASE("content moved left by 2") {
    const FramePlane cur = shifted(prev, -2);
    const auto hit = full_search(cur, 5, prev, 8);
    CHECK(hit.mv == MotionVector{2, 0});
    CHECK(hit.sad == 0);
    const auto cands = inter_candidates(cur, 5, refs, params);
    const auto best = std::find_if(cands.begin(), cands.end(), [](const Candidate& c) {
      return c.decision.mode == Mode::kInter && c.decision.mv == MotionVector{2, 0};
    });
    REQUIRE(best != cands.end());
    CHECK(best->distortion == 0.0);
  }
}

TEST_CASE("motion search matches a brute-force search") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    // Low-amplitude ramps plus noise give many near ties.
    FramePlane ref(32, 32);
    FramePlane src(32, 32);
    std::uniform_int_distribution<int> n(0, 3 + trial % 5);
    for (int i = 0; i < 32; ++i) {
      for (int j = 0; j < 32; ++j) {
        ref.at(i, j) = static_cast<std::uint8_t>((i * (trial % 3) + j) % 7 * 9 + n(rng));
        src.at(i, j) = static_cast<std::uint8_t>(((i + 1) * (trial % 3) + j + 2) % 7 * 9 + n(rng));
      }
    }
    for (int range : {2, 4, 16}) {
      for (int mb = 0; mb < 4; ++mb) {
        const auto fast = full_search(src, mb, ref, range);
        const auto slow = oracle::brute_force_search(src, mb, ref, range);
        REQUIRE(fast.mv == slow.mv);
        REQUIRE(fast.sad == slow.sad);
      }
    }
  }
}

TEST_CASE("candidates respect the window and reconstruct consistently") {
  std::mt19937_64 rng(9);
  std::vector<FramePlane> frames;
  for (int t = 0; t < 6; ++t) frames.push_back(noise_plane(48, 48, 100 + t));
  const CodecParams params{4, 3, 8};
  ReferenceWindow refs(6);
  for (int t = 0; t < 6; ++t) refs.add(t, &frames[static_cast<std::size_t>(t)]);
  const FramePlane source = shifted(frames[4], 1);
  for (int mb = 0; mb < 9; ++mb) {
    const auto cands = candidate_search(source, mb, refs, params, 128);
    REQUIRE(cands.front().decision == RpsDecision::skip(6));
    CHECK(cands.back().decision.mode == Mode::kIntra);
    const auto [top, left] = mb_origin(source, mb);
    const Block16 src = extract_block(source, top, left);
    for (const auto& c : cands) {
      if (c.decision.mode == Mode::kInter) {
        CHECK(6 - c.decision.ref_frame <= params.ref_window);
        CHECK(std::abs(c.decision.mv.dx) <= params.search_range);
        CHECK(std::abs(c.decision.mv.dy) <= params.search_range);
      }
      CHECK(c.recon == reconstruct_block(c.decision, c.residual, mb, 48, 48, refs, 128, params.qstep));
      CHECK(c.distortion == block_mad(c.recon, src));
      CHECK(c.bits == rate_model(c.decision, c.residual, 6));
    }
  }
  ReferenceWindow none(3);
  CHECK_THROWS(inter_candidates(source, 0, none, params));
}

TEST_CASE("prediction outside the window or frame is rejected") {
  const FramePlane prev = noise_plane(32, 32, 4);
  ReferenceWindow refs(5);
  refs.add(4, &prev);
  CHECK_THROWS(prediction_block(RpsDecision::inter(1, {0, 0}), 0, 32, 32, refs, 128));
  CHECK_THROWS(prediction_block(RpsDecision::inter(4, {-1, 0}), 0, 32, 32, refs, 128));
  CHECK_THROWS(prediction_block(RpsDecision::inter(4, {0, 1}), 3, 32, 32, refs, 128));
}

TEST_CASE("concealment") {
  const FramePlane prev = noise_plane(32, 32, 6);
  SUBCASE("static content conceals perfectly") {
    CHECK(block_mad(conceal_block(3, &prev), extract_block(prev, 16, 16)) == 0.0);
  }
  SUBCASE("a uniform change leaves exactly that change") {
    FramePlane cur(32, 32);
    for (int i = 0; i < 32; ++i) {
      for (int j = 0; j < 32; ++j) cur.at(i, j) = static_cast<std::uint8_t>(std::min(prev.at(i, j), std::uint8_t{240}) + 7);
    }
    FramePlane base(32, 32);
    for (int i = 0; i < 32; ++i) {
      for (int j = 0; j < 32; ++j) base.at(i, j) = static_cast<std::uint8_t>(cur.at(i, j) - 7);
    }
    CHECK(block_mad(conceal_block(1, &base), extract_block(cur, 0, 16)) == 7.0);
  }
  SUBCASE("nothing to copy at frame 0") {
    const Block16 b = conceal_block(0, nullptr);
    CHECK(std::all_of(b.begin(), b.end(), [](std::uint8_t v) { return v == 128; }));
  }
}

TEST_CASE("lossless transmission keeps encoder and decoder in lockstep") {
  auto spec = default_scene_spec();
  spec.width = 64;
  spec.height = 64;
  spec.frame_count = 12;
  spec.objects[0].trajectory = bouncing_trajectory({10, 8}, {2, 1}, 12, 32, 32, 4, 1, 64, 64);
  spec.objects[1].trajectory = bouncing_trajectory({30, 20}, {-2, 1}, 12, 24, 40, 8, 1, 64, 64);
  const auto scene = generate_synthetic_stereo(spec);
  CodingConfig cc;
  cc.width = 64;
  cc.height = 64;
  cc.loss_rate = 0.0;
  const auto schedule = make_schedule(12, cc.packets(Component::kTexture), cc.packets(Component::kDepth));
  const LossTrace trace = make_iid_trace(1, 0.0, schedule);
  for (RpsMode mode : {RpsMode::kReactive, RpsMode::kIndependent, RpsMode::kCrossView}) {
    Sender sender(mode, cc);
    Receiver receiver(cc);
    std::vector<EncodedPlane> stream;
    for (int t = 0; t < 12; ++t) {
      const auto enc = sender.encode(t, scene.left[t], scene.right[t], feedback_at(trace, t, cc.rtt_frames), {});
      const auto rec = receiver.receive(enc, trace);
      for (int view = 0; view < 2; ++view) {
        for (int c = 0; c < 2; ++c) {
          REQUIRE(rec.decoded[view][c] == sender.reconstruction(view, static_cast<Component>(c), t));
          stream.push_back(enc.planes[view][c]);
        }
      }
    }
    const auto path = std::filesystem::temp_directory_path() / "fvs-test-codec.fvsb";
    write_bitstream(path, {64, 64, 10}, stream);
    BitstreamHeader header;
    const auto back = read_bitstream(path, header);
    CHECK(header.width == 64);
    REQUIRE(back.size() == stream.size());
    for (std::size_t k = 0; k < back.size(); ++k) {
      REQUIRE(back[k].frame == stream[k].frame);
      REQUIRE(back[k].view == stream[k].view);
      REQUIRE(back[k].component == stream[k].component);
      REQUIRE(back[k].mbs.size() == stream[k].mbs.size());
      for (std::size_t m = 0; m < back[k].mbs.size(); ++m) {
        REQUIRE(back[k].mbs[m].decision == stream[k].mbs[m].decision);
        REQUIRE(back[k].mbs[m].residual == stream[k].mbs[m].residual);
        REQUIRE(back[k].mbs[m].bits == stream[k].mbs[m].bits);
      }
    }
  }
}

TEST_CASE("frame totals are the sum of macroblock bits") {
  EncodedPlane p;
  p.mbs.resize(3);
  p.mbs[0].bits = 2;
  p.mbs[1].bits = 17;
  p.mbs[2].bits = 0;
  CHECK(p.total_bits() == 19);
}
