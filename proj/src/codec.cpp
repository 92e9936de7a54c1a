#include "fvs/codec.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#ifdef __SSE2__
#include <emmintrin.h>
#endif

namespace fvs {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kIntra:
      return "INTRA";
    case Mode::kInter:
      return "INTER";
    case Mode::kSkip:
      return "SKIP";
  }
  return "?";
}

void ReferenceWindow::add(int frame, const FramePlane* plane) {
  if (frame >= current_) throw std::invalid_argument("ReferenceWindow: reference must precede the current frame");
  if (plane == nullptr) throw std::invalid_argument("ReferenceWindow: null plane");
  frames_.emplace_back(frame, plane);
  std::sort(frames_.begin(), frames_.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
}

const FramePlane* ReferenceWindow::find(int frame) const {
  for (const auto& [f, p] : frames_) {
    if (f == frame) return p;
  }
  return nullptr;
}

int rate_model(const RpsDecision& decision, const Coefficients& residual, int t) {
  constexpr int kModeBits = 2;
  switch (decision.mode) {
    case Mode::kSkip:
      return kModeBits;
    case Mode::kIntra:
      return kModeBits + residual_bits(residual);
    case Mode::kInter:
      return kModeBits + (t - decision.ref_frame) + signed_exp_golomb_length(decision.mv.dx) +
             signed_exp_golomb_length(decision.mv.dy) + residual_bits(residual);
  }
  return 0;
}

int block_sad(const FramePlane& src, int top, int left, const FramePlane& ref, int dy, int dx) {
  int sad = 0;
  for (int y = 0; y < kMbSize; ++y) {
    const std::uint8_t* a = src.row(top + y).data() + left;
    const std::uint8_t* b = ref.row(top + dy + y).data() + left + dx;
#ifdef __SSE2__
    const __m128i va = _mm_loadu_si128(reinterpret_cast<const __m128i*>(a));
    const __m128i vb = _mm_loadu_si128(reinterpret_cast<const __m128i*>(b));
    const __m128i s = _mm_sad_epu8(va, vb);
    sad += _mm_cvtsi128_si32(s) + _mm_cvtsi128_si32(_mm_srli_si128(s, 8));
#else
    for (int x = 0; x < kMbSize; ++x) sad += std::abs(int{a[x]} - int{b[x]});
#endif
  }
  return sad;
}

namespace {

// SAD with early exit once the running sum exceeds `bound`. The returned
// value is exact whenever it is <= bound.
int block_sad_bounded(const FramePlane& src, int top, int left, const FramePlane& ref, int dy, int dx, int bound) {
  int sad = 0;
  for (int y = 0; y < kMbSize; ++y) {
    const std::uint8_t* a = src.row(top + y).data() + left;
    const std::uint8_t* b = ref.row(top + dy + y).data() + left + dx;
#ifdef __SSE2__
    const __m128i s = _mm_sad_epu8(_mm_loadu_si128(reinterpret_cast<const __m128i*>(a)),
                                   _mm_loadu_si128(reinterpret_cast<const __m128i*>(b)));
    sad += _mm_cvtsi128_si32(s) + _mm_cvtsi128_si32(_mm_srli_si128(s, 8));
#else
    for (int x = 0; x < kMbSize; ++x) sad += std::abs(int{a[x]} - int{b[x]});
#endif
    if (sad > bound) return sad;
  }
  return sad;
}

bool better_vector(int sad, MotionVector mv, int best_sad, MotionVector best) {
  if (sad != best_sad) return sad < best_sad;
  if (mv.magnitude() != best.magnitude()) return mv.magnitude() < best.magnitude();
  if (mv.dy != best.dy) return mv.dy < best.dy;
  return mv.dx < best.dx;
}

void check_in_frame(const FramePlane& ref, int top, int left, MotionVector mv) {
  if (top + mv.dy < 0 || left + mv.dx < 0 || top + mv.dy + kMbSize > ref.height() ||
      left + mv.dx + kMbSize > ref.width()) {
    throw std::invalid_argument("motion vector points outside the reference frame");
  }
}

Residual residual_of(const Block16& source, const Block16& prediction) {
  Residual r{};
  for (int k = 0; k < kMbPixels; ++k) r[k] = static_cast<std::int16_t>(int{source[k]} - int{prediction[k]});
  return r;
}

Block16 add_residual(const Block16& prediction, const Coefficients& coeffs, int qstep) {
  if (all_zero(coeffs)) return prediction;
  const Residual r = dequantize_inverse(coeffs, qstep);
  Block16 out{};
  for (int k = 0; k < kMbPixels; ++k) out[k] = static_cast<std::uint8_t>(std::clamp(int{prediction[k]} + r[k], 0, 255));
  return out;
}

Candidate make_candidate(const RpsDecision& decision, const Block16& source, const Block16& prediction, int qstep,
                         int t) {
  Candidate c;
  c.decision = decision;
  if (decision.mode != Mode::kSkip) c.residual = forward_quantize(residual_of(source, prediction), qstep);
  c.recon = add_residual(prediction, c.residual, qstep);
  c.distortion = block_mad(c.recon, source);
  c.bits = rate_model(decision, c.residual, t);
  return c;
}

Block16 filled_block(std::uint8_t v) {
  Block16 b;
  b.fill(v);
  return b;
}

}  // namespace

MotionSearchResult full_search(const FramePlane& src, int mb, const FramePlane& ref, int search_range) {
  const auto [top, left] = mb_origin(src, mb);
  const int y_lo = std::max(-search_range, -top);
  const int y_hi = std::min(search_range, ref.height() - kMbSize - top);
  const int x_lo = std::max(-search_range, -left);
  const int x_hi = std::min(search_range, ref.width() - kMbSize - left);
  MotionSearchResult best{{0, 0}, block_sad(src, top, left, ref, 0, 0)};
  for (int dy = y_lo; dy <= y_hi; ++dy) {
    for (int dx = x_lo; dx <= x_hi; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const int sad = block_sad_bounded(src, top, left, ref, dy, dx, best.sad);
      if (sad <= best.sad && better_vector(sad, {dx, dy}, best.sad, best.mv)) best = {{dx, dy}, sad};
    }
  }
  return best;
}

int intra_dc_predictor(const FramePlane& recon, int mb, std::span<const Mode> modes,
                       const std::vector<MbRange>& slices) {
  const int cols = recon.mb_cols();
  const auto [top, left] = mb_origin(recon, mb);
  const int slice = slice_of(slices, mb);
  int sum = 0;
  int count = 0;
  auto usable = [&](int n) {
    return n >= 0 && n < mb && modes[static_cast<std::size_t>(n)] == Mode::kIntra && slice_of(slices, n) == slice;
  };
  if (mb % cols != 0 && usable(mb - 1)) {
    for (int y = 0; y < kMbSize; ++y) sum += recon.at(top + y, left - 1);
    count += kMbSize;
  }
  if (mb >= cols && usable(mb - cols)) {
    for (int x = 0; x < kMbSize; ++x) sum += recon.at(top - 1, left + x);
    count += kMbSize;
  }
  if (count == 0) return 128;
  return (sum + count / 2) / count;
}

std::vector<Candidate> inter_candidates(const FramePlane& source, int mb, const ReferenceWindow& refs,
                                        const CodecParams& params) {
  const int t = refs.current();
  if (refs.empty()) {
    if (t > 0) throw std::invalid_argument("candidate_search: empty reference buffer at t > 0");
    return {};
  }
  const auto [top, left] = mb_origin(source, mb);
  const Block16 src = extract_block(source, top, left);
  std::vector<Candidate> out;
  if (const FramePlane* prev = refs.find(t - 1)) {
    out.push_back(make_candidate(RpsDecision::skip(t), src, extract_block(*prev, top, left), params.qstep, t));
  }
  for (const auto& [frame, plane] : refs.frames()) {
    if (t - frame > params.ref_window) continue;
    out.push_back(make_candidate(RpsDecision::inter(frame, {}), src, extract_block(*plane, top, left), params.qstep, t));
    const MotionSearchResult best = full_search(source, mb, *plane, params.search_range);
    if (best.mv.magnitude() != 0) {
      out.push_back(make_candidate(RpsDecision::inter(frame, best.mv), src,
                                   extract_block(*plane, top + best.mv.dy, left + best.mv.dx), params.qstep, t));
    }
  }
  return out;
}

Candidate intra_candidate(const Block16& source, int dc_predictor, int qstep) {
  return make_candidate(RpsDecision::intra(), source, filled_block(static_cast<std::uint8_t>(dc_predictor)), qstep, 0);
}

std::vector<Candidate> candidate_search(const FramePlane& source, int mb, const ReferenceWindow& refs,
                                        const CodecParams& params, int dc_predictor) {
  auto out = inter_candidates(source, mb, refs, params);
  const auto [top, left] = mb_origin(source, mb);
  out.push_back(intra_candidate(extract_block(source, top, left), dc_predictor, params.qstep));
  return out;
}

Block16 prediction_block(const RpsDecision& decision, int mb, int width, int height, const ReferenceWindow& refs,
                         int dc_predictor) {
  if (decision.mode == Mode::kIntra) return filled_block(static_cast<std::uint8_t>(dc_predictor));
  const int cols = width / kMbSize;
  const int top = (mb / cols) * kMbSize;
  const int left = (mb % cols) * kMbSize;
  const int ref_frame = decision.mode == Mode::kSkip ? refs.current() - 1 : decision.ref_frame;
  const MotionVector mv = decision.mode == Mode::kSkip ? MotionVector{} : decision.mv;
  const FramePlane* ref = refs.find(ref_frame);
  if (ref == nullptr) {
    throw std::invalid_argument("reference frame " + std::to_string(ref_frame) + " is outside the window");
  }
  if (ref->width() != width || ref->height() != height) throw std::invalid_argument("reference size mismatch");
  check_in_frame(*ref, top, left, mv);
  return extract_block(*ref, top + mv.dy, left + mv.dx);
}

Block16 reconstruct_block(const RpsDecision& decision, const Coefficients& residual, int mb, int width,
                          int height, const ReferenceWindow& refs, int dc_predictor, int qstep) {
  const Block16 prediction = prediction_block(decision, mb, width, height, refs, dc_predictor);
  if (decision.mode == Mode::kSkip) return prediction;
  return add_residual(prediction, residual, qstep);
}

Block16 conceal_block(int mb, const FramePlane* previous_reconstruction) {
  if (previous_reconstruction == nullptr) return filled_block(128);
  const auto [top, left] = mb_origin(*previous_reconstruction, mb);
  return extract_block(*previous_reconstruction, top, left);
}

int EncodedPlane::total_bits() const {
  int bits = 0;
  for (const auto& m : mbs) bits += m.bits;
  return bits;
}

FramePlane decode_plane(const EncodedPlane& encoded, int width, int height, const std::vector<MbRange>& slices,
                        std::span<const std::uint8_t> lost, const ReferenceWindow& refs, const FramePlane* previous,
                        int qstep) {
  FramePlane out(width, height);
  const int count = out.mb_count();
  if (static_cast<int>(encoded.mbs.size()) != count || static_cast<int>(lost.size()) != count) {
    throw std::invalid_argument("decode_plane: macroblock count mismatch");
  }
  std::vector<Mode> modes(static_cast<std::size_t>(count), Mode::kSkip);
  for (int mb = 0; mb < count; ++mb) {
    const auto [top, left] = mb_origin(out, mb);
    Block16 block;
    if (lost[static_cast<std::size_t>(mb)]) {
      // Concealed blocks never serve as intra neighbours.
      block = conceal_block(mb, previous);
    } else {
      const auto& rec = encoded.mbs[static_cast<std::size_t>(mb)];
      const int dc = rec.decision.mode == Mode::kIntra ? intra_dc_predictor(out, mb, modes, slices) : 128;
      block = reconstruct_block(rec.decision, rec.residual, mb, width, height, refs, dc, qstep);
      modes[static_cast<std::size_t>(mb)] = rec.decision.mode;
    }
    store_block(out, top, left, block);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bitstream container

namespace {

constexpr char kMagic[4] = {'F', 'V', 'S', 'B'};

template <typename T>
void put(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t k = 0; k < sizeof(T); ++k) bytes[k] = static_cast<unsigned char>((u >> (8 * k)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("read_bitstream: truncated stream");
  std::make_unsigned_t<T> u = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) u |= static_cast<std::make_unsigned_t<T>>(bytes[k]) << (8 * k);
  return static_cast<T>(u);
}

}  // namespace

void write_bitstream(const std::filesystem::path& path, const BitstreamHeader& header,
                     std::span<const EncodedPlane> planes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_bitstream: cannot open " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kBitstreamVersion);
  put<std::int32_t>(out, header.width);
  put<std::int32_t>(out, header.height);
  put<std::int32_t>(out, header.qstep);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(planes.size()));
  for (const auto& plane : planes) {
    put<std::int32_t>(out, plane.frame);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(plane.view));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(plane.component));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(plane.mbs.size()));
    for (const auto& mb : plane.mbs) {
      put<std::uint8_t>(out, static_cast<std::uint8_t>(mb.decision.mode));
      put<std::int32_t>(out, mb.decision.ref_frame);
      put<std::int16_t>(out, static_cast<std::int16_t>(mb.decision.mv.dx));
      put<std::int16_t>(out, static_cast<std::int16_t>(mb.decision.mv.dy));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(mb.bits));
      std::uint16_t nonzero = 0;
      for (auto c : mb.residual) nonzero += c != 0 ? 1 : 0;
      put<std::uint16_t>(out, nonzero);
      for (std::size_t k = 0; k < mb.residual.size(); ++k) {
        if (mb.residual[k] == 0) continue;
        put<std::uint8_t>(out, static_cast<std::uint8_t>(k));
        put<std::int16_t>(out, mb.residual[k]);
      }
    }
  }
  if (!out) throw std::runtime_error("write_bitstream: write failed for " + path.string());
}

std::vector<EncodedPlane> read_bitstream(const std::filesystem::path& path, BitstreamHeader& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_bitstream: cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("read_bitstream: bad magic");
  if (get<std::uint32_t>(in) != kBitstreamVersion) throw std::runtime_error("read_bitstream: unsupported version");
  header.width = get<std::int32_t>(in);
  header.height = get<std::int32_t>(in);
  header.qstep = get<std::int32_t>(in);
  const auto plane_count = get<std::uint32_t>(in);
  std::vector<EncodedPlane> planes;
  planes.reserve(plane_count);
  for (std::uint32_t p = 0; p < plane_count; ++p) {
    EncodedPlane plane;
    plane.frame = get<std::int32_t>(in);
    plane.view = get<std::uint8_t>(in);
    const auto component = get<std::uint8_t>(in);
    if (component > 1) throw std::runtime_error("read_bitstream: bad component");
    plane.component = static_cast<Component>(component);
    const auto mb_count = get<std::uint32_t>(in);
    plane.mbs.resize(mb_count);
    for (auto& mb : plane.mbs) {
      const auto mode = get<std::uint8_t>(in);
      if (mode > 2) throw std::runtime_error("read_bitstream: bad mode");
      mb.decision.mode = static_cast<Mode>(mode);
      mb.decision.ref_frame = get<std::int32_t>(in);
      mb.decision.mv.dx = get<std::int16_t>(in);
      mb.decision.mv.dy = get<std::int16_t>(in);
      mb.bits = static_cast<int>(get<std::uint32_t>(in));
      const auto nonzero = get<std::uint16_t>(in);
      for (std::uint16_t k = 0; k < nonzero; ++k) {
        const auto pos = get<std::uint8_t>(in);
        mb.residual[pos] = get<std::int16_t>(in);
      }
    }
    planes.push_back(std::move(plane));
  }
  return planes;
}

}  // namespace fvs
