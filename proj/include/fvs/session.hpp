#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fvs/channel.hpp"
#include "fvs/codec.hpp"
#include "fvs/dibr.hpp"
#include "fvs/error_tracker.hpp"
#include "fvs/rps.hpp"
#include "fvs/sensitivity.hpp"

namespace fvs {

enum class Setup { kRfc, kRps1, kRps2, kArps };

const char* setup_name(Setup s);
Setup parse_setup(const std::string& name);
RpsMode setup_mode(Setup s);
BlendMode setup_blend(Setup s);

struct CodingConfig {
  int width = 0;
  int height = 0;
  CodecParams texture{16, 8, 10};
  CodecParams depth{16, 8, 2};
  int texture_packets = 12;  // clamped to the macroblock count
  int depth_packets = 4;
  int rtt_frames = 4;
  double loss_rate = 0.0;  // the encoder's belief about the channel
  double gamma = kDefaultAttenuation;
  double eta = 1.0;
  SensitivityParams sensitivity;
  bool frame0_lossless = true;
  double rate_band = 0.05;
  double initial_lambda = 0.05;
  int lambda_retries = 8;

  int mb_count() const { return (width / kMbSize) * (height / kMbSize); }
  std::vector<MbRange> slices(Component c) const;
  int packets(Component c) const;
  const CodecParams& codec(Component c) const { return c == Component::kTexture ? texture : depth; }
};

struct EncodedFramePair {
  int t = 0;
  std::array<std::array<EncodedPlane, 2>, 2> planes;  // [view][component]
  std::array<std::array<std::vector<double>, 2>, 2> dbar;
  std::array<std::array<std::vector<double>, 2>, 2> d;
  int bits = 0;
  double lambda = 0.0;
  std::optional<int> target_bits;
  bool in_band = true;
};

class Sender {
 public:
  Sender(RpsMode mode, const CodingConfig& config);

  // Encodes frame t of both views. With a target the lambda ladder is run
  // against it; otherwise the current lambda is used as is.
  EncodedFramePair encode(int t, const ViewFrame& left, const ViewFrame& right, const FeedbackState& feedback,
                          std::optional<int> target_bits);

  RpsMode mode() const { return mode_; }
  double lambda() const { return lambda_; }
  const ExpectedErrorTracker& expected(int view, Component c) const;
  const FramePlane& reconstruction(int view, Component c, int t) const;

 private:
  struct PlaneState {
    ExpectedErrorTracker expected;
    std::map<int, FramePlane> recon;
    std::map<int, std::vector<std::uint8_t>> nacked;
    std::map<int, std::vector<std::uint8_t>> taint;
  };

  PlaneState& plane(int view, Component c) { return planes_[static_cast<std::size_t>(view * 2 + static_cast<int>(c))]; }
  const PlaneState& plane(int view, Component c) const {
    return planes_[static_cast<std::size_t>(view * 2 + static_cast<int>(c))];
  }
  void apply_feedback(int t, const FeedbackState& feedback);
  double delivery_probability(int t) const;

  RpsMode mode_;
  CodingConfig config_;
  double lambda_;
  int feedback_through_ = -1;
  std::vector<PlaneState> planes_;
};

struct ReceivedFrame {
  int t = 0;
  std::array<std::array<FramePlane, 2>, 2> decoded;                 // [view][component]
  std::array<std::array<std::vector<double>, 2>, 2> tracked;        // decoder error per MB
  std::array<std::array<std::vector<std::uint8_t>, 2>, 2> lost;     // per MB
  int lost_packets = 0;
};

class Receiver {
 public:
  explicit Receiver(const CodingConfig& config);

  ReceivedFrame receive(const EncodedFramePair& frame, const LossTrace& trace);

  const ErrorLattice& tracked(int view, Component c) const;

 private:
  struct PlaneState {
    ErrorLattice lattice;
    std::map<int, FramePlane> decoded;
  };

  PlaneState& plane(int view, Component c) { return planes_[static_cast<std::size_t>(view * 2 + static_cast<int>(c))]; }

  CodingConfig config_;
  std::vector<PlaneState> planes_;
};

// Middle-view synthesis from a received frame. Adaptive blending reads the
// tracked errors.
FramePlane synthesize_received(const ReceivedFrame& frame, const SynthesisParams& params);

}  // namespace fvs
