#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fvs {

enum class Component : int { kTexture = 0, kDepth = 1 };

const char* component_name(Component c);
Component parse_component(const std::string& name);

struct PacketId {
  int frame = 0;
  int view = 0;
  Component component = Component::kTexture;
  int packet = 0;

  auto operator<=>(const PacketId&) const = default;
};

// Identifies the pseudo-random generator and the way its output is mapped to
// loss events. Bumped whenever either changes, so old traces stay replayable.
inline constexpr const char* kTracePrngName = "mt19937_64/u53-v1";

struct LossTrace {
  std::uint64_t seed = 0;
  double loss_rate = 0.0;
  std::vector<std::pair<PacketId, bool>> entries;  // schedule order; true = lost

  // Throws std::out_of_range for a packet that was never scheduled.
  bool is_lost(const PacketId& id) const;
  std::size_t lost_count() const;

  void build_index() const;

 private:
  mutable std::map<PacketId, bool> index_;
};

// Each scheduled packet is lost independently with probability `loss_rate`.
LossTrace make_iid_trace(std::uint64_t seed, double loss_rate, const std::vector<PacketId>& schedule);

// Transmission order: frame, then view, then texture before depth, then slice.
std::vector<PacketId> make_schedule(int frame_count, int texture_packets, int depth_packets);

// Half-open range [begin, end) of raster-order macroblock indices.
struct MbRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool contains(int mb) const { return mb >= begin && mb < end; }
  bool operator==(const MbRange&) const = default;
};

// Contiguous raster-order slices; the first (mb_count % packets) slices carry
// one extra macroblock.
std::vector<MbRange> packetize(int mb_count, int packets_per_frame);

// Index of the slice carrying `mb`.
int slice_of(const std::vector<MbRange>& slices, int mb);

enum class DeliveryStatus { kAck, kNack };

struct FeedbackState {
  int current_frame = 0;
  int rtt_frames = 0;
  std::map<PacketId, DeliveryStatus> known;

  // Newest frame whose statuses are known, or -1.
  int newest_known_frame() const { return current_frame - rtt_frames; }
  std::optional<DeliveryStatus> status(const PacketId& id) const;
};

FeedbackState feedback_at(const LossTrace& trace, int t, int rtt_frames);

// Text trace: a '#' header with generator metadata, then one
// `frame view component packet lost` line per packet in schedule order.
void write_trace(const LossTrace& trace, const std::filesystem::path& path);
LossTrace read_trace(const std::filesystem::path& path);

}  // namespace fvs
