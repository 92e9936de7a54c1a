#include "fvs/channel.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fvs {

const char* component_name(Component c) { return c == Component::kTexture ? "texture" : "depth"; }

Component parse_component(const std::string& name) {
  if (name == "texture" || name == "0") return Component::kTexture;
  if (name == "depth" || name == "1") return Component::kDepth;
  throw std::invalid_argument("unknown component '" + name + "'");
}

void LossTrace::build_index() const {
  index_.clear();
  for (const auto& [id, lost] : entries) index_.emplace(id, lost);
}

bool LossTrace::is_lost(const PacketId& id) const {
  if (index_.size() != entries.size()) build_index();
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("LossTrace: packet was not scheduled");
  return it->second;
}

std::size_t LossTrace::lost_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.second ? 1 : 0;
  return n;
}

LossTrace make_iid_trace(std::uint64_t seed, double loss_rate, const std::vector<PacketId>& schedule) {
  if (!(loss_rate >= 0.0 && loss_rate <= 1.0)) throw std::invalid_argument("make_iid_trace: loss_rate outside [0,1]");
  LossTrace trace;
  trace.seed = seed;
  trace.loss_rate = loss_rate;
  std::mt19937_64 gen(seed);
  trace.entries.reserve(schedule.size());
  for (const auto& id : schedule) {
    // Top 53 bits give a uniform double in [0,1) independent of any
    // library distribution implementation.
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    trace.entries.emplace_back(id, u < loss_rate);
  }
  return trace;
}

std::vector<PacketId> make_schedule(int frame_count, int texture_packets, int depth_packets) {
  std::vector<PacketId> schedule;
  for (int t = 0; t < frame_count; ++t) {
    for (int view = 0; view < 2; ++view) {
      for (int p = 0; p < texture_packets; ++p) schedule.push_back({t, view, Component::kTexture, p});
      for (int p = 0; p < depth_packets; ++p) schedule.push_back({t, view, Component::kDepth, p});
    }
  }
  return schedule;
}

std::vector<MbRange> packetize(int mb_count, int packets_per_frame) {
  if (packets_per_frame < 1) throw std::invalid_argument("packetize: need at least one packet");
  if (packets_per_frame > mb_count) {
    throw std::invalid_argument("packetize: " + std::to_string(packets_per_frame) + " packets exceed " +
                                std::to_string(mb_count) + " macroblocks");
  }
  std::vector<MbRange> ranges;
  const int base = mb_count / packets_per_frame;
  const int extra = mb_count % packets_per_frame;
  int begin = 0;
  for (int p = 0; p < packets_per_frame; ++p) {
    const int size = base + (p < extra ? 1 : 0);
    ranges.push_back({begin, begin + size});
    begin += size;
  }
  return ranges;
}

int slice_of(const std::vector<MbRange>& slices, int mb) {
  for (std::size_t k = 0; k < slices.size(); ++k) {
    if (slices[k].contains(mb)) return static_cast<int>(k);
  }
  throw std::out_of_range("slice_of: macroblock outside every slice");
}

std::optional<DeliveryStatus> FeedbackState::status(const PacketId& id) const {
  auto it = known.find(id);
  if (it == known.end()) return std::nullopt;
  return it->second;
}

FeedbackState feedback_at(const LossTrace& trace, int t, int rtt_frames) {
  if (t < 0) throw std::invalid_argument("feedback_at: negative frame");
  if (rtt_frames < 0) throw std::invalid_argument("feedback_at: negative RTT");
  FeedbackState state;
  state.current_frame = t;
  state.rtt_frames = rtt_frames;
  const int cutoff = t - rtt_frames;
  for (const auto& [id, lost] : trace.entries) {
    if (id.frame <= cutoff) state.known.emplace(id, lost ? DeliveryStatus::kNack : DeliveryStatus::kAck);
  }
  return state;
}

void write_trace(const LossTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace: cannot open " + path.string());
  char rate[64];
  std::snprintf(rate, sizeof rate, "%.17g", trace.loss_rate);
  out << "# fvs-trace v1 prng=" << kTracePrngName << " seed=" << trace.seed << " loss_rate=" << rate << "\n";
  for (const auto& [id, lost] : trace.entries) {
    out << id.frame << ' ' << id.view << ' ' << component_name(id.component) << ' ' << id.packet << ' '
        << (lost ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("write_trace: write failed for " + path.string());
}

LossTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_trace: cannot open " + path.string());
  LossTrace trace;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream header(line.substr(1));
      std::string field;
      while (header >> field) {
        if (field.rfind("seed=", 0) == 0) trace.seed = std::stoull(field.substr(5));
        if (field.rfind("loss_rate=", 0) == 0) trace.loss_rate = std::stod(field.substr(10));
        if (field.rfind("prng=", 0) == 0 && field.substr(5) != kTracePrngName) {
          throw std::runtime_error("read_trace: unsupported generator " + field.substr(5));
        }
      }
      continue;
    }
    std::istringstream fields(line);
    PacketId id;
    std::string component;
    int lost = 0;
    if (!(fields >> id.frame >> id.view >> component >> id.packet >> lost) || (lost != 0 && lost != 1)) {
      throw std::runtime_error("read_trace: malformed line " + std::to_string(line_no) + " in " + path.string());
    }
    id.component = parse_component(component);
    trace.entries.emplace_back(id, lost == 1);
  }
  return trace;
}

}  // namespace fvs
