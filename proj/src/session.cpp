#include "fvs/session.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace fvs {

const char* setup_name(Setup s) {
  switch (s) {
    case Setup::kRfc:
      return "RFC";
    case Setup::kRps1:
      return "RPS1";
    case Setup::kRps2:
      return "RPS2";
    case Setup::kArps:
      return "ARPS";
  }
  return "?";
}

Setup parse_setup(const std::string& name) {
  for (Setup s : {Setup::kRfc, Setup::kRps1, Setup::kRps2, Setup::kArps}) {
    if (name == setup_name(s)) return s;
  }
  throw std::invalid_argument("unknown setup '" + name + "' (expected RFC, RPS1, RPS2 or ARPS)");
}

RpsMode setup_mode(Setup s) {
  switch (s) {
    case Setup::kRfc:
      return RpsMode::kReactive;
    case Setup::kRps1:
      return RpsMode::kIndependent;
    default:
      return RpsMode::kCrossView;
  }
}

BlendMode setup_blend(Setup s) { return s == Setup::kArps ? BlendMode::kAdaptive : BlendMode::kStandard; }

int CodingConfig::packets(Component c) const {
  const int configured = c == Component::kTexture ? texture_packets : depth_packets;
  return std::min(configured, mb_count());
}

std::vector<MbRange> CodingConfig::slices(Component c) const { return packetize(mb_count(), packets(c)); }

namespace {

constexpr std::array<Component, 2> kComponents{Component::kTexture, Component::kDepth};

const FramePlane& source_plane(const ViewFrame& f, Component c) {
  return c == Component::kTexture ? f.texture : f.disparity;
}

double mad_against_grey(const FramePlane& a, int mb) {
  const auto [top, left] = mb_origin(a, mb);
  Block16 grey;
  grey.fill(128);
  return block_mad(extract_block(a, top, left), grey);
}

ReferenceWindow window_of(const std::map<int, FramePlane>& history, int t, int window) {
  ReferenceWindow refs(t);
  for (const auto& [f, plane] : history) {
    if (f < t && t - f <= window) refs.add(f, &plane);
  }
  return refs;
}

void prune(std::map<int, FramePlane>& history, int keep_from) {
  history.erase(history.begin(), history.lower_bound(keep_from));
}

}  // namespace

Sender::Sender(RpsMode mode, const CodingConfig& config)
    : mode_(mode), config_(config), lambda_(config.initial_lambda) {
  if (config.width <= 0 || config.height <= 0) throw std::invalid_argument("Sender: frame size not configured");
  if (!(config.initial_lambda > 0.0)) throw std::invalid_argument("Sender: lambda must be positive");
  const int cols = config.width / kMbSize;
  const int rows = config.height / kMbSize;
  for (int k = 0; k < 4; ++k) planes_.push_back({ExpectedErrorTracker(cols, rows, config.gamma), {}, {}, {}});
}

const ExpectedErrorTracker& Sender::expected(int view, Component c) const { return plane(view, c).expected; }

const FramePlane& Sender::reconstruction(int view, Component c, int t) const { return plane(view, c).recon.at(t); }

double Sender::delivery_probability(int t) const {
  if (t == 0 && config_.frame0_lossless) return 1.0;
  return 1.0 - config_.loss_rate;
}

void Sender::apply_feedback(int t, const FeedbackState& feedback) {
  const int newest = std::min(feedback.newest_known_frame(), t - 1);
  if (newest <= feedback_through_) return;
  const int first = feedback_through_ + 1;
  const int cols = config_.width / kMbSize;
  const int rows = config_.height / kMbSize;
  for (int f = first; f <= newest; ++f) {
    for (int view = 0; view < 2; ++view) {
      for (Component c : kComponents) {
        PlaneState& ps = plane(view, c);
        const auto slices = config_.slices(c);
        std::vector<std::uint8_t> nack(static_cast<std::size_t>(config_.mb_count()), 0);
        std::vector<double> p(nack.size(), 1.0);
        for (std::size_t s = 0; s < slices.size(); ++s) {
          const auto status = feedback.status({f, view, c, static_cast<int>(s)});
          if (!status) throw std::logic_error("Sender: feedback missing for a frame older than the RTT");
          if (*status == DeliveryStatus::kAck) continue;
          for (int mb = slices[s].begin; mb < slices[s].end; ++mb) {
            nack[static_cast<std::size_t>(mb)] = 1;
            p[static_cast<std::size_t>(mb)] = 0.0;
          }
        }
        ps.expected.rewrite(f, std::move(p));
        ps.nacked[f] = std::move(nack);
      }
    }
  }
  feedback_through_ = newest;
  if (mode_ != RpsMode::kReactive) return;
  for (int view = 0; view < 2; ++view) {
    for (Component c : kComponents) {
      PlaneState& ps = plane(view, c);
      for (int f = first; f < t; ++f) {
        auto it = ps.nacked.find(f);
        std::span<const std::uint8_t> nack;
        if (it != ps.nacked.end()) nack = it->second;
        ps.taint[f] = propagate_taint(f, ps.expected.decisions(f), nack, ps.taint, cols, rows);
      }
    }
  }
}

EncodedFramePair Sender::encode(int t, const ViewFrame& left, const ViewFrame& right, const FeedbackState& feedback,
                                std::optional<int> target_bits) {
  left.validate();
  right.validate();
  if (left.texture.width() != config_.width || left.texture.height() != config_.height) {
    throw std::invalid_argument("Sender: frame size does not match the configuration");
  }
  if (t != plane(0, Component::kTexture).expected.last_frame() + 1) {
    throw std::invalid_argument("Sender: frames must be encoded in order");
  }
  apply_feedback(t, feedback);

  const std::array<const ViewFrame*, 2> frames{&left, &right};
  const int count = config_.mb_count();
  const int cols = config_.width / kMbSize;
  const int rows = config_.height / kMbSize;
  const double p = delivery_probability(t);

  std::array<std::array<std::vector<double>, 2>, 2> delta;
  std::array<std::array<PlaneInputs, 2>, 2> inputs;
  for (int view = 0; view < 2; ++view) {
    for (Component c : kComponents) {
      const auto ci = static_cast<std::size_t>(c);
      PlaneState& ps = plane(view, c);
      const FramePlane& src = source_plane(*frames[static_cast<std::size_t>(view)], c);
      auto& dv = delta[static_cast<std::size_t>(view)][ci];
      dv.resize(static_cast<std::size_t>(count));
      const auto prev = ps.recon.find(t - 1);
      for (int mb = 0; mb < count; ++mb) {
        dv[static_cast<std::size_t>(mb)] =
            prev != ps.recon.end() ? colocated_mad(src, prev->second, mb) : mad_against_grey(src, mb);
      }
      const ReferenceWindow refs = window_of(ps.recon, t, config_.codec(c).ref_window);
      ExpectedErrorInputs model;
      if (mode_ != RpsMode::kReactive) model = {&ps.expected.lattice(), p, dv, config_.gamma};
      CandidateFilter filter;
      if (mode_ == RpsMode::kReactive) {
        filter = [&ps, t, cols, rows](const RpsDecision& d, int mb) {
          return !reference_tainted(d, t, mb, ps.taint, cols, rows);
        };
      }
      inputs[static_cast<std::size_t>(view)][ci] =
          prepare_plane(src, refs, config_.codec(c), config_.slices(c), model, filter);
    }
  }

  std::array<ViewInputs, 2> views;
  std::array<std::vector<double>, 2> curvature;
  if (mode_ != RpsMode::kReactive && t > 0) {
    for (int view = 0; view < 2; ++view) {
      const int other = 1 - view;
      const SensitivityInput in{plane(view, Component::kTexture).recon.at(t - 1),
                                plane(view, Component::kDepth).recon.at(t - 1),
                                plane(other, Component::kTexture).recon.at(t - 1),
                                view == 0 ? ViewId::kLeft : ViewId::kRight, config_.eta};
      curvature[static_cast<std::size_t>(view)] = curvature_map(in, config_.sensitivity);
    }
  }
  for (int view = 0; view < 2; ++view) {
    const auto vs = static_cast<std::size_t>(view);
    ViewInputs& vin = views[vs];
    vin.planes = {&inputs[vs][0], &inputs[vs][1]};
    vin.curvature = curvature[vs];
    if (mode_ != RpsMode::kCrossView || t == 0) continue;
    const int other = 1 - view;
    vin.correspondences = build_correspondences(plane(view, Component::kDepth).recon.at(t - 1),
                                                plane(other, Component::kDepth).recon.at(t - 1),
                                                view == 0 ? ViewId::kLeft : ViewId::kRight, config_.eta);
    const OpposingState opp{plane(other, Component::kTexture).expected.lattice().at(t - 1),
                            plane(other, Component::kDepth).expected.lattice().at(t - 1),
                            curvature[static_cast<std::size_t>(other)]};
    vin.opposing.assign(static_cast<std::size_t>(count), 0.0);
    for (int mb = 0; mb < count; ++mb) {
      const auto m = static_cast<std::size_t>(mb);
      if (!vin.correspondences.linked[m]) continue;
      vin.opposing[m] = opposing_term(vin.correspondences.covering[m], opp, delta[vs][0][m]);
    }
  }

  double lam = lambda_;
  FramePairOutcome chosen;
  double chosen_lambda = lam;
  bool in_band = true;
  if (!target_bits) {
    chosen = optimize_frame_pair(views, lam, mode_);
  } else {
    LambdaBracket bracket;
    bool have = false;
    for (int attempt = 0; attempt <= config_.lambda_retries; ++attempt) {
      FramePairOutcome out = optimize_frame_pair(views, lam, mode_);
      const int bits = out.bits;
      const bool ok = within_band(bits, *target_bits, config_.rate_band);
      if (!have || ok || std::abs(bits - *target_bits) < std::abs(chosen.bits - *target_bits)) {
        chosen = std::move(out);
        chosen_lambda = lam;
        have = true;
      }
      if (ok) break;
      lam = tune_lambda(lam, bits, *target_bits, config_.rate_band, bracket);
    }
    in_band = within_band(chosen.bits, *target_bits, config_.rate_band);
  }
  lambda_ = chosen_lambda;

  EncodedFramePair result;
  result.t = t;
  result.bits = chosen.bits;
  result.lambda = chosen_lambda;
  result.target_bits = target_bits;
  result.in_band = in_band;
  for (int view = 0; view < 2; ++view) {
    for (Component c : kComponents) {
      const auto vs = static_cast<std::size_t>(view);
      const auto ci = static_cast<std::size_t>(c);
      PlaneOutcome& po = chosen.planes[vs][ci];
      PlaneState& ps = plane(view, c);
      std::vector<RpsDecision> decisions;
      decisions.reserve(po.encoded.mbs.size());
      for (const auto& rec : po.encoded.mbs) decisions.push_back(rec.decision);
      ps.expected.commit(t, decisions, delta[vs][ci], std::vector<double>(static_cast<std::size_t>(count), p));
      if (mode_ == RpsMode::kReactive) {
        ps.taint[t] = propagate_taint(t, decisions, {}, ps.taint, cols, rows);
      }
      ps.recon[t] = std::move(po.recon);
      prune(ps.recon, t - config_.codec(c).ref_window);
      result.planes[vs][ci] = std::move(po.encoded);
      result.dbar[vs][ci] = std::move(po.dbar);
      result.d[vs][ci] = std::move(po.d);
    }
  }
  return result;
}

Receiver::Receiver(const CodingConfig& config) : config_(config) {
  for (int k = 0; k < 4; ++k) planes_.push_back({ErrorLattice(config.mb_count()), {}});
}

const ErrorLattice& Receiver::tracked(int view, Component c) const {
  return planes_[static_cast<std::size_t>(view * 2 + static_cast<int>(c))].lattice;
}

ReceivedFrame Receiver::receive(const EncodedFramePair& frame, const LossTrace& trace) {
  const int t = frame.t;
  const int count = config_.mb_count();
  const int cols = config_.width / kMbSize;
  const int rows = config_.height / kMbSize;
  ReceivedFrame out;
  out.t = t;

  for (int view = 0; view < 2; ++view) {
    for (Component c : kComponents) {
      const auto vs = static_cast<std::size_t>(view);
      const auto ci = static_cast<std::size_t>(c);
      PlaneState& ps = plane(view, c);
      const auto slices = config_.slices(c);
      auto& lost = out.lost[vs][ci];
      lost.assign(static_cast<std::size_t>(count), 0);
      for (std::size_t s = 0; s < slices.size(); ++s) {
        if (!trace.is_lost({t, view, c, static_cast<int>(s)})) continue;
        ++out.lost_packets;
        for (int mb = slices[s].begin; mb < slices[s].end; ++mb) lost[static_cast<std::size_t>(mb)] = 1;
      }
      const ReferenceWindow refs = window_of(ps.decoded, t, config_.codec(c).ref_window);
      const auto prev = ps.decoded.find(t - 1);
      out.decoded[vs][ci] = decode_plane(frame.planes[vs][ci], config_.width, config_.height, slices, lost, refs,
                                         prev != ps.decoded.end() ? &prev->second : nullptr, config_.codec(c).qstep);
    }
  }

  // e+ of every texture block, needed by the cross-view rule of the other view.
  std::array<std::vector<double>, 2> texture_plus;
  for (int view = 0; view < 2; ++view) {
    const auto vs = static_cast<std::size_t>(view);
    const auto& mbs = frame.planes[vs][0].mbs;
    auto& plus = texture_plus[vs];
    plus.resize(static_cast<std::size_t>(count));
    for (int mb = 0; mb < count; ++mb) {
      plus[static_cast<std::size_t>(mb)] =
          e_plus(mbs[static_cast<std::size_t>(mb)].decision, t, mb, cols, rows, plane(view, Component::kTexture).lattice,
                 config_.gamma);
    }
  }

  std::array<std::array<std::vector<double>, 2>, 2> deltas;
  for (int view = 0; view < 2; ++view) {
    for (Component c : kComponents) {
      const auto vs = static_cast<std::size_t>(view);
      const auto ci = static_cast<std::size_t>(c);
      PlaneState& ps = plane(view, c);
      auto find = [&](int f) -> const FramePlane* {
        auto it = ps.decoded.find(f);
        return it == ps.decoded.end() ? nullptr : &it->second;
      };
      DeltaContext ctx;
      ctx.t = t;
      ctx.current = &out.decoded[vs][ci];
      ctx.previous = find(t - 1);
      ctx.before_previous = find(t - 2);
      ctx.lost = out.lost[vs][ci];
      ctx.disparity = &out.decoded[vs][1];
      const int other = 1 - view;
      const auto os = static_cast<std::size_t>(other);
      CrossViewEvidence evidence{&out.decoded[os][0], &out.decoded[os][1], out.lost[os][0], texture_plus[os],
                                 other == 0 ? ViewId::kLeft : ViewId::kRight, config_.eta};
      auto& dv = deltas[vs][ci];
      dv.assign(static_cast<std::size_t>(count), 0.0);
      for (int mb = 0; mb < count; ++mb) {
        if (!out.lost[vs][ci][static_cast<std::size_t>(mb)]) continue;
        if (c == Component::kDepth) {
          dv[static_cast<std::size_t>(mb)] = delta_temporal(ctx, mb);
        } else {
          dv[static_cast<std::size_t>(mb)] =
              estimate_delta_decoder(ctx, mb, ps.lattice.value_or_zero(t - 1, mb), &evidence);
        }
      }
    }
  }

  for (int view = 0; view < 2; ++view) {
    for (Component c : kComponents) {
      const auto vs = static_cast<std::size_t>(view);
      const auto ci = static_cast<std::size_t>(c);
      PlaneState& ps = plane(view, c);
      std::vector<RpsDecision> decisions;
      for (const auto& rec : frame.planes[vs][ci].mbs) decisions.push_back(rec.decision);
      std::vector<double> p(static_cast<std::size_t>(count));
      for (int mb = 0; mb < count; ++mb) p[static_cast<std::size_t>(mb)] = out.lost[vs][ci][static_cast<std::size_t>(mb)] ? 0.0 : 1.0;
      ps.lattice.set(t, track_plane(t, decisions, p, deltas[vs][ci], ps.lattice, cols, rows, config_.gamma));
      out.tracked[vs][ci] = ps.lattice.at(t);
      ps.decoded[t] = out.decoded[vs][ci];
      prune(ps.decoded, t - std::max(config_.codec(c).ref_window, 2));
    }
  }
  return out;
}

FramePlane synthesize_received(const ReceivedFrame& frame, const SynthesisParams& params) {
  const StereoPlanes views{frame.decoded[0][0], frame.decoded[0][1], frame.decoded[1][0], frame.decoded[1][1]};
  const ViewErrors left{frame.tracked[0][0], frame.tracked[0][1]};
  const ViewErrors right{frame.tracked[1][0], frame.tracked[1][1]};
  return synthesize(views, params, left, right);
}

}  // namespace fvs
