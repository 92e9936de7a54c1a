#include "fvs/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace fvs {

namespace {

std::string fmt(const char* pattern, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, value);
  return buf;
}

// Exact decimal form of a double; parsing it back yields the same value.
std::string exact(double value) { return fmt("%.17g", value); }

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

std::string cell_tag(double rate, std::uint64_t seed) { return "r" + fmt("%.3f", rate) + "_s" + std::to_string(seed); }

void ExperimentConfig::validate() const {
  scene.validate();
  if (setups.empty()) throw std::invalid_argument("config: at least one setup is required");
  if (loss_rates.empty()) throw std::invalid_argument("config: at least one loss rate is required");
  if (seeds.empty()) throw std::invalid_argument("config: at least one seed is required");
  for (double r : loss_rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("config: loss rates must lie in [0,1]");
  }
  if (rtt_frames < 0) throw std::invalid_argument("config: rtt_frames must be >= 0");
  SynthesisParams{v, static_cast<double>(scene.eta), c, BlendMode::kStandard}.validate();
  sensitivity.validate();
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("config: gamma must lie in (0,1]");
  if (texture_qstep < 1 || depth_qstep < 1) throw std::invalid_argument("config: quantizer steps must be >= 1");
  if (search_range < 0 || ref_window < 1) throw std::invalid_argument("config: invalid search or reference window");
  if (texture_packets < 1 || depth_packets < 1) throw std::invalid_argument("config: packet counts must be >= 1");
  if (!(rate_band > 0.0)) throw std::invalid_argument("config: rate_band must be positive");
  if (!(rfc_lambda > 0.0)) throw std::invalid_argument("config: rfc_lambda must be positive");
}

CodingConfig ExperimentConfig::coding(double loss_rate) const {
  CodingConfig cc;
  cc.width = scene.width;
  cc.height = scene.height;
  cc.texture = {search_range, ref_window, texture_qstep};
  cc.depth = {search_range, ref_window, depth_qstep};
  cc.texture_packets = texture_packets;
  cc.depth_packets = depth_packets;
  cc.rtt_frames = rtt_frames;
  cc.loss_rate = loss_rate;
  cc.gamma = gamma;
  cc.eta = scene.eta;
  cc.sensitivity = sensitivity;
  cc.frame0_lossless = frame0_lossless;
  cc.rate_band = rate_band;
  cc.initial_lambda = rfc_lambda;
  return cc;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  std::vector<std::string> setups;
  for (Setup s : c.setups) setups.emplace_back(setup_name(s));
  j = nlohmann::json{{"scene", c.scene},
                     {"setups", setups},
                     {"loss_rates", c.loss_rates},
                     {"seeds", c.seeds},
                     {"rtt_frames", c.rtt_frames},
                     {"v", c.v},
                     {"c", c.c},
                     {"threshold", c.sensitivity.threshold},
                     {"max_deviation", c.sensitivity.max_deviation},
                     {"gamma", c.gamma},
                     {"texture_qstep", c.texture_qstep},
                     {"depth_qstep", c.depth_qstep},
                     {"search_range", c.search_range},
                     {"ref_window", c.ref_window},
                     {"texture_packets", c.texture_packets},
                     {"depth_packets", c.depth_packets},
                     {"rate_band", c.rate_band},
                     {"rfc_lambda", c.rfc_lambda},
                     {"frame0_lossless", c.frame0_lossless},
                     {"output_dir", c.output_dir.string()},
                     {"write_frames", c.write_frames},
                     {"write_bitstreams", c.write_bitstreams},
                     {"write_debug", c.write_debug}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  static const char* kKnown[] = {"scene",         "setups",         "loss_rates",      "seeds",         "rtt_frames",
                                 "v",             "c",              "threshold",       "max_deviation", "gamma",
                                 "texture_qstep", "depth_qstep",    "search_range",    "ref_window",    "texture_packets",
                                 "depth_packets", "rate_band",      "rfc_lambda",      "frame0_lossless",
                                 "output_dir",    "write_frames",   "write_bitstreams", "write_debug"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(kKnown), std::end(kKnown), [&](const char* k) { return key == k; }) == std::end(kKnown)) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  if (j.contains("scene")) c.scene = j.at("scene").get<SyntheticSceneSpec>();
  if (j.contains("setups")) {
    c.setups.clear();
    for (const auto& s : j.at("setups")) c.setups.push_back(parse_setup(s.get<std::string>()));
  }
  if (j.contains("loss_rates")) c.loss_rates = j.at("loss_rates").get<std::vector<double>>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.rtt_frames = j.value("rtt_frames", c.rtt_frames);
  c.v = j.value("v", c.v);
  c.c = j.value("c", c.c);
  c.sensitivity.threshold = j.value("threshold", c.sensitivity.threshold);
  c.sensitivity.max_deviation = j.value("max_deviation", c.sensitivity.max_deviation);
  c.gamma = j.value("gamma", c.gamma);
  c.texture_qstep = j.value("texture_qstep", c.texture_qstep);
  c.depth_qstep = j.value("depth_qstep", c.depth_qstep);
  c.search_range = j.value("search_range", c.search_range);
  c.ref_window = j.value("ref_window", c.ref_window);
  c.texture_packets = j.value("texture_packets", c.texture_packets);
  c.depth_packets = j.value("depth_packets", c.depth_packets);
  c.rate_band = j.value("rate_band", c.rate_band);
  c.rfc_lambda = j.value("rfc_lambda", c.rfc_lambda);
  c.frame0_lossless = j.value("frame0_lossless", c.frame0_lossless);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  c.write_frames = j.value("write_frames", c.write_frames);
  c.write_bitstreams = j.value("write_bitstreams", c.write_bitstreams);
  c.write_debug = j.value("write_debug", c.write_debug);
}

namespace {

struct DecisionSink {
  std::ofstream out;
  explicit DecisionSink(const std::filesystem::path& path) : out(open_out(path)) {
    out << "t,view,component,mb,mode,ref,mvx,mvy,bits,Dbar,D\n";
  }
  void add(const EncodedFramePair& f) {
    for (int view = 0; view < 2; ++view) {
      for (int c = 0; c < 2; ++c) {
        const auto& plane = f.planes[static_cast<std::size_t>(view)][static_cast<std::size_t>(c)];
        const auto& dbar = f.dbar[static_cast<std::size_t>(view)][static_cast<std::size_t>(c)];
        const auto& d = f.d[static_cast<std::size_t>(view)][static_cast<std::size_t>(c)];
        for (std::size_t mb = 0; mb < plane.mbs.size(); ++mb) {
          const auto& rec = plane.mbs[mb];
          out << f.t << ',' << view << ',' << component_name(static_cast<Component>(c)) << ',' << mb << ','
              << mode_name(rec.decision.mode) << ',' << rec.decision.ref_frame << ',' << rec.decision.mv.dx << ','
              << rec.decision.mv.dy << ',' << rec.bits << ',' << fmt("%.6f", dbar[mb]) << ',' << fmt("%.6f", d[mb])
              << '\n';
        }
      }
    }
  }
};

std::vector<ErrorCsvRow> error_rows(const ReceivedFrame& r) {
  std::vector<ErrorCsvRow> rows;
  for (int view = 0; view < 2; ++view) {
    for (int c = 0; c < 2; ++c) {
      const auto& values = r.tracked[static_cast<std::size_t>(view)][static_cast<std::size_t>(c)];
      for (std::size_t mb = 0; mb < values.size(); ++mb) {
        rows.push_back({r.t, view, static_cast<Component>(c), static_cast<int>(mb), values[mb]});
      }
    }
  }
  return rows;
}

struct SetupSinks {
  Setup setup;
  std::vector<FrameRow> rows;
};

struct EncoderRunResult {
  std::vector<int> bits;
  int out_of_band = 0;
};

// Runs one encoder over the sequence; every receiver-side setup in `sinks`
// decodes the same stream and differs only in blending.
EncoderRunResult run_encoder(const ExperimentConfig& config, const SyntheticStereo& scene, const LossTrace& trace,
                             double rate, std::uint64_t seed, RpsMode mode, const std::vector<int>* reference_bits,
                             std::vector<SetupSinks>& sinks) {
  const CodingConfig cc = config.coding(rate);
  Sender sender(mode, cc);
  Receiver receiver(cc);
  const std::string tag = cell_tag(rate, seed);
  const bool debug = config.write_debug;
  std::optional<DecisionSink> decisions;
  std::vector<ErrorCsvRow> errors;
  if (debug) decisions.emplace(config.output_dir / "decisions" / (std::string(setup_name(sinks.front().setup)) + "_" + tag + ".csv"));
  std::vector<EncodedPlane> stream;

  EncoderRunResult result;
  long long own_total = 0;
  long long reference_total = 0;
  const int frames = static_cast<int>(scene.left.size());
  for (int t = 0; t < frames; ++t) {
    std::optional<int> target;
    if (reference_bits != nullptr) {
      const int ref = (*reference_bits)[static_cast<std::size_t>(t)];
      const double deficit = static_cast<double>(reference_total - own_total);
      const double wanted = std::clamp(ref + 0.5 * deficit, 0.5 * ref, 2.0 * ref);
      target = std::max(1, static_cast<int>(wanted + 0.5));
      reference_total += ref;
    }
    const EncodedFramePair enc = sender.encode(t, scene.left[static_cast<std::size_t>(t)],
                                               scene.right[static_cast<std::size_t>(t)],
                                               feedback_at(trace, t, cc.rtt_frames), target);
    own_total += enc.bits;
    result.bits.push_back(enc.bits);
    if (!enc.in_band) ++result.out_of_band;
    if (decisions) decisions->add(enc);
    if (config.write_bitstreams) {
      for (const auto& view : enc.planes) {
        for (const auto& plane : view) stream.push_back(plane);
      }
    }
    const ReceivedFrame rec = receiver.receive(enc, trace);
    if (debug) {
      auto rows = error_rows(rec);
      errors.insert(errors.end(), rows.begin(), rows.end());
    }
    for (auto& sink : sinks) {
      SynthesisParams sp{config.v, static_cast<double>(config.scene.eta), config.c, setup_blend(sink.setup)};
      const FramePlane synth = synthesize_received(rec, sp);
      sink.rows.push_back({sink.setup, rate, seed, t, psnr(synth, scene.middle_truth[static_cast<std::size_t>(t)]),
                           enc.bits, rec.lost_packets});
      if (config.write_frames) {
        save_plane(synth, config.output_dir / "frames" /
                              (std::string(setup_name(sink.setup)) + "_" + tag + "_f" + std::to_string(t) + ".pgm"));
      }
    }
  }
  for (std::size_t k = 1; k < sinks.size() && decisions; ++k) {
    decisions->out.flush();
    std::filesystem::copy_file(config.output_dir / "decisions" / (std::string(setup_name(sinks.front().setup)) + "_" + tag + ".csv"),
                               config.output_dir / "decisions" / (std::string(setup_name(sinks[k].setup)) + "_" + tag + ".csv"),
                               std::filesystem::copy_options::overwrite_existing);
  }
  if (debug) {
    for (const auto& sink : sinks) {
      write_error_csv(config.output_dir / "errors" / (std::string(setup_name(sink.setup)) + "_" + tag + ".csv"), errors);
    }
  }
  if (config.write_bitstreams) {
    const BitstreamHeader header{cc.width, cc.height, cc.texture.qstep};
    write_bitstream(config.output_dir / "bitstreams" / (std::string(setup_name(sinks.front().setup)) + "_" + tag + ".fvsb"),
                    header, stream);
  }
  return result;
}

bool wanted(const ExperimentConfig& config, Setup s) {
  return std::find(config.setups.begin(), config.setups.end(), s) != config.setups.end();
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ensure_dir(config.output_dir);
  if (config.write_debug) {
    ensure_dir(config.output_dir / "decisions");
    ensure_dir(config.output_dir / "errors");
    ensure_dir(config.output_dir / "traces");
  }
  if (config.write_frames) ensure_dir(config.output_dir / "frames");
  if (config.write_bitstreams) ensure_dir(config.output_dir / "bitstreams");

  const SyntheticStereo scene = generate_synthetic_stereo(config.scene);
  const CodingConfig base = config.coding(0.0);
  const auto schedule = make_schedule(config.scene.frame_count, base.packets(Component::kTexture),
                                      base.packets(Component::kDepth));

  ExperimentReport report;
  for (double rate : config.loss_rates) {
    for (std::uint64_t seed : config.seeds) {
      LossTrace trace = make_iid_trace(seed, rate, schedule);
      if (config.frame0_lossless) {
        for (auto& [id, lost] : trace.entries) {
          if (id.frame == 0) lost = false;
        }
        trace.build_index();
      }
      if (config.write_debug) write_trace(trace, config.output_dir / "traces" / ("trace_" + cell_tag(rate, seed) + ".txt"));

      std::vector<SetupSinks> rfc{{Setup::kRfc, {}}};
      const EncoderRunResult rfc_run = run_encoder(config, scene, trace, rate, seed, RpsMode::kReactive, nullptr, rfc);
      long long rfc_total = 0;
      for (int b : rfc_run.bits) rfc_total += b;

      std::vector<std::vector<SetupSinks>> groups;
      if (wanted(config, Setup::kRfc)) groups.push_back(std::move(rfc));
      if (wanted(config, Setup::kRps1)) groups.push_back({{Setup::kRps1, {}}});
      std::vector<SetupSinks> cross;
      if (wanted(config, Setup::kRps2)) cross.push_back({Setup::kRps2, {}});
      if (wanted(config, Setup::kArps)) cross.push_back({Setup::kArps, {}});

      std::vector<std::pair<std::vector<SetupSinks>, EncoderRunResult>> done;
      if (!groups.empty() && groups.front().front().setup == Setup::kRfc) {
        done.emplace_back(std::move(groups.front()), rfc_run);
        groups.erase(groups.begin());
      }
      for (auto& g : groups) {
        EncoderRunResult r = run_encoder(config, scene, trace, rate, seed, RpsMode::kIndependent, &rfc_run.bits, g);
        done.emplace_back(std::move(g), std::move(r));
      }
      if (!cross.empty()) {
        EncoderRunResult r = run_encoder(config, scene, trace, rate, seed, RpsMode::kCrossView, &rfc_run.bits, cross);
        done.emplace_back(std::move(cross), std::move(r));
      }

      // Report order follows the canonical setup order.
      for (Setup s : {Setup::kRfc, Setup::kRps1, Setup::kRps2, Setup::kArps}) {
        for (const auto& [sinks, run] : done) {
          for (const auto& sink : sinks) {
            if (sink.setup != s) continue;
            CellSummary cell{s, rate, seed, 0.0, 0, rfc_total, true, run.out_of_band};
            double sum = 0.0;
            for (const auto& row : sink.rows) {
              sum += row.psnr;
              cell.total_bits += row.bits;
              report.frames.push_back(row);
            }
            cell.average_psnr = sink.rows.empty() ? 0.0 : sum / static_cast<double>(sink.rows.size());
            cell.rate_matched = cell.total_bits >= rfc_total * (1.0 - config.rate_band) &&
                                cell.total_bits <= rfc_total * (1.0 + config.rate_band);
            report.cells.push_back(cell);
          }
        }
      }
    }
  }

  write_frames_csv(report, config.output_dir / "frames.csv");
  {
    auto out = open_out(config.output_dir / "cells.csv");
    out << "setup,rate,seed,avg_psnr,total_bits,rfc_bits,rate_matched,frames_out_of_band\n";
    for (const auto& c : report.cells) {
      out << setup_name(c.setup) << ',' << exact(c.rate) << ',' << c.seed << ',' << exact(c.average_psnr) << ','
          << c.total_bits << ',' << c.reference_bits << ',' << (c.rate_matched ? 1 : 0) << ',' << c.frames_out_of_band
          << '\n';
    }
  }
  if (wanted(config, Setup::kRfc)) {
    const auto summary = compare_setups(report);
    write_summary_csv(summary, config.output_dir / "summary.csv");
    auto out = open_out(config.output_dir / "summary.txt");
    out << format_summary(summary);
  }
  emit_plot_data(report, config.output_dir / "plots");
  return report;
}

std::vector<SummaryRow> compare_setups(const ExperimentReport& report) {
  // (rate, seed, frame) -> RFC psnr
  std::map<std::tuple<double, std::uint64_t, int>, double> rfc;
  for (const auto& r : report.frames) {
    if (r.setup == Setup::kRfc) rfc[{r.rate, r.seed, r.frame}] = r.psnr;
  }
  if (rfc.empty()) throw std::invalid_argument("compare_setups: report has no RFC rows");

  struct Acc {
    std::map<std::uint64_t, std::pair<double, int>> per_seed;  // psnr sum, frames
    std::map<std::uint64_t, long long> bits;
    double max_gain = -1e300;
  };
  std::map<std::pair<double, int>, Acc> acc;
  bool other = false;
  for (const auto& r : report.frames) {
    other = other || r.setup != Setup::kRfc;
    Acc& a = acc[{r.rate, static_cast<int>(r.setup)}];
    auto& ps = a.per_seed[r.seed];
    ps.first += r.psnr;
    ps.second += 1;
    a.bits[r.seed] += r.bits;
    auto it = rfc.find({r.rate, r.seed, r.frame});
    if (it == rfc.end()) throw std::invalid_argument("compare_setups: RFC row missing for a compared frame");
    a.max_gain = std::max(a.max_gain, r.psnr - it->second);
  }
  if (!other) throw std::invalid_argument("compare_setups: nothing to compare against RFC");

  std::vector<SummaryRow> rows;
  std::map<double, double> rfc_average;
  for (const auto& [key, a] : acc) {
    SummaryRow row;
    row.rate = key.first;
    row.setup = static_cast<Setup>(key.second);
    double sum = 0.0;
    double bits = 0.0;
    for (const auto& [seed, ps] : a.per_seed) sum += ps.first / ps.second;
    for (const auto& [seed, b] : a.bits) bits += static_cast<double>(b);
    row.seeds = static_cast<int>(a.per_seed.size());
    row.average_psnr = sum / row.seeds;
    row.average_bits = bits / row.seeds;
    row.max_frame_gain = a.max_gain;
    if (row.setup == Setup::kRfc) rfc_average[row.rate] = row.average_psnr;
    rows.push_back(row);
  }
  for (auto& row : rows) row.average_gain = row.average_psnr - rfc_average.at(row.rate);
  return rows;
}

void write_frames_csv(const ExperimentReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "setup,rate,seed,frame,psnr,bits,lost_packets\n";
  for (const auto& r : report.frames) {
    out << setup_name(r.setup) << ',' << exact(r.rate) << ',' << r.seed << ',' << r.frame << ',' << exact(r.psnr) << ','
        << r.bits << ',' << r.lost_packets << '\n';
  }
}

ExperimentReport read_frames_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ExperimentReport report;
  std::string line;
  std::getline(in, line);
  if (line != "setup,rate,seed,frame,psnr,bits,lost_packets") throw std::runtime_error(path.string() + ": unexpected header");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field[7];
    for (auto& f : field) {
      if (!std::getline(ss, f, ',')) throw std::runtime_error(path.string() + ": short line " + std::to_string(line_no));
    }
    FrameRow r;
    r.setup = parse_setup(field[0]);
    r.rate = std::stod(field[1]);
    r.seed = std::stoull(field[2]);
    r.frame = std::stoi(field[3]);
    r.psnr = std::stod(field[4]);
    r.bits = std::stoi(field[5]);
    r.lost_packets = std::stoi(field[6]);
    report.frames.push_back(r);
  }
  return report;
}

void write_summary_csv(std::span<const SummaryRow> rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "rate,setup,seeds,avg_psnr,avg_gain,max_frame_gain,avg_bits\n";
  for (const auto& r : rows) {
    out << exact(r.rate) << ',' << setup_name(r.setup) << ',' << r.seeds << ',' << exact(r.average_psnr) << ','
        << exact(r.average_gain) << ',' << exact(r.max_frame_gain) << ',' << exact(r.average_bits) << '\n';
  }
}

std::string format_summary(std::span<const SummaryRow> rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-6s %-5s %5s %10s %9s %10s %12s\n", "rate", "setup", "seeds", "avg PSNR", "gain",
                "max gain", "avg bits");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-6.3f %-5s %5d %10.3f %+9.3f %+10.3f %12.1f\n", r.rate, setup_name(r.setup),
                  r.seeds, r.average_psnr, r.average_gain, r.max_frame_gain, r.average_bits);
    out << buf;
  }
  return out.str();
}

std::vector<std::filesystem::path> emit_plot_data(const ExperimentReport& report, const std::filesystem::path& dir) {
  ensure_dir(dir);
  std::map<std::tuple<int, double, std::uint64_t>, std::vector<const FrameRow*>> series;
  for (const auto& r : report.frames) series[{static_cast<int>(r.setup), r.rate, r.seed}].push_back(&r);
  std::vector<std::filesystem::path> paths;
  for (const auto& [key, rows] : series) {
    const auto path = dir / (std::string(setup_name(static_cast<Setup>(std::get<0>(key)))) + "_" +
                             cell_tag(std::get<1>(key), std::get<2>(key)) + ".dat");
    auto out = open_out(path);
    out << "# frame psnr\n";
    for (const FrameRow* r : rows) out << r->frame << ' ' << fmt("%.6f", r->psnr) << '\n';
    paths.push_back(path);
  }
  return paths;
}

}  // namespace fvs
