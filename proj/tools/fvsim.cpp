// fvsim: command-line driver for the free-viewpoint streaming simulator.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fvs/experiment.hpp"
#include "fvs/synthetic_scene.hpp"

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

// key=value with dotted keys addressing nested objects. Values are parsed
// as JSON when possible and kept as strings otherwise.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

std::filesystem::path under_root(const std::filesystem::path& p) {
  const char* root = std::getenv("FVS_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0' || p.is_absolute()) return p;
  return std::filesystem::path(root) / p;
}

fvs::ExperimentConfig build_config(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) doc = load_json(path);
  if (!doc.contains("scene")) doc["scene"] = fvs::default_scene_spec();
  for (const auto& o : overrides) apply_override(doc, o);
  auto config = doc.get<fvs::ExperimentConfig>();
  config.output_dir = under_root(config.output_dir);
  config.validate();
  return config;
}

int cmd_generate(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& out_dir) {
  const auto config = build_config(config_path, overrides);
  const auto scene = fvs::generate_synthetic_stereo(config.scene);
  const auto dir = under_root(out_dir);
  std::filesystem::create_directories(dir);
  for (std::size_t t = 0; t < scene.left.size(); ++t) {
    const std::string f = std::to_string(t);
    fvs::save_plane(scene.left[t].texture, dir / ("left_texture_" + f + ".pgm"));
    fvs::save_plane(scene.left[t].disparity, dir / ("left_disparity_" + f + ".pgm"));
    fvs::save_plane(scene.right[t].texture, dir / ("right_texture_" + f + ".pgm"));
    fvs::save_plane(scene.right[t].disparity, dir / ("right_disparity_" + f + ".pgm"));
    fvs::save_plane(scene.middle_truth[t], dir / ("middle_truth_" + f + ".pgm"));
  }
  std::ofstream(dir / "scene.json") << json(config.scene).dump(2) << '\n';
  std::cout << "wrote " << scene.left.size() << " frames to " << dir.string() << '\n';
  return 0;
}

int cmd_trace(const std::string& config_path, const std::vector<std::string>& overrides, double rate,
              std::uint64_t seed, const std::string& out) {
  const auto config = build_config(config_path, overrides);
  const auto cc = config.coding(rate);
  auto trace = fvs::make_iid_trace(
      seed, rate,
      fvs::make_schedule(config.scene.frame_count, cc.packets(fvs::Component::kTexture), cc.packets(fvs::Component::kDepth)));
  if (config.frame0_lossless) {
    for (auto& [id, lost] : trace.entries) {
      if (id.frame == 0) lost = false;
    }
  }
  const auto path = under_root(out);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  fvs::write_trace(trace, path);
  std::cout << trace.lost_count() << " of " << trace.entries.size() << " packets lost; trace written to "
            << path.string() << '\n';
  return 0;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides) {
  const auto config = build_config(config_path, overrides);
  std::filesystem::create_directories(config.output_dir);
  std::ofstream(config.output_dir / "config.json") << json(config).dump(2) << '\n';
  const auto report = fvs::run_experiment(config);
  int unmatched = 0;
  for (const auto& c : report.cells) unmatched += c.rate_matched ? 0 : 1;
  if (std::find(config.setups.begin(), config.setups.end(), fvs::Setup::kRfc) != config.setups.end() &&
      config.setups.size() > 1) {
    std::cout << fvs::format_summary(fvs::compare_setups(report));
  }
  if (unmatched > 0) std::cout << "warning: " << unmatched << " run(s) outside the matched-rate band\n";
  std::cout << "artifacts in " << config.output_dir.string() << '\n';
  return 0;
}

int cmd_compare(const std::string& frames_csv, const std::string& out) {
  const auto report = fvs::read_frames_csv(frames_csv);
  const auto rows = fvs::compare_setups(report);
  std::cout << fvs::format_summary(rows);
  if (!out.empty()) fvs::write_summary_csv(rows, under_root(out));
  return 0;
}

int cmd_plotdata(const std::string& frames_csv, const std::string& out_dir) {
  const auto report = fvs::read_frames_csv(frames_csv);
  const auto paths = fvs::emit_plot_data(report, under_root(out_dir));
  std::cout << "wrote " << paths.size() << " series\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loss-resilient texture-plus-depth streaming simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "Override a config key (dotted keys allowed), e.g. --set scene.frames=30");
  };

  std::string out = "scene";
  auto* generate = app.add_subcommand("generate", "Render the synthetic stereo scene to PGM files");
  add_config(generate);
  generate->add_option("-o,--out", out, "Output directory");

  double rate = 0.05;
  std::uint64_t seed = 1;
  std::string trace_out = "trace.txt";
  auto* trace = app.add_subcommand("trace", "Generate an i.i.d. packet-loss trace");
  add_config(trace);
  trace->add_option("--rate", rate, "Packet loss probability")->check(CLI::Range(0.0, 1.0));
  trace->add_option("--seed", seed, "Generator seed");
  trace->add_option("-o,--out", trace_out, "Trace file");

  auto* run = app.add_subcommand("run", "Run the full encode/transmit/decode/synthesize experiment");
  add_config(run);

  std::string frames_csv;
  std::string summary_out;
  auto* compare = app.add_subcommand("compare", "Summarise a frames.csv against RFC");
  compare->add_option("frames", frames_csv, "frames.csv from a run")->required()->check(CLI::ExistingFile);
  compare->add_option("-o,--out", summary_out, "Write the summary CSV here");

  std::string plot_dir = "plots";
  auto* plot = app.add_subcommand("plotdata", "Write per-frame PSNR series from a frames.csv");
  plot->add_option("frames", frames_csv, "frames.csv from a run")->required()->check(CLI::ExistingFile);
  plot->add_option("-o,--out", plot_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(config_path, overrides, out);
    if (trace->parsed()) return cmd_trace(config_path, overrides, rate, seed, trace_out);
    if (run->parsed()) return cmd_run(config_path, overrides);
    if (compare->parsed()) return cmd_compare(frames_csv, summary_out);
    if (plot->parsed()) return cmd_plotdata(frames_csv, plot_dir);
  } catch (const std::exception& e) {
    std::cerr << "fvsim: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
