#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fvs/session.hpp"
#include "fvs/synthetic_scene.hpp"

namespace fvs {

struct ExperimentConfig {
  SyntheticSceneSpec scene = default_scene_spec();
  std::vector<Setup> setups{Setup::kRfc, Setup::kRps1, Setup::kRps2, Setup::kArps};
  std::vector<double> loss_rates{0.02, 0.05, 0.08};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int rtt_frames = 4;
  double v = 0.5;
  double c = 1.0;
  SensitivityParams sensitivity;
  double gamma = kDefaultAttenuation;
  int texture_qstep = 10;
  int depth_qstep = 2;
  int search_range = 16;
  int ref_window = 8;
  int texture_packets = 12;
  int depth_packets = 4;
  double rate_band = 0.05;
  double rfc_lambda = 0.05;
  bool frame0_lossless = true;
  std::filesystem::path output_dir = "fvs-out";
  bool write_frames = false;
  bool write_bitstreams = false;
  bool write_debug = true;  // decision, error and trace dumps

  void validate() const;
  // Coding parameters for one loss rate.
  CodingConfig coding(double loss_rate) const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

struct FrameRow {
  Setup setup = Setup::kRfc;
  double rate = 0.0;
  std::uint64_t seed = 0;
  int frame = 0;
  double psnr = 0.0;
  int bits = 0;
  int lost_packets = 0;
};

struct CellSummary {
  Setup setup = Setup::kRfc;
  double rate = 0.0;
  std::uint64_t seed = 0;
  double average_psnr = 0.0;
  long long total_bits = 0;
  long long reference_bits = 0;  // RFC total for the same (rate, seed)
  bool rate_matched = true;
  int frames_out_of_band = 0;
};

struct ExperimentReport {
  std::vector<FrameRow> frames;  // ordered by rate, seed, setup, frame
  std::vector<CellSummary> cells;
};

// Runs every (rate, seed) cell. One loss trace per cell is shared by all
// setups; RFC is always encoded first and its per-frame bits drive the lambda
// search of the other setups. Writes artifacts under config.output_dir.
ExperimentReport run_experiment(const ExperimentConfig& config);

struct SummaryRow {
  double rate = 0.0;
  Setup setup = Setup::kRfc;
  double average_psnr = 0.0;    // mean over seeds of sequence averages
  double average_gain = 0.0;    // vs RFC
  double max_frame_gain = 0.0;  // largest single-frame gain vs RFC
  double average_bits = 0.0;    // mean total bits over seeds
  int seeds = 0;
};

// Throws std::invalid_argument when the report holds no RFC rows or nothing
// to compare against.
std::vector<SummaryRow> compare_setups(const ExperimentReport& report);

void write_frames_csv(const ExperimentReport& report, const std::filesystem::path& path);
ExperimentReport read_frames_csv(const std::filesystem::path& path);
void write_summary_csv(std::span<const SummaryRow> rows, const std::filesystem::path& path);
std::string format_summary(std::span<const SummaryRow> rows);

// One `frame psnr` file per (setup, rate, seed); returns the paths written.
std::vector<std::filesystem::path> emit_plot_data(const ExperimentReport& report, const std::filesystem::path& dir);

// "r0.050_s3" style tag used in artifact names.
std::string cell_tag(double rate, std::uint64_t seed);

}  // namespace fvs
