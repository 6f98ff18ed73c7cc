#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rct::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kInputError = 2, kTimeout = 3 };

/// Bad or unreadable user input; maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs shared by the subcommands that run the tracker.
struct TrackerInputs {
  std::optional<fs::path> config;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::string> size;     // WxH, required without frames
};

struct TrackOptions {
  TrackerInputs tracker;
  std::optional<fs::path> detections;
  std::optional<fs::path> frames;
  /// Directory with one subdirectory per video, each holding detections.txt
  /// and optionally frames/. Output is then a directory.
  std::optional<fs::path> batch;
  fs::path output;
  std::optional<fs::path> manifest;
  double timeout_seconds = 1800.0;
  int jobs = 1;
};

struct EvalOptions {
  fs::path gt;
  fs::path pred;
  std::optional<fs::path> report;  // CSV; a .txt table is written alongside
};

struct SweepOptions {
  TrackerInputs tracker;
  fs::path detections;
  std::optional<fs::path> frames;
  fs::path gt;
  std::vector<double> thresholds;
  std::optional<fs::path> output;
  double timeout_seconds = 1800.0;
};

struct SynthOptions {
  std::optional<std::string> preset;
  std::optional<fs::path> scenario;
  std::optional<unsigned long long> seed;
  fs::path out;
  bool no_frames = false;
};

struct VizOptions {
  fs::path frames;
  fs::path tracks;
  fs::path out;
};

int run_track(const TrackOptions& opts);
int run_eval(const EvalOptions& opts);
int run_sweep(const SweepOptions& opts);
int run_synth(const SynthOptions& opts);
int run_viz(const VizOptions& opts);

}  // namespace rct::cli
