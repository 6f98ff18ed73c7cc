#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "rct/synth.hpp"

using namespace rct::cli;

namespace {

void add_tracker_inputs(CLI::App* cmd, TrackerInputs& in) {
  cmd->add_option("--config", in.config, "key=value parameter file")->check(CLI::ExistingFile);
  cmd->add_option("--set", in.overrides, "Parameter override key=value (repeatable)");
  cmd->add_option("--size", in.size, "Frame size WxH; required when no frames are given");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline multi-object tracking from unfiltered detections"};
  app.require_subcommand(1);

  TrackOptions track;
  CLI::App* track_cmd = app.add_subcommand("track", "Run the tracker on one video or a batch");
  track_cmd->add_option("--detections", track.detections, "Detection CSV")->check(CLI::ExistingFile);
  track_cmd->add_option("--frames", track.frames, "Directory of numbered frames")
      ->check(CLI::ExistingDirectory);
  track_cmd->add_option("--batch", track.batch,
                        "Directory of videos, each with detections.txt and optional frames/")
      ->check(CLI::ExistingDirectory)
      ->excludes("--detections")
      ->excludes("--frames");
  track_cmd->add_option("--output", track.output, "Track file (or directory with --batch)")->required();
  track_cmd->add_option("--manifest", track.manifest, "Run manifest JSON path");
  track_cmd->add_option("--timeout", track.timeout_seconds, "Per-video wall-clock limit in seconds")
      ->capture_default_str();
  track_cmd->add_option("--jobs", track.jobs, "Videos processed in parallel")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_tracker_inputs(track_cmd, track.tracker);

  EvalOptions eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score predicted tracks against ground truth");
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth MOT CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--pred", eval.pred, "Predicted MOT CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--report", eval.report, "CSV report path; a .txt table is written beside it");

  SweepOptions sweep;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Track and score under confidence prefilters");
  sweep_cmd->add_option("--detections", sweep.detections, "Detection CSV")
      ->required()
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--frames", sweep.frames, "Directory of numbered frames")
      ->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--gt", sweep.gt, "Ground-truth MOT CSV")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--thresholds", sweep.thresholds, "Prefilter thresholds; 0 is always included")
      ->delimiter(',');
  sweep_cmd->add_option("--output", sweep.output, "CSV path (default: stdout)");
  sweep_cmd->add_option("--timeout", sweep.timeout_seconds, "Per-run wall-clock limit in seconds")
      ->capture_default_str();
  add_tracker_inputs(sweep_cmd, sweep.tracker);

  SynthOptions synth;
  bool list_presets = false;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic video with ground truth");
  auto* preset_opt = synth_cmd->add_option("--preset", synth.preset, "Built-in scenario name");
  synth_cmd->add_option("--scenario", synth.scenario, "Scenario file")
      ->check(CLI::ExistingFile)
      ->excludes(preset_opt);
  synth_cmd->add_option("--seed", synth.seed, "Random seed (overrides the scenario's)");
  synth_cmd->add_option("--out", synth.out, "Output directory");
  synth_cmd->add_flag("--no-frames", synth.no_frames, "Skip writing frame images");
  synth_cmd->add_flag("--list-presets", list_presets, "Print the preset names and exit");

  VizOptions viz;
  CLI::App* viz_cmd = app.add_subcommand("viz", "Draw tracks onto frames");
  viz_cmd->add_option("--frames", viz.frames, "Directory of numbered frames")
      ->required()
      ->check(CLI::ExistingDirectory);
  viz_cmd->add_option("--tracks", viz.tracks, "MOT CSV to draw")->required()->check(CLI::ExistingFile);
  viz_cmd->add_option("--out", viz.out, "Output directory for PNG frames")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*track_cmd) return run_track(track);
    if (*eval_cmd) return run_eval(eval);
    if (*sweep_cmd) return run_sweep(sweep);
    if (*synth_cmd) {
      if (list_presets) {
        for (const std::string& name : rct::synth::preset_names()) std::cout << name << "\n";
        return kOk;
      }
      if (synth.out.empty()) throw InputError("--out is required");
      return run_synth(synth);
    }
    if (*viz_cmd) return run_viz(viz);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
