#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rct/geometry.hpp"
#include "rct/image.hpp"
#include "rct/tracker.hpp"
#include "rct/trackset.hpp"

namespace rct::synth {

/// Object centre as a closed-form function of t = frame - spawn.
struct Motion {
  enum class Kind { Linear, Sinusoid };
  Kind kind = Kind::Linear;
  Point start;             // centre at t = 0
  Point velocity;          // px/frame
  double amplitude = 0.0;  // sinusoid: px, perpendicular offset along `axis`
  double period = 48.0;    // sinusoid: frames
  double phase = 0.0;      // radians
  bool vertical = true;    // sinusoid offset axis: y if true, x otherwise

  Point at(double t) const;

  static Motion linear(Point start, Point velocity);
  static Motion sinusoid(Point start, Point velocity, double amplitude, double period,
                         bool vertical = true, double phase = 0.0);
  /// Linear motion towards one frame edge at `speed` px/frame.
  static Motion exit_left(Point start, double speed);
  static Motion exit_right(Point start, double speed);
  static Motion exit_top(Point start, double speed);
  static Motion exit_bottom(Point start, double speed);
};

/// Inclusive frame range.
struct FrameRange {
  int first = 0;
  int last = -1;
  bool contains(int f) const { return f >= first && f <= last; }
};

struct ObjectSpec {
  int spawn = 1;
  int despawn = 0;  // last frame; 0 means the end of the video
  Motion motion;
  double width = 40.0;
  double height = 40.0;
  std::uint64_t texture_seed = 1;
  double contrast = 1.0;  // 0 renders a flat object (no gradients inside)
  std::vector<FrameRange> gaps;           // no detection at all
  std::vector<FrameRange> low_confidence; // detections with `low_value` confidence
  double low_value = 0.2;
};

/// Two objects moving horizontally in opposite directions whose centres
/// coincide at `meet` on frame `meet_frame`.
std::pair<ObjectSpec, ObjectSpec> crossing_pair(Point meet, int meet_frame, double speed,
                                                double size, int spawn, int despawn);

struct Scenario {
  std::uint64_t seed = 1;
  FrameDims dims{640, 480};
  int num_frames = 100;
  std::vector<ObjectSpec> objects;

  double jitter = 1.0;          // centre noise std-dev, px
  double size_jitter = 0.02;    // relative size noise std-dev
  double dropout = 0.0;         // per-detection drop probability
  double object_conf_lo = 0.6;  // true detections: uniform confidence range
  double object_conf_hi = 0.95;

  double clutter_rate = 0.0;    // Poisson mean clutter boxes per frame
  int clutter_total = -1;       // if >= 0: exact clutter count over the video
  double clutter_conf_lo = 0.01;
  double clutter_conf_hi = 0.3;
  double clutter_min_size = 15.0;
  double clutter_max_size = 60.0;
  bool clutter_avoid_objects = false;  // clutter never overlaps a true object

  double background_contrast = 1.0;
  double min_visible = 4.0;        // px; smaller visible extents are not annotated
  double max_spawn_overlap = 0.3;  // IoU; larger overlap at spawn is an error

  /// Throws std::invalid_argument on an inconsistent scenario.
  void validate() const;
};

/// Parses the key=value scenario format (see docs/formats.md).
Scenario parse_scenario(std::string_view text, const std::string& source = "input");
std::string format_scenario(const Scenario& sc);

/// Renders frames of a scenario on demand.
class SyntheticFrames : public FrameSource {
 public:
  explicit SyntheticFrames(Scenario sc);
  int count() const override { return sc_.num_frames; }
  FrameDims dims() const override { return sc_.dims; }
  GrayFrame load(int frame) const override;

 private:
  Scenario sc_;
  GrayFrame background_;  // static across frames, rendered once
};

struct Synthetic {
  std::shared_ptr<SyntheticFrames> frames;
  std::vector<Detection> detections;
  TrackSet ground_truth;  // ids are 1-based object indices
};

/// Object box on a frame (unclipped), or nullopt if the object is absent.
std::optional<Box> object_box(const Scenario& sc, std::size_t object, int frame);

Synthetic generate(const Scenario& sc);

/// Built-in scenarios, by name (see preset_names()).
std::vector<std::string> preset_names();
/// Throws std::invalid_argument for an unknown name.
Scenario preset(const std::string& name, std::uint64_t seed = 1);

/// Portable deterministic samplers on top of std::mt19937_64 (the standard
/// distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  int poisson(double mean);
  std::uint64_t next() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Smooth value noise in [0, 1] with the given cell size.
float value_noise(double x, double y, double cell, std::uint64_t seed);

}  // namespace rct::synth
