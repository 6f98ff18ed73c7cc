#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rct/geometry.hpp"
#include "rct/image.hpp"

namespace rct::medianflow {

struct MedianFlowConfig {
  int grid = 10;               // grid x grid seed points per box
  int window = 11;             // LK window side, odd
  int levels = 3;              // pyramid levels
  int max_iterations = 20;
  double epsilon = 0.03;       // LK convergence, pixels
  double max_fb_error = 10.0;  // failure when the kept median exceeds this
  int min_points = 10;         // failure when fewer points survive
  double min_eigenvalue = 1e-4;  // per-pixel gradient-matrix conditioning
  /// Points whose mean absolute intensity residual after convergence exceeds
  /// this are dropped.
  double max_residual = 0.1;
};

using Pyramid = std::vector<GrayFrame>;

/// Level 0 is the input; each further level is a 2x2 box-averaged
/// half-resolution copy. Throws std::invalid_argument if the frame is
/// smaller than 2^(levels-1) in either dimension.
Pyramid pyramid(const GrayFrame& frame, int levels);

struct FlowPoint {
  Point src;
  Point dst;
  double fb_error = 0.0;
  bool valid = false;
};

/// Pyramidal Lucas-Kanade: location of `p` in the next frame, or nullopt
/// when the gradient matrix is near-singular, the residual is too large, or
/// the iteration leaves the frame.
std::optional<Point> lk_track_point(const Pyramid& prev, const Pyramid& next, Point p,
                                    const MedianFlowConfig& cfg = {});

/// Result of one MedianFlow step. An empty result is a tracking failure.
struct SotResult {
  std::optional<Box> box;

  bool failed() const { return !box.has_value(); }
  static SotResult failure() { return {}; }
};

/// Per-point detail of a MedianFlow step, for diagnostics and tests.
struct TrackDetail {
  std::vector<FlowPoint> points;
  double median_fb_error = 0.0;
  int kept = 0;
  double scale = 1.0;
};

SotResult track_box(const Pyramid& prev, const Pyramid& next, const Box& box,
                    const MedianFlowConfig& cfg = {}, TrackDetail* detail = nullptr);

SotResult track_box(const GrayFrame& prev, const GrayFrame& next, const Box& box,
                    const MedianFlowConfig& cfg = {});

/// Pyramids for the frames of a video, built lazily and kept in an LRU cache.
class PyramidCache {
 public:
  PyramidCache(const FrameSource& frames, MedianFlowConfig cfg, std::size_t capacity = 48)
      : frames_(frames), cfg_(cfg), cache_(capacity) {}

  std::shared_ptr<const Pyramid> get(int frame);
  const FrameSource& frames() const { return frames_; }
  const MedianFlowConfig& config() const { return cfg_; }

  /// MedianFlow step between two frames of the video.
  SotResult track(int from_frame, int to_frame, const Box& box);

 private:
  const FrameSource& frames_;
  MedianFlowConfig cfg_;
  FrameCache<Pyramid> cache_;
};

}  // namespace rct::medianflow
