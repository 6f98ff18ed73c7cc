#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rct/geometry.hpp"
#include "rct/image.hpp"
#include "rct/kalman.hpp"
#include "rct/medianflow.hpp"

namespace rct {

/// One detector output: a box with its confidence on one frame (1-based).
struct Detection {
  int frame = 1;
  Box box;
  double confidence = 0.0;
};

/// Track-end trimming variants (the full rule set plus ablations).
enum class TrimMode {
  Full,         // offscreen cut + exit acceleration + onscreen missing-tail trim
  NoOffscreen,  // never cut boxes for being offscreen
  Touch,        // cut as soon as a box touches the frame edge
  NoOnscreen,   // keep missing-derived tails that stay onscreen
};

std::string to_string(TrimMode m);
TrimMode trim_mode_from_string(const std::string& s);

struct RctParams {
  double h_init = 0.5;   // minimum seed confidence
  double beta = 50.0;    // seed edge test: percent enlargement that must stay onscreen
  int delta = 4;         // bidirectional steps before switching to one direction
  int delta_m = 2;       // missing frames before falling back to MedianFlow
  double h_u = 0.3;      // IoU for "same object" in the joining overlap test
  int d_max = 20;        // maximum join gap, frames
  double h_q = 0.8;      // high-quality seed confidence
  double h_f = 0.2;      // average IoU above which tracks are redundant
  double omega = 1.0;    // percent offscreen (both axes) at which tracks are cut
  double alpha = 1.1;    // per-frame velocity growth while exiting
  int delta_n = 5;       // missing-derived tail length that gets trimmed

  bool use_medianflow = true;
  bool use_joining = true;
  bool use_size_filter = true;
  TrimMode trim_mode = TrimMode::Full;

  kalman::KalmanConfig kalman = kalman::KalmanConfig::defaults();
  medianflow::MedianFlowConfig flow;

  /// Throws std::invalid_argument naming the first out-of-range field.
  void validate() const;
};

/// All detections of one video with per-detection consumption marks.
class DetectionPool {
 public:
  DetectionPool() = default;
  /// `num_frames` of 0 means "last frame that has a detection".
  explicit DetectionPool(std::vector<Detection> detections, int num_frames = 0);

  int num_frames() const { return num_frames_; }
  std::size_t size() const { return detections_.size(); }
  bool empty() const { return detections_.empty(); }
  const Detection& operator[](int idx) const { return detections_[idx]; }
  const std::vector<Detection>& all() const { return detections_; }
  /// Indices of the detections on `frame`; empty outside 1..num_frames.
  std::span<const int> on_frame(int frame) const;

  bool consumed(int idx) const { return consumed_[idx]; }
  void consume(int idx);

  /// Copy keeping only detections with confidence >= min_confidence.
  DetectionPool prefiltered(double min_confidence) const;

 private:
  std::vector<Detection> detections_;
  std::vector<std::vector<int>> by_frame_;
  std::vector<bool> consumed_;
  int num_frames_ = 0;
};

enum class Source { Detection, Motion, Sot, Missing };

const char* to_string(Source s);

struct TrackBox {
  int frame = 0;
  Box box;                 // emitted (smoothed) box
  Source source = Source::Missing;
  double confidence = 0.0; // detection confidence; 0 for inferred boxes
  Box observed;            // raw detection/SOT box used as Kalman observation
  int detection = -1;      // pool index when source is Detection

  bool observed_source() const { return source == Source::Detection || source == Source::Sot; }
};

/// A finalized track covers a contiguous frame interval with one box per
/// frame: boxes[i].frame == first_frame() + i.
struct Track {
  int id = 0;
  int init_frame = 0;
  double init_confidence = 0.0;
  std::vector<TrackBox> boxes;
  std::vector<kalman::KalmanState> states;

  bool empty() const { return boxes.empty(); }
  int first_frame() const { return boxes.front().frame; }
  int last_frame() const { return boxes.back().frame; }
  bool covers(int frame) const {
    return !boxes.empty() && frame >= first_frame() && frame <= last_frame();
  }
  const TrackBox& at(int frame) const { return boxes[frame - first_frame()]; }
  TrackBox& at(int frame) { return boxes[frame - first_frame()]; }
  /// First/last frame whose box is a detection or SOT box; nullopt if none.
  std::optional<int> first_observed() const;
  std::optional<int> last_observed() const;
};

/// Thrown by run_rct when its deadline passes.
class Cancelled : public std::runtime_error {
 public:
  Cancelled() : std::runtime_error("deadline exceeded") {}
};

/// Cooperative deadline checked inside the tracking loops.
class Deadline {
 public:
  Deadline() = default;
  explicit Deadline(std::chrono::steady_clock::time_point at) : at_(at) {}
  static Deadline after(std::chrono::duration<double> d) {
    return Deadline(std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(d));
  }
  bool expired() const { return at_ && std::chrono::steady_clock::now() >= *at_; }
  void check() const {
    if (expired()) throw Cancelled();
  }

 private:
  std::optional<std::chrono::steady_clock::time_point> at_;
};

/// Everything the tracker needs about one video.
struct VideoContext {
  FrameDims dims;
  int num_frames = 0;
  /// Optical-flow substrate; null when frames are unavailable.
  medianflow::PyramidCache* flow = nullptr;
  Deadline deadline;
};

// --- individual stages -----------------------------------------------------

/// Highest-confidence unconsumed detection that overlaps no existing track
/// box on its frame and whose beta-enlarged box stays onscreen; nullopt when
/// the best remaining confidence is below h_init. Ties: earliest frame, then
/// smallest x, then smallest y.
std::optional<int> select_seed(const DetectionPool& pool, std::span<const Track> tracks,
                               const RctParams& params, FrameDims dims);

/// c * P(box | predicted state).
double score_candidate(const Detection& det, const kalman::KalmanState& predicted,
                       const kalman::KalmanConfig& cfg);

/// Plausibility of extending a track with `candidate`, where s_now is the
/// prediction for the candidate's frame and s_prev the state it was
/// predicted from. The candidate's centre must lie inside the predicted box,
/// and the candidate must be at least as likely under s_now as under s_prev
/// (compared with s_now's innovation covariance); otherwise the object would
/// be moving against the estimated velocity.
bool accept_candidate(const Box& candidate, const kalman::KalmanState& s_now,
                      const kalman::KalmanState& s_prev, const kalman::KalmanConfig& cfg);

/// Builds one finalized track from `seed`, consuming the detections it uses.
Track grow_track(int seed, DetectionPool& pool, const VideoContext& video,
                 const RctParams& params, int id);

/// Re-derives boxes and states of a track from its observed entries: a
/// forward smoothing pass for frames at/after `split` and a time-reversed
/// pass for frames before it, each with delta frames of shared context.
void smooth_track(Track& track, int split, const RctParams& params);

void replace_after_build(std::vector<Track>& tracks, const VideoContext& video,
                         const RctParams& params);

void join_tracks(std::vector<Track>& tracks, const RctParams& params);

void filter_tracks(std::vector<Track>& tracks, const RctParams& params, FrameDims dims);

void trim_tracks(std::vector<Track>& tracks, FrameDims dims, const RctParams& params);

/// Mean per-frame IoU over the frames both tracks cover; 0 if disjoint.
double average_iou(const Track& a, const Track& b);

struct RctResult {
  std::vector<Track> tracks;
  std::vector<std::string> warnings;
};

/// The full pipeline: seed/grow until no seed qualifies, then replacement,
/// joining, filtering and trimming. `frames` may be null, in which case the
/// MedianFlow stages are disabled with a warning. Throws Cancelled when the
/// deadline passes.
RctResult run_rct(DetectionPool pool, const FrameSource* frames, const RctParams& params,
                  FrameDims dims, Deadline deadline = {});

}  // namespace rct
