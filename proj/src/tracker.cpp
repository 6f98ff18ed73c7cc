#include "rct/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

namespace rct {

using kalman::KalmanState;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("invalid parameter: ") + what);
}

}  // namespace

// --- params / enums ----------------------------------------------------------

std::string to_string(TrimMode m) {
  switch (m) {
    case TrimMode::Full: return "full";
    case TrimMode::NoOffscreen: return "no_offscreen";
    case TrimMode::Touch: return "touch";
    case TrimMode::NoOnscreen: return "no_onscreen";
  }
  return "full";
}

TrimMode trim_mode_from_string(const std::string& s) {
  if (s == "full") return TrimMode::Full;
  if (s == "no_offscreen") return TrimMode::NoOffscreen;
  if (s == "touch") return TrimMode::Touch;
  if (s == "no_onscreen") return TrimMode::NoOnscreen;
  throw std::invalid_argument("unknown trim mode: " + s);
}

const char* to_string(Source s) {
  switch (s) {
    case Source::Detection: return "detection";
    case Source::Motion: return "motion";
    case Source::Sot: return "sot";
    case Source::Missing: return "missing";
  }
  return "missing";
}

void RctParams::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  require(unit(h_init), "h_init");
  require(beta >= 0.0 && std::isfinite(beta), "beta");
  require(delta >= 1, "delta");
  require(delta_m >= 0, "delta_m");
  require(unit(h_u), "h_u");
  require(d_max >= 1, "d_max");
  require(unit(h_q), "h_q");
  require(unit(h_f), "h_f");
  require(omega >= 0.0 && omega <= 100.0, "omega");
  require(alpha >= 1.0 && std::isfinite(alpha), "alpha");
  require(delta_n >= 1, "delta_n");
}

// --- detection pool ----------------------------------------------------------

DetectionPool::DetectionPool(std::vector<Detection> detections, int num_frames)
    : detections_(std::move(detections)), consumed_(detections_.size(), false) {
  int last = std::max(num_frames, 0);
  for (const Detection& d : detections_) {
    if (d.frame < 1) throw std::invalid_argument("detection frame must be >= 1");
    if (num_frames > 0 && d.frame > num_frames) {
      throw std::invalid_argument("detection frame beyond the video length");
    }
    last = std::max(last, d.frame);
  }
  num_frames_ = last;
  by_frame_.resize(static_cast<std::size_t>(last) + 1);
  for (int i = 0; i < static_cast<int>(detections_.size()); ++i) {
    by_frame_[detections_[i].frame].push_back(i);
  }
}

std::span<const int> DetectionPool::on_frame(int frame) const {
  if (frame < 1 || frame > num_frames_) return {};
  return by_frame_[frame];
}

void DetectionPool::consume(int idx) {
  if (consumed_[idx]) throw std::logic_error("detection consumed twice");
  consumed_[idx] = true;
}

DetectionPool DetectionPool::prefiltered(double min_confidence) const {
  std::vector<Detection> kept;
  for (const Detection& d : detections_) {
    if (d.confidence >= min_confidence) kept.push_back(d);
  }
  return DetectionPool(std::move(kept), num_frames_);
}

// --- track -------------------------------------------------------------------

std::optional<int> Track::first_observed() const {
  for (const TrackBox& b : boxes) {
    if (b.observed_source()) return b.frame;
  }
  return std::nullopt;
}

std::optional<int> Track::last_observed() const {
  for (auto it = boxes.rbegin(); it != boxes.rend(); ++it) {
    if (it->observed_source()) return it->frame;
  }
  return std::nullopt;
}

// --- seeds -------------------------------------------------------------------

namespace {

bool seed_before(const Detection& a, const Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.frame != b.frame) return a.frame < b.frame;
  if (a.box.x != b.box.x) return a.box.x < b.box.x;
  return a.box.y < b.box.y;
}

bool seed_allowed(const Detection& d, FrameDims dims, double beta) {
  return inside_frame(enlarge(d.box, beta), dims);
}

}  // namespace

std::optional<int> select_seed(const DetectionPool& pool, std::span<const Track> tracks,
                               const RctParams& params, FrameDims dims) {
  std::optional<int> best;
  for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
    const Detection& d = pool[i];
    if (pool.consumed(i) || d.confidence < params.h_init) continue;
    if (best && !seed_before(d, pool[*best])) continue;
    if (!seed_allowed(d, dims, params.beta)) continue;
    const bool occupied = std::any_of(tracks.begin(), tracks.end(), [&](const Track& t) {
      return t.covers(d.frame) && intersection_area(t.at(d.frame).box, d.box) > 0.0;
    });
    if (!occupied) best = i;
  }
  return best;
}

// --- scoring -----------------------------------------------------------------

double score_candidate(const Detection& det, const KalmanState& predicted,
                       const kalman::KalmanConfig& cfg) {
  if (!(det.confidence > 0.0)) return 0.0;
  return det.confidence * kalman::likelihood(predicted, det.box, cfg);
}

bool accept_candidate(const Box& candidate, const KalmanState& s_now, const KalmanState& s_prev,
                      const kalman::KalmanConfig& cfg) {
  if (!contains_point(s_now.box(), center(candidate))) return false;
  return kalman::log_likelihood_shared(s_now, s_now, candidate, cfg) >=
         kalman::log_likelihood_shared(s_prev, s_now, candidate, cfg);
}

// --- smoothing -----------------------------------------------------------------

namespace {

kalman::Observation observation_of(const TrackBox& b) {
  if (b.observed_source()) return b.observed;
  return std::nullopt;
}

}  // namespace

void smooth_track(Track& track, int split, const RctParams& params) {
  const int n = static_cast<int>(track.boxes.size());
  if (n == 0) return;
  const int first = track.first_frame();
  auto observed = [&](int i) { return track.boxes[i].observed_source(); };

  int s = std::clamp(split, first, track.last_frame()) - first;
  if (!observed(s)) {
    int k = s;
    while (k < n && !observed(k)) ++k;
    if (k == n) {
      k = s;
      while (k >= 0 && !observed(k)) --k;
    }
    if (k < 0) throw std::logic_error("track has no observed box");
    s = k;
  }

  std::vector<KalmanState> states(n);

  // Forward pass: context starts delta-1 frames before the split.
  int a = std::max(0, s - params.delta + 1);
  while (!observed(a)) ++a;
  {
    std::vector<kalman::Observation> obs;
    for (int i = a; i < n; ++i) obs.push_back(observation_of(track.boxes[i]));
    const auto out = kalman::smooth(obs, *obs.front(), params.kalman);
    for (int i = s; i < n; ++i) states[i] = out[i - a];
  }
  // Time-reversed pass for the frames before the split.
  if (s > 0) {
    int b = std::min(n - 1, s + params.delta - 1);
    while (!observed(b)) --b;
    std::vector<kalman::Observation> obs;
    for (int i = b; i >= 0; --i) obs.push_back(observation_of(track.boxes[i]));
    const auto out = kalman::smooth(obs, *obs.front(), params.kalman);
    for (int i = 0; i < s; ++i) states[i] = kalman::time_reversed(out[b - i]);
  }

  for (int i = 0; i < n; ++i) {
    TrackBox& tb = track.boxes[i];
    tb.box = states[i].box();
    if (tb.source == Source::Missing) tb.source = Source::Motion;
  }
  track.states = std::move(states);
}

// --- growth --------------------------------------------------------------------

namespace {

struct Entry {
  Source source = Source::Missing;
  Box observed;
  double confidence = 0.0;
  int detection = -1;

  kalman::Observation observation() const {
    if (source == Source::Missing) return std::nullopt;
    return observed;
  }
};

class Grower {
 public:
  Grower(int seed, DetectionPool& pool, const VideoContext& video, const RctParams& params)
      : seed_(seed), pool_(pool), video_(video), params_(params),
        use_sot_(params.use_medianflow && video.flow != nullptr) {}

  Track run(int id) {
    const Detection& seed = pool_[seed_];
    const int f0 = seed.frame;
    entries_[f0] = Entry{Source::Detection, seed.box, seed.confidence, seed_};
    pool_.consume(seed_);

    const KalmanState s0 = kalman::update(kalman::init(seed.box, params_.kalman), seed.box,
                                          params_.kalman);
    Direction fwd{+1, f0, s0, seed.box};
    Direction bwd{-1, f0, kalman::time_reversed(s0), seed.box};
    fwd.filtered[f0] = fwd.state;
    bwd.filtered[f0] = bwd.state;

    for (int i = 0; i < params_.delta && !(fwd.done && bwd.done); ++i) {
      video_.deadline.check();
      if (fwd.done) {
        commit(bwd, propose(bwd));
      } else if (bwd.done) {
        commit(fwd, propose(fwd));
      } else {
        Proposal pf = propose(fwd);
        Proposal pb = propose(bwd);
        if (pf.log_score >= pb.log_score) {
          commit(fwd, std::move(pf));
        } else {
          commit(bwd, std::move(pb));
        }
      }
    }
    while (!fwd.done) {
      video_.deadline.check();
      commit(fwd, propose(fwd));
    }
    while (!bwd.done) {
      video_.deadline.check();
      commit(bwd, propose(bwd));
    }
    return finalize(id, f0, seed.confidence, fwd.ran_offscreen, bwd.ran_offscreen);
  }

 private:
  struct Direction {
    int step;
    int frame;  // last committed frame
    KalmanState state;  // filtered state at `frame`, in this direction's time
    Box anchor_box;     // MedianFlow restarts from the last committed detection
    int anchor_frame = frame;
    bool done = false;
    bool ran_offscreen = false;
    int missing_run = 0;
    std::map<int, KalmanState> filtered = {};
    std::vector<medianflow::SotResult> chain = {};  // chain[k]: anchor_frame + (k+1)*step
  };

  struct Proposal {
    enum class Kind { Extend, Boundary, Offscreen } kind = Kind::Extend;
    int frame = 0;
    Entry entry;
    double log_score = kNegInf;
    std::vector<int> retro;  // earlier MISSING frames switched to SOT
  };

  const medianflow::SotResult& sot_at(Direction& d, int frame) {
    const std::size_t k = static_cast<std::size_t>((frame - d.anchor_frame) * d.step - 1);
    while (d.chain.size() <= k) {
      if (!d.chain.empty() && d.chain.back().failed()) {
        d.chain.push_back(medianflow::SotResult::failure());
        continue;
      }
      const Box from_box = d.chain.empty() ? d.anchor_box : *d.chain.back().box;
      const int from = d.anchor_frame + static_cast<int>(d.chain.size()) * d.step;
      d.chain.push_back(video_.flow->track(from, from + d.step, from_box));
    }
    return d.chain[k];
  }

  // The previous delta_m frames (in this direction) exist and hold no detection.
  bool recent_frames_undetected(const Direction& d, int frame) const {
    for (int k = 1; k <= params_.delta_m; ++k) {
      const auto it = entries_.find(frame - k * d.step);
      if (it == entries_.end() || it->second.source == Source::Detection) return false;
    }
    return true;
  }

  Proposal propose(Direction& d) {
    Proposal p;
    p.frame = d.frame + d.step;
    if (p.frame < 1 || p.frame > video_.num_frames) {
      p.kind = Proposal::Kind::Boundary;
      return p;
    }
    const kalman::KalmanConfig& kcfg = params_.kalman;
    const KalmanState pred = kalman::predict(d.state, kcfg);
    const Box pbox = pred.box();

    int best = -1;
    double best_score = kNegInf;
    for (int idx : pool_.on_frame(p.frame)) {
      if (pool_.consumed(idx)) continue;
      const Detection& det = pool_[idx];
      if (!(det.confidence > 0.0) || intersection_area(det.box, pbox) <= 0.0) continue;
      const double s = std::log(det.confidence) + kalman::log_likelihood(pred, det.box, kcfg);
      if (s > best_score) {
        best_score = s;
        best = idx;
      }
    }
    const Entry& last = entries_.at(d.frame);
    // After a missing frame the state has coasted on its velocity estimate,
    // so only the containment test is meaningful.
    bool acceptable = false;
    if (best >= 0) {
      acceptable = last.source == Source::Missing
                       ? contains_point(pbox, center(pool_[best].box))
                       : accept_candidate(pool_[best].box, pred, d.state, kcfg);
    }

    std::optional<Box> sot;
    if (use_sot_ && (!acceptable || last.source == Source::Sot)) {
      const auto& r = sot_at(d, p.frame);
      if (r.box && contains_point(pbox, center(*r.box))) sot = r.box;
    }

    const auto mutual = [](const Box& a, const Box& b) {
      return contains_point(a, center(b)) && contains_point(b, center(a));
    };
    if (acceptable && !(last.source == Source::Sot && sot && !mutual(pool_[best].box, *sot))) {
      const Detection& det = pool_[best];
      p.entry = Entry{Source::Detection, det.box, det.confidence, best};
      p.log_score = best_score;
    } else if (sot && last.source == Source::Sot) {
      p.entry = Entry{Source::Sot, *sot, 0.0, -1};
    } else if (sot && recent_frames_undetected(d, p.frame)) {
      p.entry = Entry{Source::Sot, *sot, 0.0, -1};
      for (int k = params_.delta_m; k >= 1; --k) {
        const int g = p.frame - k * d.step;
        if (entries_.at(g).source == Source::Missing) p.retro.push_back(g);
      }
    }

    const Box now = p.entry.source == Source::Missing ? pbox : p.entry.observed;
    const Box prev = last.source == Source::Missing ? d.state.box() : last.observed;
    if (offscreen_score(now, video_.dims) > offscreen_score(prev, video_.dims)) {
      p.kind = Proposal::Kind::Offscreen;
    }
    return p;
  }

  void refilter(Direction& d, int from_frame) {
    KalmanState s = d.filtered.at(from_frame - d.step);
    for (int g = from_frame; g != d.frame + d.step; g += d.step) {
      s = kalman::update(kalman::predict(s, params_.kalman), entries_.at(g).observation(),
                         params_.kalman);
      d.filtered[g] = s;
    }
    d.state = s;
  }

  void commit(Direction& d, Proposal p) {
    if (p.kind != Proposal::Kind::Extend) {
      d.done = true;
      d.ran_offscreen = p.kind == Proposal::Kind::Offscreen;
      return;
    }
    if (!p.retro.empty()) {
      for (int g : p.retro) {
        entries_[g] = Entry{Source::Sot, *sot_at(d, g).box, 0.0, -1};
      }
      refilter(d, p.retro.front());
    }
    const KalmanState pred = kalman::predict(d.state, params_.kalman);
    const Entry& e = entries_[p.frame] = p.entry;
    if (e.source == Source::Detection) {
      pool_.consume(e.detection);
      d.anchor_frame = p.frame;
      d.anchor_box = e.observed;
      d.chain.clear();
    }
    d.state = kalman::update(pred, e.observation(), params_.kalman);
    d.filtered[p.frame] = d.state;
    d.frame = p.frame;
    d.missing_run = e.source == Source::Missing ? d.missing_run + 1 : 0;
    if (d.missing_run >= params_.d_max) d.done = true;
  }

  Track finalize(int id, int f0, double confidence, bool extend_forward, bool extend_backward) {
    int first = entries_.begin()->first;
    int last = entries_.rbegin()->first;
    if (extend_backward) first = 1;
    if (extend_forward) last = video_.num_frames;

    Track t;
    t.id = id;
    t.init_frame = f0;
    t.init_confidence = confidence;
    t.boxes.reserve(static_cast<std::size_t>(last - first + 1));
    for (int f = first; f <= last; ++f) {
      TrackBox tb;
      tb.frame = f;
      if (const auto it = entries_.find(f); it != entries_.end()) {
        tb.source = it->second.source;
        tb.observed = it->second.observed;
        tb.confidence = it->second.confidence;
        tb.detection = it->second.detection;
      }
      t.boxes.push_back(tb);
    }
    smooth_track(t, f0, params_);
    return t;
  }

  int seed_;
  DetectionPool& pool_;
  const VideoContext& video_;
  const RctParams& params_;
  bool use_sot_;
  std::map<int, Entry> entries_;
};

}  // namespace

Track grow_track(int seed, DetectionPool& pool, const VideoContext& video,
                 const RctParams& params, int id) {
  if (pool.consumed(seed)) throw std::invalid_argument("seed detection already consumed");
  return Grower(seed, pool, video, params).run(id);
}

// --- replacement -----------------------------------------------------------------

void replace_after_build(std::vector<Track>& tracks, const VideoContext& video,
                         const RctParams& params) {
  if (!params.use_medianflow || video.flow == nullptr) return;

  // Detection boxes per frame, tagged with their track index.
  std::map<int, std::vector<std::pair<std::size_t, Box>>> detected;
  for (std::size_t j = 0; j < tracks.size(); ++j) {
    for (const TrackBox& tb : tracks[j].boxes) {
      if (tb.source == Source::Detection) detected[tb.frame].emplace_back(j, tb.observed);
    }
  }

  // Interior frame range per track. Tracks do not affect each other here, so
  // the loop runs frame-major to visit each frame's pyramid once.
  std::vector<std::pair<int, int>> span(tracks.size(), {0, -1});
  int first = std::numeric_limits<int>::max(), last = std::numeric_limits<int>::min();
  for (std::size_t j = 0; j < tracks.size(); ++j) {
    const auto lo = tracks[j].first_observed();
    const auto hi = tracks[j].last_observed();
    if (!lo || !hi) continue;
    span[j] = {*lo + 1, *hi - 1};
    first = std::min(first, *lo + 1);
    last = std::max(last, *hi - 1);
  }

  std::vector<bool> changed(tracks.size(), false);
  for (int f = first; f <= last; ++f) {
    video.deadline.check();
    for (std::size_t j = 0; j < tracks.size(); ++j) {
      if (f < span[j].first || f > span[j].second) continue;
      Track& t = tracks[j];
      TrackBox& tb = t.at(f);
      bool qualifies = tb.source == Source::Motion;
      if (!qualifies) {
        if (const auto it = detected.find(f); it != detected.end()) {
          qualifies = std::any_of(it->second.begin(), it->second.end(), [&](const auto& other) {
            return other.first != j && intersection_area(tb.box, other.second) > 0.0;
          });
        }
      }
      if (!qualifies) continue;
      const Box prev = t.at(f - 1).box;
      const medianflow::SotResult m = video.flow->track(f - 1, f, prev);
      tb.confidence = 0.0;
      tb.detection = -1;
      if (m.box && intersection_area(*m.box, prev) > 0.0) {
        tb.source = Source::Sot;
        tb.observed = *m.box;
        tb.box = *m.box;
      } else {
        tb.source = Source::Missing;
      }
      changed[j] = true;
    }
  }
  for (std::size_t j = 0; j < tracks.size(); ++j) {
    if (changed[j]) smooth_track(tracks[j], tracks[j].init_frame, params);
  }
}

// --- joining -----------------------------------------------------------------------

namespace {

struct JoinCandidate {
  int gap = 0;
  double dist = 0.0;
  std::size_t j = 0;
  std::size_t w = 0;
};

// Fastest observed centre displacement per frame over all tracks.
double max_speed(const std::vector<Track>& tracks) {
  double v = 0.0;
  for (const Track& t : tracks) {
    const TrackBox* prev = nullptr;
    for (const TrackBox& tb : t.boxes) {
      if (!tb.observed_source()) continue;
      if (prev) {
        v = std::max(v, distance(center(tb.observed), center(prev->observed)) /
                            static_cast<double>(tb.frame - prev->frame));
      }
      prev = &tb;
    }
  }
  return v;
}

std::optional<int> last_non_motion(const Track& t) { return t.last_observed(); }
std::optional<int> first_non_motion(const Track& t) { return t.first_observed(); }

// A fresh filter run over w's observations in reverse, from its end back to
// f_w, then extended to f_j. j's box there must be at least as likely as one
// step further into the past. The smoothed state at f_w is not used: its
// velocity is pulled towards the zero prior at the start of the track.
bool join_direction_ok(const Track& j, int fj, const Track& w, int fw, const RctParams& params) {
  std::vector<kalman::Observation> reversed;
  for (auto it = w.boxes.rbegin(); it != w.boxes.rend() && it->frame >= fw; ++it) {
    if (it->observed_source()) {
      reversed.emplace_back(it->observed);
    } else {
      reversed.emplace_back(std::nullopt);
    }
  }
  while (!reversed.front()) reversed.erase(reversed.begin());
  KalmanState at = kalman::filter(reversed, *reversed.front(), params.kalman).back().filtered;
  for (int k = 0; k < fw - fj; ++k) at = kalman::predict(at, params.kalman);
  const KalmanState before = kalman::predict(at, params.kalman);
  const Box& b = j.at(fj).observed;
  return kalman::log_likelihood_shared(at, at, b, params.kalman) >=
         kalman::log_likelihood_shared(before, at, b, params.kalman);
}

std::optional<JoinCandidate> join_candidate(const std::vector<Track>& tracks, std::size_t ji,
                                            std::size_t wi, double vmax,
                                            const RctParams& params) {
  const Track& j = tracks[ji];
  const Track& w = tracks[wi];
  const auto fj = last_non_motion(j);
  const auto fw = first_non_motion(w);
  if (!fj || !fw) return std::nullopt;

  const double dist = distance(center(j.at(*fj).observed), center(w.at(*fw).observed));
  if (*fj > *fw) {
    // Temporal overlap: j must start first and w end last, and the tracks
    // must agree wherever both are observed, up to two frames.
    if (*j.first_observed() > *fw || *w.last_observed() < *fj) return std::nullopt;
    int disagreements = 0;
    int agreements = 0;
    for (int f = *fw; f <= *fj; ++f) {
      if (!j.covers(f) || !w.covers(f)) continue;
      const TrackBox& a = j.at(f);
      const TrackBox& b = w.at(f);
      if (!a.observed_source() || !b.observed_source()) continue;
      if (iou(a.observed, b.observed) >= params.h_u) {
        ++agreements;
      } else if (++disagreements > 2) {
        return std::nullopt;
      }
    }
    if (agreements == 0) return std::nullopt;
    return JoinCandidate{0, dist, ji, wi};
  }

  const int gap = *fw - *fj;
  if (gap >= params.d_max) return std::nullopt;
  if (dist > gap * vmax) return std::nullopt;
  if (gap > 0 && !join_direction_ok(j, *fj, w, *fw, params)) return std::nullopt;
  return JoinCandidate{gap, dist, ji, wi};
}

int source_rank(const TrackBox& b) {
  switch (b.source) {
    case Source::Detection: return 2;
    case Source::Sot: return 1;
    default: return 0;
  }
}

Track merge(const Track& j, int fj, const Track& w, int fw, const RctParams& params) {
  Track out;
  out.id = std::min(j.id, w.id);
  const bool j_leads = j.init_confidence >= w.init_confidence;
  out.init_confidence = j_leads ? j.init_confidence : w.init_confidence;
  out.init_frame = j_leads ? j.init_frame : w.init_frame;
  const int first = std::min(j.first_frame(), w.first_frame());
  const int last = std::max(j.last_frame(), w.last_frame());
  for (int f = first; f <= last; ++f) {
    TrackBox pick;
    pick.frame = f;
    pick.source = Source::Missing;
    auto consider = [&](const Track& t) {
      if (!t.covers(f)) return;
      const TrackBox& b = t.at(f);
      if (!b.observed_source()) return;
      if (source_rank(b) > source_rank(pick) ||
          (source_rank(b) == source_rank(pick) && b.confidence > pick.confidence)) {
        pick = b;
      }
    };
    if (f <= fj) consider(j);
    if (f >= fw) consider(w);
    out.boxes.push_back(pick);
  }
  smooth_track(out, out.init_frame, params);
  return out;
}

}  // namespace

void join_tracks(std::vector<Track>& tracks, const RctParams& params) {
  for (;;) {
    std::optional<JoinCandidate> best;
    const double vmax = max_speed(tracks);
    for (std::size_t a = 0; a < tracks.size(); ++a) {
      for (std::size_t b = 0; b < tracks.size(); ++b) {
        if (a == b) continue;
        const auto c = join_candidate(tracks, a, b, vmax, params);
        if (!c) continue;
        if (!best || std::tie(c->gap, c->dist) < std::tie(best->gap, best->dist)) best = c;
      }
    }
    if (!best) return;
    const Track& j = tracks[best->j];
    const Track& w = tracks[best->w];
    Track merged = merge(j, *last_non_motion(j), w, *first_non_motion(w), params);
    const std::size_t keep = std::min(best->j, best->w);
    const std::size_t drop = std::max(best->j, best->w);
    tracks[keep] = std::move(merged);
    tracks.erase(tracks.begin() + static_cast<std::ptrdiff_t>(drop));
  }
}

// --- filtering -----------------------------------------------------------------------

double average_iou(const Track& a, const Track& b) {
  if (a.empty() || b.empty()) return 0.0;
  const int lo = std::max(a.first_frame(), b.first_frame());
  const int hi = std::min(a.last_frame(), b.last_frame());
  if (lo > hi) return 0.0;
  double sum = 0.0;
  for (int f = lo; f <= hi; ++f) sum += iou(a.at(f).box, b.at(f).box);
  return sum / (hi - lo + 1);
}

void filter_tracks(std::vector<Track>& tracks, const RctParams& params, FrameDims dims) {
  if (tracks.empty()) return;

  if (params.use_size_filter) {
    std::vector<double> size(tracks.size(), 0.0);
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      for (const TrackBox& tb : tracks[i].boxes) size[i] += visible_area(tb.box, dims);
    }
    const double mean_all =
        std::accumulate(size.begin(), size.end(), 0.0) / static_cast<double>(size.size());
    std::vector<double> large;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      if (tracks[i].init_confidence > params.h_q && size[i] >= mean_all) large.push_back(size[i]);
    }
    if (!large.empty()) {
      const double mu =
          std::accumulate(large.begin(), large.end(), 0.0) / static_cast<double>(large.size());
      double var = 0.0;
      for (double s : large) var += (s - mu) * (s - mu);
      const double cutoff = mu + 1.645 * std::sqrt(var / static_cast<double>(large.size()));
      std::vector<Track> kept;
      for (std::size_t i = 0; i < tracks.size(); ++i) {
        if (size[i] > cutoff && tracks[i].init_confidence < params.h_q) continue;
        kept.push_back(std::move(tracks[i]));
      }
      tracks = std::move(kept);
    }
  }

  // Redundancy: visit tracks from most to least confident and drop any that
  // duplicate a track already kept.
  std::vector<std::size_t> order(tracks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (tracks[a].init_confidence != tracks[b].init_confidence) {
      return tracks[a].init_confidence > tracks[b].init_confidence;
    }
    return tracks[a].id < tracks[b].id;
  });
  std::vector<bool> keep(tracks.size(), false);
  std::vector<std::size_t> kept_idx;
  for (std::size_t i : order) {
    const bool redundant = std::any_of(kept_idx.begin(), kept_idx.end(), [&](std::size_t k) {
      return average_iou(tracks[i], tracks[k]) > params.h_f;
    });
    if (!redundant) {
      keep[i] = true;
      kept_idx.push_back(i);
    }
  }
  std::vector<Track> out;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (keep[i]) out.push_back(std::move(tracks[i]));
  }
  tracks = std::move(out);
}

// --- trimming -----------------------------------------------------------------------

namespace {

void reverse_track(Track& t) {
  std::reverse(t.boxes.begin(), t.boxes.end());
  std::reverse(t.states.begin(), t.states.end());
  for (KalmanState& s : t.states) s = kalman::time_reversed(s);
}

// Trims the tail of `t` (the end with the highest index).
void trim_tail(Track& t, FrameDims dims, const RctParams& params) {
  auto& boxes = t.boxes;
  int last_obs = -1;
  for (int i = static_cast<int>(boxes.size()) - 1; i >= 0; --i) {
    if (boxes[i].observed_source()) {
      last_obs = i;
      break;
    }
  }
  if (last_obs < 0) return;
  const int n = static_cast<int>(boxes.size());
  const double limit = params.omega / 100.0;

  int cut = n;
  switch (params.trim_mode) {
    case TrimMode::Full:
    case TrimMode::NoOnscreen: {
      int trigger = -1;
      for (int i = last_obs; i < n; ++i) {
        if (offscreen_score(boxes[i].box, dims) > 0.0) {
          trigger = i;
          break;
        }
      }
      if (trigger >= 0 && trigger + 1 < n) {
        Point pos = center(boxes[trigger].box);
        Point vel = t.states[trigger].velocity();
        for (int i = trigger + 1; i < n; ++i) {
          vel = {vel.x * params.alpha, vel.y * params.alpha};
          pos = {pos.x + vel.x, pos.y + vel.y};
          KalmanState& s = t.states[i];
          s.mean(kalman::kX) = pos.x;
          s.mean(kalman::kY) = pos.y;
          s.mean(kalman::kVx) = vel.x;
          s.mean(kalman::kVy) = vel.y;
          boxes[i].box = s.box();
        }
      }
      for (int i = last_obs; i < n; ++i) {
        const auto [fx, fy] = offscreen_fraction(boxes[i].box, dims);
        // Small boxes can vanish before their overhang reaches the limit.
        if ((fx > limit && fy > limit) || visible_area(boxes[i].box, dims) <= 0.0) {
          cut = i;
          break;
        }
      }
      break;
    }
    case TrimMode::Touch:
      for (int i = last_obs; i < n; ++i) {
        const auto [fx, fy] = offscreen_fraction(boxes[i].box, dims);
        if (fx > 0.0 || fy > 0.0) {
          cut = i;
          break;
        }
      }
      break;
    case TrimMode::NoOffscreen:
      break;
  }
  boxes.resize(static_cast<std::size_t>(cut));
  t.states.resize(static_cast<std::size_t>(cut));

  if (params.trim_mode != TrimMode::NoOnscreen && last_obs < cut) {
    const int tail = cut - 1 - last_obs;
    int onscreen = 0;
    for (int i = last_obs + 1; i < cut; ++i) {
      if (inside_frame(boxes[i].box, dims)) ++onscreen;
    }
    if (tail >= params.delta_n && onscreen >= params.delta_n) {
      boxes.resize(static_cast<std::size_t>(last_obs + 1));
      t.states.resize(static_cast<std::size_t>(last_obs + 1));
    }
  }
}

}  // namespace

void trim_tracks(std::vector<Track>& tracks, FrameDims dims, const RctParams& params) {
  for (Track& t : tracks) {
    trim_tail(t, dims, params);
    reverse_track(t);
    trim_tail(t, dims, params);
    reverse_track(t);
  }
  std::erase_if(tracks, [](const Track& t) { return t.empty(); });
}

// --- pipeline -------------------------------------------------------------------------

RctResult run_rct(DetectionPool pool, const FrameSource* frames, const RctParams& params,
                  FrameDims dims, Deadline deadline) {
  params.validate();
  RctResult result;
  if (!dims.valid()) throw std::invalid_argument("frame dimensions must be positive");

  std::optional<medianflow::PyramidCache> cache;
  if (frames != nullptr) {
    if (frames->dims() != dims) throw std::invalid_argument("frame size mismatch");
    if (frames->count() < pool.num_frames()) {
      throw std::invalid_argument("detections reference frames beyond the video");
    }
    cache.emplace(*frames, params.flow);
  } else if (params.use_medianflow) {
    result.warnings.emplace_back("no frames available: MedianFlow fallback disabled");
  }

  VideoContext video;
  video.dims = dims;
  video.num_frames = frames != nullptr ? frames->count() : pool.num_frames();
  video.flow = cache ? &*cache : nullptr;
  video.deadline = deadline;
  if (pool.empty()) return result;

  std::vector<int> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return seed_before(pool[a], pool[b]); });

  // Boxes of all tracks built so far, per frame, for the seed overlap test.
  std::vector<std::vector<Box>> occupied(static_cast<std::size_t>(video.num_frames) + 1);
  std::vector<Track>& tracks = result.tracks;
  for (int idx : order) {
    deadline.check();
    const Detection& d = pool[idx];
    if (d.confidence < params.h_init) break;
    if (pool.consumed(idx) || !seed_allowed(d, dims, params.beta)) continue;
    const auto& here = occupied[d.frame];
    if (std::any_of(here.begin(), here.end(),
                    [&](const Box& b) { return intersection_area(b, d.box) > 0.0; })) {
      continue;
    }
    Track t = grow_track(idx, pool, video, params, static_cast<int>(tracks.size()) + 1);
    for (const TrackBox& tb : t.boxes) occupied[tb.frame].push_back(tb.box);
    tracks.push_back(std::move(t));
  }

  replace_after_build(tracks, video, params);
  deadline.check();
  if (params.use_joining) join_tracks(tracks, params);
  deadline.check();
  filter_tracks(tracks, params, dims);
  trim_tracks(tracks, dims, params);
  return result;
}

}  // namespace rct
