#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "rct/synth.hpp"
#include "rct/tracker.hpp"

using namespace rct;

namespace {

constexpr FrameDims kDims{640, 480};

Detection det(int frame, double cx, double cy, double conf, double size = 40.0) {
  return {frame, box_from_center({cx, cy}, size, size), conf};
}

// A track made only of detection boxes, smoothed like a grown one.
Track make_track(int id, int first, int last, double conf, Point start, Point vel,
                 double size = 40.0, const RctParams& params = {}) {
  Track t;
  t.id = id;
  t.init_frame = first;
  t.init_confidence = conf;
  for (int f = first; f <= last; ++f) {
    const double k = f - first;
    TrackBox tb;
    tb.frame = f;
    tb.box = box_from_center({start.x + vel.x * k, start.y + vel.y * k}, size, size);
    tb.observed = tb.box;
    tb.source = Source::Detection;
    tb.confidence = conf;
    t.boxes.push_back(tb);
  }
  smooth_track(t, first, params);
  return t;
}

VideoContext no_video(int num_frames) { return {kDims, num_frames, nullptr, {}}; }

synth::ObjectSpec object(Point start, Point vel, std::uint64_t texture = 1) {
  synth::ObjectSpec o;
  o.motion = synth::Motion::linear(start, vel);
  o.texture_seed = texture;
  return o;
}

Track grow_first(const std::vector<Detection>& dets, int num_frames, const RctParams& params,
                 const FrameSource* frames = nullptr) {
  DetectionPool pool(dets, num_frames);
  const auto seed = select_seed(pool, {}, params, kDims);
  REQUIRE(seed);
  std::optional<medianflow::PyramidCache> cache;
  VideoContext video = no_video(num_frames);
  if (frames) {
    cache.emplace(*frames, params.flow);
    video.flow = &*cache;
  }
  return grow_track(*seed, pool, video, params, 1);
}

bool contiguous(const Track& t) {
  for (std::size_t i = 0; i < t.boxes.size(); ++i) {
    if (t.boxes[i].frame != t.first_frame() + static_cast<int>(i)) return false;
    if (t.boxes[i].source == Source::Missing) return false;
  }
  return t.states.size() == t.boxes.size();
}

}  // namespace

TEST_CASE("params: defaults validate, out of range rejected") {
  RctParams p;
  CHECK_NOTHROW(p.validate());
  p.h_init = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.alpha = 0.9;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.delta = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("pool: consumption is exclusive and prefiltering keeps order") {
  DetectionPool pool({det(2, 100, 100, 0.9), det(1, 200, 200, 0.2), det(2, 300, 300, 0.6)});
  CHECK(pool.num_frames() == 2);
  CHECK(pool.on_frame(2).size() == 2);
  CHECK(pool.on_frame(3).empty());
  pool.consume(0);
  CHECK(pool.consumed(0));
  CHECK_THROWS_AS(pool.consume(0), std::logic_error);
  const DetectionPool high = pool.prefiltered(0.5);
  CHECK(high.size() == 2);
  CHECK(high[0].confidence == 0.9);
  CHECK(high[1].confidence == 0.6);
}

TEST_CASE("select_seed") {
  const RctParams params;
  SUBCASE("argmax over all frames") {
    DetectionPool pool({det(1, 320, 240, 0.7), det(3, 320, 240, 0.9)});
    CHECK(select_seed(pool, {}, params, kDims) == 1);
  }
  SUBCASE("edge-hugging best is skipped") {
    DetectionPool pool({det(1, 22, 240, 0.95), det(1, 320, 240, 0.6)});
    CHECK(select_seed(pool, {}, params, kDims) == 1);
  }
  SUBCASE("nothing above h_init") {
    DetectionPool pool({det(1, 320, 240, 0.49), det(2, 100, 100, 0.3)});
    CHECK_FALSE(select_seed(pool, {}, params, kDims));
  }
  SUBCASE("ties: earliest frame, then x, then y") {
    DetectionPool pool({det(2, 100, 100, 0.8), det(1, 300, 100, 0.8), det(1, 200, 300, 0.8),
                        det(1, 200, 200, 0.8)});
    CHECK(select_seed(pool, {}, params, kDims) == 3);
  }
  SUBCASE("consumed and covered detections are skipped") {
    DetectionPool pool({det(1, 320, 240, 0.9), det(1, 330, 240, 0.8), det(1, 100, 100, 0.7)});
    pool.consume(0);
    const std::vector<Track> tracks{make_track(1, 1, 3, 0.9, {320, 240}, {0, 0})};
    CHECK(select_seed(pool, tracks, params, kDims) == 2);
  }
}

TEST_CASE("score_candidate") {
  const auto cfg = kalman::KalmanConfig::defaults();
  const auto pred = kalman::predict(kalman::init(box_from_center({200, 200}, 40, 40), cfg), cfg);
  const Box at_mean = pred.box();

  CHECK(score_candidate({1, at_mean, 0.0}, pred, cfg) == 0.0);
  const double hi = score_candidate({1, at_mean, 0.8}, pred, cfg);
  const double lo = score_candidate({1, at_mean, 0.4}, pred, cfg);
  CHECK(hi / lo == doctest::Approx(2.0).epsilon(1e-12));

  // Predictive std-dev of the x coordinate.
  const Eigen::Matrix4d innov = kalman::observation_matrix() * pred.cov *
                                    kalman::observation_matrix().transpose() +
                                cfg.observation_cov;
  const double sd = std::sqrt(innov(0, 0));
  Box far = at_mean;
  far.x += 3.0 * sd;
  const double near_score = score_candidate({1, at_mean, 0.5}, pred, cfg);
  const double far_score = score_candidate({1, far, 1.0}, pred, cfg);
  CHECK(far_score / near_score == doctest::Approx(std::exp(-4.5) / 0.5).epsilon(1e-9));
  CHECK(near_score > far_score);
}

TEST_CASE("accept_candidate") {
  const auto cfg = kalman::KalmanConfig::defaults();
  kalman::KalmanState prev = kalman::init(box_from_center({200, 200}, 40, 40), cfg);
  prev.mean(kalman::kVx) = 5.0;
  const auto now = kalman::predict(prev, cfg);

  CHECK(accept_candidate(now.box(), now, prev, cfg));

  Box outside = now.box();
  outside.x += 25.0;  // centre beyond the right edge of the predicted box
  CHECK_FALSE(accept_candidate(outside, now, prev, cfg));

  // Still inside the predicted box, but behind the previous position.
  const Box backward = box_from_center({195, 200}, 40, 40);
  CHECK(contains_point(now.box(), center(backward)));
  CHECK_FALSE(accept_candidate(backward, now, prev, cfg));
}

TEST_CASE("grow_track: lone detection") {
  const Track t = grow_first({det(5, 320, 240, 0.9)}, 10, {});
  CHECK(t.covers(5));
  CHECK(t.at(5).source == Source::Detection);
  CHECK(contiguous(t));
}

TEST_CASE("grow_track: dense constant velocity") {
  synth::Rng rng(7);
  std::vector<Detection> dets;
  auto truth = [](int f) { return Point{100.0 + 3.0 * f, 150.0 + 1.5 * f}; };
  for (int f = 1; f <= 60; ++f) {
    const Point c = truth(f);
    dets.push_back(det(f, c.x + 0.5 * rng.normal(), c.y + 0.5 * rng.normal(), 0.9));
  }
  const Track t = grow_first(dets, 60, {});
  REQUIRE(t.first_frame() == 1);
  REQUIRE(t.last_frame() == 60);
  CHECK(contiguous(t));
  for (const TrackBox& tb : t.boxes) {
    CHECK(tb.source == Source::Detection);
    CHECK(distance(center(tb.box), truth(tb.frame)) < 2.0);
  }
}

TEST_CASE("grow_track: Kalman fills a detection gap") {
  RctParams params;
  params.use_medianflow = false;
  std::vector<Detection> dets;
  for (int f = 1; f <= 30; ++f) {
    if (f >= 11 && f <= 15) continue;
    dets.push_back(det(f, 100.0 + 2.0 * f, 200.0, 0.9));
  }
  const Track t = grow_first(dets, 30, params);
  REQUIRE(t.first_frame() == 1);
  REQUIRE(t.last_frame() == 30);
  CHECK(contiguous(t));
  for (int f = 11; f <= 15; ++f) {
    CHECK(t.at(f).source == Source::Motion);
    CHECK(std::abs(center(t.at(f).box).x - (100.0 + 2.0 * f)) < 2.0);
  }
}

TEST_CASE("grow_track: SOT fallback") {
  synth::Scenario sc;
  sc.num_frames = 40;
  sc.jitter = 0.3;
  sc.size_jitter = 0.0;
  auto o = object({150, 200}, {2, 0}, 11);
  o.gaps = {{20, 22}};
  sc.objects = {o};
  const auto syn = synth::generate(sc);

  SUBCASE("healthy SOT replaces the missing frames") {
    const Track t = grow_first(syn.detections, sc.num_frames, {}, syn.frames.get());
    for (int f = 20; f <= 22; ++f) {
      CHECK(t.at(f).source == Source::Sot);
      const Box gt = *synth::object_box(sc, 0, f);
      CHECK(distance(center(t.at(f).box), center(gt)) < 3.0);
    }
  }
  SUBCASE("failing SOT leaves the frames to the Kalman filter") {
    const FunctionFrameSource flat(sc.num_frames, sc.dims,
                                   [&](int) { return GrayFrame(640, 480, 0.5f); });
    const Track t = grow_first(syn.detections, sc.num_frames, {}, &flat);
    for (int f = 20; f <= 22; ++f) CHECK(t.at(f).source == Source::Motion);
  }
  SUBCASE("a detection disagreeing with the SOT box is not adopted") {
    // Small box whose centre lies inside the SOT box but not vice versa.
    std::vector<Detection> dets = syn.detections;
    const Point c = center(*synth::object_box(sc, 0, 23));
    // The real detection on frame 23 is replaced by the stray one.
    std::erase_if(dets, [](const Detection& d) { return d.frame == 23 && d.box.w > 20; });
    dets.push_back({23, box_from_center({c.x + 10.0, c.y}, 8, 8), 0.9});
    DetectionPool pool(dets, sc.num_frames);
    const int stray = static_cast<int>(dets.size()) - 1;
    medianflow::PyramidCache cache(*syn.frames, RctParams{}.flow);
    VideoContext video = no_video(sc.num_frames);
    video.flow = &cache;
    const auto seed = select_seed(pool, {}, RctParams{}, kDims);
    REQUIRE(seed);
    const Track t = grow_track(*seed, pool, video, {}, 1);
    CHECK(t.at(23).source == Source::Sot);
    CHECK_FALSE(pool.consumed(stray));
  }
}

TEST_CASE("replace_after_build") {
  SUBCASE("isolated detection-only tracks are unchanged") {
    std::vector<Track> tracks{make_track(1, 1, 20, 0.9, {100, 100}, {2, 0}),
                              make_track(2, 1, 20, 0.9, {100, 300}, {2, 0})};
    const auto before = tracks;
    const FunctionFrameSource flat(20, kDims, [](int) { return GrayFrame(640, 480, 0.5f); });
    medianflow::PyramidCache cache(flat, RctParams{}.flow);
    VideoContext video = no_video(20);
    video.flow = &cache;
    replace_after_build(tracks, video, {});
    for (std::size_t k = 0; k < tracks.size(); ++k) {
      REQUIRE(tracks[k].boxes.size() == before[k].boxes.size());
      for (std::size_t i = 0; i < tracks[k].boxes.size(); ++i) {
        CHECK(tracks[k].boxes[i].box == before[k].boxes[i].box);
        CHECK(tracks[k].boxes[i].source == before[k].boxes[i].source);
      }
    }
  }
  SUBCASE("overlapped boxes become SOT on textured crossing objects") {
    synth::Scenario sc;
    sc.num_frames = 40;
    sc.jitter = 0.3;
    sc.max_spawn_overlap = 1.0;
    auto [a, b] = synth::crossing_pair({320, 240}, 20, 3.0, 40.0, 1, 0);
    a.texture_seed = 3;
    b.texture_seed = 4;
    sc.objects = {a, b};
    const auto syn = synth::generate(sc);
    std::vector<Track> tracks{make_track(1, 1, 40, 0.9, center(*synth::object_box(sc, 0, 1)),
                                         {3, 0}),
                              make_track(2, 1, 40, 0.9, center(*synth::object_box(sc, 1, 1)),
                                         {-3, 0})};
    medianflow::PyramidCache cache(*syn.frames, RctParams{}.flow);
    VideoContext video = no_video(40);
    video.flow = &cache;
    replace_after_build(tracks, video, {});
    int sot = 0;
    for (const Track& t : tracks) {
      CHECK(contiguous(t));
      for (const TrackBox& tb : t.boxes) {
        sot += tb.source == Source::Sot;
        if (tb.source == Source::Sot) CHECK(tb.frame >= 10);
      }
      CHECK(t.at(20).source != Source::Detection);
    }
    CHECK(sot > 0);
  }
  SUBCASE("overlap without a usable SOT box becomes missing") {
    std::vector<Track> tracks{make_track(1, 1, 20, 0.9, {100, 100}, {2, 0}),
                              make_track(2, 10, 10, 0.9, {118, 110}, {0, 0})};
    const FunctionFrameSource flat(20, kDims, [](int) { return GrayFrame(640, 480, 0.5f); });
    medianflow::PyramidCache cache(flat, RctParams{}.flow);
    VideoContext video = no_video(20);
    video.flow = &cache;
    replace_after_build(tracks, video, {});
    CHECK(tracks[0].at(10).source == Source::Motion);
    CHECK(tracks[0].at(9).source == Source::Detection);
  }
}

TEST_CASE("join_tracks") {
  SUBCASE("fragmented object is joined") {
    std::vector<Track> tracks{make_track(1, 1, 20, 0.9, {100, 200}, {2, 0}),
                              make_track(2, 26, 50, 0.8, {150, 200}, {2, 0})};
    join_tracks(tracks, {});
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].id == 1);
    CHECK(tracks[0].first_frame() == 1);
    CHECK(tracks[0].last_frame() == 50);
    CHECK(contiguous(tracks[0]));
    CHECK(tracks[0].at(23).source == Source::Motion);
    CHECK(std::abs(center(tracks[0].at(23).box).x - 144.0) < 2.0);
  }
  SUBCASE("gap of d_max or more is not joined") {
    std::vector<Track> tracks{make_track(1, 1, 20, 0.9, {100, 200}, {2, 0}),
                              make_track(2, 46, 60, 0.8, {150, 200}, {2, 0})};
    join_tracks(tracks, {});
    CHECK(tracks.size() == 2);
  }
  SUBCASE("opposite directions are not joined") {
    std::vector<Track> tracks{make_track(1, 1, 20, 0.9, {100, 200}, {2, 0}),
                              make_track(2, 23, 45, 0.8, {141, 210}, {-2, 0})};
    join_tracks(tracks, {});
    CHECK(tracks.size() == 2);
  }
  SUBCASE("opposite directions within the distance bound are not joined") {
    // The fast bystander raises v_max enough for the pair to pass on distance.
    std::vector<Track> tracks{make_track(1, 1, 20, 0.9, {100, 200}, {2, 0}),
                              make_track(2, 30, 50, 0.8, {110, 210}, {-2, 0}),
                              make_track(3, 1, 50, 0.9, {100, 400}, {5, 0})};
    join_tracks(tracks, {});
    CHECK(tracks.size() == 3);
  }
  SUBCASE("agreeing temporal overlap is joined") {
    std::vector<Track> tracks{make_track(1, 1, 25, 0.9, {100, 200}, {2, 0}),
                              make_track(2, 20, 45, 0.8, {138, 200}, {2, 0})};
    join_tracks(tracks, {});
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].first_frame() == 1);
    CHECK(tracks[0].last_frame() == 45);
  }
  SUBCASE("disagreeing temporal overlap is not joined") {
    std::vector<Track> tracks{make_track(1, 1, 25, 0.9, {100, 200}, {2, 0}),
                              make_track(2, 20, 45, 0.8, {138, 260}, {2, 0})};
    join_tracks(tracks, {});
    CHECK(tracks.size() == 2);
  }
}

TEST_CASE("filter_tracks") {
  const RctParams params;
  SUBCASE("high-confidence tracks survive the size filter") {
    std::vector<Track> tracks;
    for (int k = 0; k < 5; ++k) {
      tracks.push_back(make_track(k + 1, 1, 30, 0.9, {100.0 + 100 * k, 100}, {0, 1},
                                  30.0 + 10 * k));
    }
    filter_tracks(tracks, params, kDims);
    CHECK(tracks.size() == 5);
  }
  SUBCASE("enormous low-confidence track is removed") {
    std::vector<Track> tracks;
    for (int k = 0; k < 5; ++k) {
      tracks.push_back(
          make_track(k + 1, 1, 100, 0.9, {60.0 + 110 * k, 60}, {0, 3}, 40.0 + k));
    }
    for (int k = 0; k < 6; ++k) {
      tracks.push_back(make_track(10 + k, 1, 5, 0.6, {80.0 + 90 * k, 400}, {0, 0}, 20.0));
    }
    tracks.push_back(make_track(99, 1, 10, 0.6, {320, 240}, {0, 0}, 160.0));
    filter_tracks(tracks, params, kDims);
    CHECK(tracks.size() == 11);
    CHECK(std::none_of(tracks.begin(), tracks.end(), [](const Track& t) { return t.id == 99; }));
  }
  SUBCASE("near-duplicate keeps the more confident track") {
    std::vector<Track> tracks{make_track(1, 1, 20, 0.7, {100, 100}, {1, 0}),
                              make_track(2, 1, 20, 0.9, {110, 100}, {1, 0})};
    CHECK(average_iou(tracks[0], tracks[1]) > 0.5);
    filter_tracks(tracks, params, kDims);
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].id == 2);
  }
  SUBCASE("no high-quality tracks: size filter skipped") {
    std::vector<Track> tracks{make_track(1, 1, 20, 0.6, {100, 100}, {1, 0}),
                              make_track(2, 1, 20, 0.6, {400, 300}, {1, 0}, 200.0)};
    filter_tracks(tracks, params, kDims);
    CHECK(tracks.size() == 2);
  }
}

TEST_CASE("trim_tracks") {
  const RctParams params;
  SUBCASE("onscreen detection track unchanged") {
    std::vector<Track> tracks{make_track(1, 1, 30, 0.9, {100, 100}, {3, 2})};
    const auto before = tracks[0].boxes;
    trim_tracks(tracks, kDims, params);
    REQUIRE(tracks.size() == 1);
    REQUIRE(tracks[0].boxes.size() == before.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(tracks[0].boxes[i].box == before[i].box);
  }
  SUBCASE("object exiting left terminates near the edge") {
    synth::Scenario sc;
    sc.num_frames = 60;
    sc.objects = {object({160, 240}, {-4, 0})};
    const auto syn = synth::generate(sc);
    RctParams p;
    p.use_medianflow = false;
    const auto result = run_rct(DetectionPool(syn.detections, 60), nullptr, p, kDims);
    REQUIRE(result.tracks.size() == 1);
    const Track& t = result.tracks[0];
    int gone = 0;  // first frame the object is entirely offscreen
    for (int f = 1; f <= 60 && !gone; ++f) {
      if (synth::object_box(sc, 0, f)->right() <= 0.0) gone = f;
    }
    CHECK(t.last_frame() <= gone + 3);
    CHECK(t.last_frame() >= gone - 3);
  }
  SUBCASE("trailing missing-derived boxes are trimmed") {
    Track t = make_track(1, 1, 30, 0.9, {100, 100}, {2, 0});
    for (int f = 24; f <= 30; ++f) t.at(f).source = Source::Missing;
    smooth_track(t, 1, params);
    std::vector<Track> tracks{t};
    trim_tracks(tracks, kDims, params);
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].last_frame() == 23);
  }
  SUBCASE("short missing-derived tail is kept") {
    Track t = make_track(1, 1, 30, 0.9, {100, 100}, {2, 0});
    for (int f = 27; f <= 30; ++f) t.at(f).source = Source::Missing;
    smooth_track(t, 1, params);
    std::vector<Track> tracks{t};
    trim_tracks(tracks, kDims, params);
    CHECK(tracks[0].last_frame() == 30);
  }
  SUBCASE("leading missing-derived boxes are trimmed too") {
    Track t = make_track(1, 1, 30, 0.9, {100, 100}, {2, 0});
    for (int f = 1; f <= 6; ++f) t.at(f).source = Source::Missing;
    t.init_frame = 15;
    smooth_track(t, 15, params);
    std::vector<Track> tracks{t};
    trim_tracks(tracks, kDims, params);
    CHECK(tracks[0].first_frame() == 7);
  }
}

TEST_CASE("run_rct: examples") {
  SUBCASE("zero detections") {
    const auto r = run_rct(DetectionPool({}, 10), nullptr, {}, kDims);
    CHECK(r.tracks.empty());
  }
  SUBCASE("missing frames disable SOT with a warning") {
    const auto r = run_rct(DetectionPool({det(1, 320, 240, 0.9)}, 3), nullptr, {}, kDims);
    CHECK_FALSE(r.warnings.empty());
  }
  SUBCASE("expired deadline cancels") {
    const auto past = Deadline(std::chrono::steady_clock::now() - std::chrono::seconds(1));
    CHECK_THROWS_AS(run_rct(DetectionPool({det(1, 320, 240, 0.9)}, 3), nullptr, {}, kDims, past),
                    Cancelled);
  }
  SUBCASE("three objects, dropout, with and without clutter") {
    synth::Scenario sc;
    sc.seed = 5;
    sc.num_frames = 60;
    sc.dropout = 0.05;
    sc.objects = {object({100, 100}, {3, 1}, 1), object({500, 120}, {-2, 1.5}, 2),
                  object({300, 400}, {1, -2}, 3)};
    for (int clutter : {0, 200}) {
      sc.clutter_total = clutter;
      const auto syn = synth::generate(sc);
      const auto r = run_rct(DetectionPool(syn.detections, 60), syn.frames.get(), {}, kDims);
      CHECK(r.tracks.size() == 3);
      for (const Track& t : r.tracks) CHECK(t.init_confidence >= 0.6);
    }
  }
}

// --- properties over random scenes ---------------------------------------------------

namespace {

synth::Scenario random_scene(std::uint64_t seed, int num_frames) {
  synth::Rng rng(seed);
  synth::Scenario sc;
  sc.seed = seed;
  sc.num_frames = num_frames;
  sc.dropout = rng.uniform(0.0, 0.15);
  sc.clutter_total = static_cast<int>(rng.uniform(0, 80));
  const int n = 1 + static_cast<int>(rng.uniform(0, 4));
  for (int k = 0; k < n; ++k) {
    auto o = object({rng.uniform(80, 560), rng.uniform(80, 400)},
                    {rng.uniform(-3, 3), rng.uniform(-3, 3)}, rng.next());
    o.width = o.height = rng.uniform(25, 50);
    o.spawn = 1 + static_cast<int>(rng.uniform(0, num_frames / 3.0));
    sc.objects.push_back(o);
  }
  sc.max_spawn_overlap = 1.0;
  return sc;
}

void check_invariants(const RctResult& r, const DetectionPool& pool, const RctParams& params) {
  std::set<int> used;
  for (const Track& t : r.tracks) {
    CHECK(contiguous(t));
    CHECK(t.init_confidence >= params.h_init);
    for (const TrackBox& tb : t.boxes) {
      if (tb.source != Source::Detection) continue;
      REQUIRE(tb.detection >= 0);
      CHECK(used.insert(tb.detection).second);
      CHECK(pool[tb.detection].frame == tb.frame);
    }
  }
  std::vector<const Track*> by_id;
  for (const Track& t : r.tracks) by_id.push_back(&t);
  std::sort(by_id.begin(), by_id.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < by_id.size(); ++i) {
    CHECK(by_id[i - 1]->init_confidence >= by_id[i]->init_confidence);
  }
  for (std::size_t a = 0; a < r.tracks.size(); ++a) {
    for (std::size_t b = a + 1; b < r.tracks.size(); ++b) {
      CHECK(average_iou(r.tracks[a], r.tracks[b]) <= params.h_f);
    }
  }
}

bool same_tracks(const std::vector<Track>& a, const std::vector<Track>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].id != b[k].id || a[k].boxes.size() != b[k].boxes.size()) return false;
    for (std::size_t i = 0; i < a[k].boxes.size(); ++i) {
      if (!(a[k].boxes[i].box == b[k].boxes[i].box)) return false;
      if (a[k].boxes[i].source != b[k].boxes[i].source) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("property: invariants and determinism on random scenes") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    CAPTURE(seed);
    const auto sc = random_scene(seed, 40);
    const auto syn = synth::generate(sc);
    RctParams params;
    params.use_medianflow = seed % 2 == 0;
    const DetectionPool pool(syn.detections, sc.num_frames);
    const FrameSource* frames = params.use_medianflow ? syn.frames.get() : nullptr;
    const auto r1 = run_rct(pool, frames, params, sc.dims);
    check_invariants(r1, pool, params);
    const auto r2 = run_rct(pool, frames, params, sc.dims);
    CHECK(same_tracks(r1.tracks, r2.tracks));
  }
}

TEST_CASE("property: short gaps are bridged by Kalman motion") {
  synth::Rng rng(99);
  RctParams params;
  params.use_medianflow = false;
  for (int trial = 0; trial < 25; ++trial) {
    const int len = 1 + static_cast<int>(rng.uniform(0, params.delta_m));
    const int start = 8 + static_cast<int>(rng.uniform(0, 20));
    const Point v{rng.uniform(-3, 3), rng.uniform(-3, 3)};
    std::vector<Detection> dets;
    for (int f = 1; f <= 40; ++f) {
      if (f >= start && f < start + len) continue;
      dets.push_back(det(f, 320 + v.x * (f - 20) + 0.5 * rng.normal(),
                         240 + v.y * (f - 20) + 0.5 * rng.normal(), rng.uniform(0.6, 0.95)));
    }
    const auto r = run_rct(DetectionPool(dets, 40), nullptr, params, kDims);
    REQUIRE(r.tracks.size() == 1);
    const Track& t = r.tracks[0];
    CHECK(contiguous(t));
    for (int f = start; f < start + len; ++f) {
      REQUIRE(t.covers(f));
      CHECK(t.at(f).source == Source::Motion);
    }
  }
}

TEST_CASE("property: low-confidence clutter away from objects never changes the track count") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    CAPTURE(seed);
    auto sc = random_scene(seed * 31, 40);
    sc.clutter_total = 0;
    const auto clean = synth::generate(sc);
    sc.clutter_total = 150;
    sc.clutter_conf_hi = 0.49;
    sc.clutter_avoid_objects = true;
    const auto noisy = synth::generate(sc);
    RctParams params;
    params.use_medianflow = false;
    const auto a = run_rct(DetectionPool(clean.detections, 40), nullptr, params, sc.dims);
    const auto b = run_rct(DetectionPool(noisy.detections, 40), nullptr, params, sc.dims);
    CHECK(a.tracks.size() == b.tracks.size());
  }
}
