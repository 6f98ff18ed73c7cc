#include <stdexcept>

#include "rct/synth.hpp"

namespace rct::synth {

namespace {

ObjectSpec linear(Point start, Point velocity, std::uint64_t texture, double size = 40.0) {
  ObjectSpec o;
  o.motion = Motion::linear(start, velocity);
  o.texture_seed = texture;
  o.width = o.height = size;
  return o;
}

// Three non-interacting constant-velocity objects under dropout and
// low-confidence clutter.
Scenario three_objects(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.num_frames = 100;
  sc.dropout = 0.05;
  sc.clutter_total = 200;
  sc.objects = {linear({100, 100}, {3, 1}, 11), linear({520, 120}, {-2, 1.5}, 12),
                linear({300, 400}, {1.5, -2}, 13)};
  return sc;
}

// Objects whose detections turn low-confidence for long stretches while
// they are hard to see (flat appearance, so flow cannot help either).
Scenario gap_bridging(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.num_frames = 120;
  sc.clutter_rate = 1.0;
  const std::vector<ObjectSpec> objs{
      linear({80, 80}, {3.5, 1.2}, 21), linear({560, 100}, {-3, 2}, 22),
      linear({120, 400}, {3, -1.5}, 23), linear({540, 380}, {-3.2, -1}, 24)};
  for (std::size_t i = 0; i < objs.size(); ++i) {
    ObjectSpec o = objs[i];
    o.contrast = 0.0;
    const int start = 25 + 15 * static_cast<int>(i);
    o.low_confidence = {{start, start + 29}};
    sc.objects.push_back(o);
  }
  return sc;
}

// Sinusoidal motion with a 10-frame detection gap around a turning point.
Scenario sinusoid_gap(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.num_frames = 90;
  ObjectSpec o;
  o.motion = Motion::sinusoid({80, 240}, {5, 0}, 60, 40);
  o.texture_seed = 31;
  o.gaps = {{26, 35}};
  sc.objects = {o};
  return sc;
}

// Objects leaving through each edge long before the video ends.
Scenario exits(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.num_frames = 120;
  sc.clutter_total = 50;
  ObjectSpec l, r, t, b;
  l.motion = Motion::exit_left({200, 120}, 4);
  r.motion = Motion::exit_right({440, 360}, 4);
  t.motion = Motion::exit_top({320, 180}, 3);
  b.motion = Motion::exit_bottom({160, 330}, 3);
  std::uint64_t tex = 41;
  for (ObjectSpec* o : {&l, &r, &t, &b}) {
    o->texture_seed = tex++;
    sc.objects.push_back(*o);
  }
  return sc;
}

// Two objects crossing paths plus a bystander.
Scenario crossing(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.num_frames = 100;
  sc.dropout = 0.05;
  sc.clutter_total = 100;
  const auto [a, b] = crossing_pair({320, 240}, 50, 3.0, 40.0, 1, 0);
  sc.objects = {a, b, linear({100, 420}, {2, -1}, 51)};
  return sc;
}

// An object whose detections vanish for longer than flow or the motion
// model can follow, leaving two fragments to be joined.
Scenario fragmented(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.num_frames = 100;
  ObjectSpec o;
  o.motion = Motion::sinusoid({60, 200}, {4, 0}, 50, 60);
  o.contrast = 0.0;
  o.gaps = {{40, 52}};
  sc.objects = {o, linear({500, 420}, {-2, -0.5}, 61)};
  return sc;
}

// Long video with ~20 detections per frame.
Scenario throughput(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.num_frames = 2000;
  sc.dropout = 0.05;
  sc.clutter_rate = 10.0;
  Rng rng(seed ^ 0x5eedull);
  for (int k = 0; k < 10; ++k) {
    ObjectSpec o;
    const Point c{80.0 + 120.0 * (k % 5), 120.0 + 240.0 * (k / 5)};
    o.motion = Motion::sinusoid(c, {0, 0}, rng.uniform(20, 40), rng.uniform(60, 150), k % 2 == 0,
                                rng.uniform(0, 6.28));
    o.texture_seed = 70 + static_cast<std::uint64_t>(k);
    o.width = o.height = 36;
    sc.objects.push_back(o);
  }
  return sc;
}

struct Preset {
  const char* name;
  Scenario (*make)(std::uint64_t);
};

constexpr Preset kPresets[] = {
    {"three_objects", three_objects}, {"gap_bridging", gap_bridging},
    {"sinusoid_gap", sinusoid_gap},   {"exits", exits},
    {"crossing", crossing},           {"fragmented", fragmented},
    {"throughput", throughput},
};

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const Preset& p : kPresets) out.emplace_back(p.name);
  return out;
}

Scenario preset(const std::string& name, std::uint64_t seed) {
  for (const Preset& p : kPresets) {
    if (name == p.name) return p.make(seed);
  }
  throw std::invalid_argument("unknown scenario preset: " + name);
}

}  // namespace rct::synth
