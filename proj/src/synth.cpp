#include "rct/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "rct/io.hpp"

namespace rct::synth {

// --- randomness ---------------------------------------------------------------------

double Rng::uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

int Rng::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  if (mean > 30.0) {
    return std::max(0, static_cast<int>(std::lround(mean + std::sqrt(mean) * normal())));
  }
  const double limit = std::exp(-mean);
  int k = 0;
  double p = uniform();
  while (p > limit) {
    ++k;
    p *= uniform();
  }
  return k;
}

namespace {

std::uint64_t mix(std::uint64_t h) {
  h ^= h >> 31;
  h *= 0xBF58476D1CE4E5B9ull;
  h ^= h >> 29;
  h *= 0x94D049BB133111EBull;
  h ^= h >> 32;
  return h;
}

}  // namespace

float value_noise(double x, double y, double cell, std::uint64_t seed) {
  auto lattice = [seed](long long ix, long long iy) {
    const std::uint64_t h = mix(seed ^ (static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ull) ^
                                (static_cast<std::uint64_t>(iy) * 0xC2B2AE3D27D4EB4Full));
    return static_cast<float>((h >> 11) * 0x1.0p-53);
  };
  const double gx = x / cell, gy = y / cell;
  const double fx0 = std::floor(gx), fy0 = std::floor(gy);
  const auto ix = static_cast<long long>(fx0), iy = static_cast<long long>(fy0);
  const auto fx = static_cast<float>(gx - fx0), fy = static_cast<float>(gy - fy0);
  const float a = lattice(ix, iy), b = lattice(ix + 1, iy);
  const float c = lattice(ix, iy + 1), d = lattice(ix + 1, iy + 1);
  return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
}

// --- motion ---------------------------------------------------------------------------

Point Motion::at(double t) const {
  Point p{start.x + velocity.x * t, start.y + velocity.y * t};
  if (kind == Kind::Sinusoid && period > 0.0) {
    const double off = amplitude * std::sin(2.0 * std::numbers::pi * t / period + phase);
    (vertical ? p.y : p.x) += off;
  }
  return p;
}

Motion Motion::linear(Point start, Point velocity) {
  Motion m;
  m.start = start;
  m.velocity = velocity;
  return m;
}

Motion Motion::sinusoid(Point start, Point velocity, double amplitude, double period,
                        bool vertical, double phase) {
  Motion m = linear(start, velocity);
  m.kind = Kind::Sinusoid;
  m.amplitude = amplitude;
  m.period = period;
  m.vertical = vertical;
  m.phase = phase;
  return m;
}

Motion Motion::exit_left(Point start, double speed) { return linear(start, {-speed, 0.0}); }
Motion Motion::exit_right(Point start, double speed) { return linear(start, {speed, 0.0}); }
Motion Motion::exit_top(Point start, double speed) { return linear(start, {0.0, -speed}); }
Motion Motion::exit_bottom(Point start, double speed) { return linear(start, {0.0, speed}); }

std::pair<ObjectSpec, ObjectSpec> crossing_pair(Point meet, int meet_frame, double speed,
                                                double size, int spawn, int despawn) {
  ObjectSpec a, b;
  for (ObjectSpec* o : {&a, &b}) {
    o->spawn = spawn;
    o->despawn = despawn;
    o->width = o->height = size;
  }
  const double t = meet_frame - spawn;
  a.motion = Motion::linear({meet.x - speed * t, meet.y}, {speed, 0.0});
  b.motion = Motion::linear({meet.x + speed * t, meet.y}, {-speed, 0.0});
  a.texture_seed = 101;
  b.texture_seed = 202;
  return {a, b};
}

// --- scenario ---------------------------------------------------------------------------

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("scenario: " + what); };
  if (!dims.valid()) fail("frame size must be positive");
  if (num_frames < 1) fail("frames must be >= 1");
  if (jitter < 0.0 || size_jitter < 0.0) fail("jitter must be >= 0");
  if (dropout < 0.0 || dropout > 1.0) fail("dropout outside [0,1]");
  auto conf_range = [&](double lo, double hi, const char* name) {
    if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) fail(std::string(name) + " confidence range");
  };
  conf_range(object_conf_lo, object_conf_hi, "object");
  conf_range(clutter_conf_lo, clutter_conf_hi, "clutter");
  if (clutter_rate < 0.0) fail("clutter_rate must be >= 0");
  if (!(clutter_min_size > 0.0 && clutter_min_size <= clutter_max_size)) fail("clutter size range");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const ObjectSpec& o = objects[i];
    const std::string name = "object " + std::to_string(i + 1) + ": ";
    if (!(o.width > 0.0 && o.height > 0.0)) fail(name + "size must be positive");
    if (o.spawn < 1 || o.spawn > num_frames) fail(name + "spawn outside the video");
    if (o.despawn != 0 && (o.despawn < o.spawn || o.despawn > num_frames)) fail(name + "despawn");
    if (o.low_value < 0.0 || o.low_value > 1.0) fail(name + "low confidence outside [0,1]");
    if (o.contrast < 0.0) fail(name + "contrast must be >= 0");
  }
}

std::optional<Box> object_box(const Scenario& sc, std::size_t object, int frame) {
  const ObjectSpec& o = sc.objects.at(object);
  const int last = o.despawn == 0 ? sc.num_frames : o.despawn;
  if (frame < o.spawn || frame > last) return std::nullopt;
  return box_from_center(o.motion.at(frame - o.spawn), o.width, o.height);
}

namespace {

std::optional<Box> clip_visible(const Box& b, FrameDims dims, double min_visible) {
  const double x0 = std::max(b.x, 0.0), y0 = std::max(b.y, 0.0);
  const double x1 = std::min(b.right(), static_cast<double>(dims.width));
  const double y1 = std::min(b.bottom(), static_cast<double>(dims.height));
  if (x1 - x0 < min_visible || y1 - y0 < min_visible) return std::nullopt;
  return Box{x0, y0, x1 - x0, y1 - y0};
}

bool in_any(const std::vector<FrameRange>& ranges, int f) {
  return std::any_of(ranges.begin(), ranges.end(), [f](const FrameRange& r) { return r.contains(f); });
}

}  // namespace

SyntheticFrames::SyntheticFrames(Scenario sc) : sc_(std::move(sc)) {
  const int w = sc_.dims.width, h = sc_.dims.height;
  background_ = GrayFrame(w, h);
  const float bc = static_cast<float>(sc_.background_contrast);
  const std::uint64_t bg_seed = mix(sc_.seed ^ 0xB6B6B6ull);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float n = value_noise(x + 0.5, y + 0.5, 8.0, bg_seed);
      background_.at(x, y) = 0.4f + bc * 0.4f * (n - 0.5f);
    }
  }
}

GrayFrame SyntheticFrames::load(int frame) const {
  if (frame < 1 || frame > sc_.num_frames) throw std::out_of_range("synthetic frame out of range");
  const int w = sc_.dims.width, h = sc_.dims.height;
  GrayFrame img = background_;
  for (std::size_t i = 0; i < sc_.objects.size(); ++i) {
    const auto box = object_box(sc_, i, frame);
    if (!box) continue;
    const ObjectSpec& o = sc_.objects[i];
    const float c = static_cast<float>(o.contrast);
    const std::uint64_t tex = mix(o.texture_seed * 0x2545F4914F6CDD1Dull + 7);
    const int x0 = std::max(0, static_cast<int>(std::floor(box->x - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(box->y - 0.5)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(box->right())));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(box->bottom())));
    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      if (py < box->y || py >= box->bottom()) continue;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        if (px < box->x || px >= box->right()) continue;
        const float n = value_noise(px - box->x, py - box->y, 4.0, tex);
        img.at(x, y) = std::clamp(0.55f + c * 0.8f * (n - 0.5f), 0.0f, 1.0f);
      }
    }
  }
  return img;
}

Synthetic generate(const Scenario& sc) {
  sc.validate();
  // Spawn overlap check.
  for (std::size_t i = 0; i < sc.objects.size(); ++i) {
    const auto bi = object_box(sc, i, sc.objects[i].spawn);
    for (std::size_t j = 0; j < sc.objects.size(); ++j) {
      if (i == j) continue;
      const auto bj = object_box(sc, j, sc.objects[i].spawn);
      if (bi && bj && iou(*bi, *bj) > sc.max_spawn_overlap) {
        throw std::invalid_argument("scenario: objects " + std::to_string(i + 1) + " and " +
                                    std::to_string(j + 1) + " overlap at spawn");
      }
    }
  }

  Synthetic out;
  out.frames = std::make_shared<SyntheticFrames>(sc);
  Rng rng(sc.seed);

  std::vector<int> clutter_per_frame(static_cast<std::size_t>(sc.num_frames) + 1, 0);
  if (sc.clutter_total >= 0) {
    for (int k = 0; k < sc.clutter_total; ++k) {
      const int f = 1 + static_cast<int>(rng.uniform() * sc.num_frames);
      ++clutter_per_frame[std::min(f, sc.num_frames)];
    }
  } else {
    for (int f = 1; f <= sc.num_frames; ++f) clutter_per_frame[f] = rng.poisson(sc.clutter_rate);
  }

  for (int f = 1; f <= sc.num_frames; ++f) {
    std::vector<Box> truth;
    for (std::size_t i = 0; i < sc.objects.size(); ++i) {
      const auto box = object_box(sc, i, f);
      if (!box) continue;
      const auto visible = clip_visible(*box, sc.dims, sc.min_visible);
      if (!visible) continue;
      truth.push_back(*visible);
      out.ground_truth.push_back({f, static_cast<int>(i) + 1, *visible, 1.0});

      const ObjectSpec& o = sc.objects[i];
      const double drop = rng.uniform();
      const double jx = rng.normal(), jy = rng.normal(), jw = rng.normal(), jh = rng.normal();
      const double conf = rng.uniform(sc.object_conf_lo, sc.object_conf_hi);
      if (in_any(o.gaps, f) || drop < sc.dropout) continue;
      const Point c = center(*visible);
      const Box noisy = box_from_center({c.x + sc.jitter * jx, c.y + sc.jitter * jy},
                                        visible->w * std::max(0.2, 1.0 + sc.size_jitter * jw),
                                        visible->h * std::max(0.2, 1.0 + sc.size_jitter * jh));
      const auto det = clip_visible(noisy, sc.dims, 1.0);
      if (!det) continue;
      out.detections.push_back({f, *det, in_any(o.low_confidence, f) ? o.low_value : conf});
    }

    for (int k = 0; k < clutter_per_frame[f]; ++k) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        const double w = rng.uniform(sc.clutter_min_size, sc.clutter_max_size);
        const double h = w * rng.uniform(0.8, 1.25);
        const double x = rng.uniform(0.0, std::max(0.0, sc.dims.width - w));
        const double y = rng.uniform(0.0, std::max(0.0, sc.dims.height - h));
        const double conf = rng.uniform(sc.clutter_conf_lo, sc.clutter_conf_hi);
        const Box b{x, y, std::min(w, static_cast<double>(sc.dims.width)),
                    std::min(h, static_cast<double>(sc.dims.height))};
        if (sc.clutter_avoid_objects &&
            std::any_of(truth.begin(), truth.end(),
                        [&](const Box& t) { return intersection_area(t, b) > 0.0; })) {
          continue;
        }
        out.detections.push_back({f, b, conf});
        break;
      }
    }
  }
  normalize(out.ground_truth);
  return out;
}

// --- scenario text format ----------------------------------------------------------------

namespace {

std::vector<FrameRange> parse_ranges(const std::string& s) {
  std::vector<FrameRange> out;
  std::size_t start = 0;
  while (start < s.size()) {
    std::size_t end = s.find(';', start);
    if (end == std::string::npos) end = s.size();
    const std::string item = s.substr(start, end - start);
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      const int f = static_cast<int>(io::parse_int(item));
      out.push_back({f, f});
    } else {
      out.push_back({static_cast<int>(io::parse_int(item.substr(0, dash))),
                     static_cast<int>(io::parse_int(item.substr(dash + 1)))});
    }
    if (out.back().last < out.back().first) throw std::invalid_argument("empty frame range: " + item);
    start = end + 1;
  }
  return out;
}

std::string format_ranges(const std::vector<FrameRange>& rs) {
  std::string out;
  for (const FrameRange& r : rs) {
    if (!out.empty()) out += ';';
    out += std::to_string(r.first) + '-' + std::to_string(r.last);
  }
  return out;
}

using Fields = std::map<std::string, std::string>;

double get(const Fields& f, const char* key, double fallback) {
  const auto it = f.find(key);
  return it == f.end() ? fallback : io::parse_double(it->second);
}

int get_int(const Fields& f, const char* key, int fallback) {
  const auto it = f.find(key);
  return it == f.end() ? fallback : static_cast<int>(io::parse_int(it->second));
}

void check_known(const Fields& f, std::initializer_list<const char*> known, const std::string& what) {
  for (const auto& [k, v] : f) {
    if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; })) {
      throw std::invalid_argument("unknown " + what + " key: " + k);
    }
  }
}

ObjectSpec build_object(const Fields& f) {
  check_known(f, {"motion", "x", "y", "vx", "vy", "speed", "amplitude", "period", "phase", "axis",
                  "width", "height", "size", "spawn", "despawn", "texture", "contrast", "gaps",
                  "low", "low_confidence"},
              "object");
  ObjectSpec o;
  o.spawn = get_int(f, "spawn", 1);
  o.despawn = get_int(f, "despawn", 0);
  const double size = get(f, "size", 40.0);
  o.width = get(f, "width", size);
  o.height = get(f, "height", size);
  o.texture_seed = static_cast<std::uint64_t>(get_int(f, "texture", 1));
  o.contrast = get(f, "contrast", 1.0);
  o.low_value = get(f, "low_confidence", 0.2);
  if (const auto it = f.find("gaps"); it != f.end()) o.gaps = parse_ranges(it->second);
  if (const auto it = f.find("low"); it != f.end()) o.low_confidence = parse_ranges(it->second);

  const Point start{get(f, "x", 0.0), get(f, "y", 0.0)};
  const Point vel{get(f, "vx", 0.0), get(f, "vy", 0.0)};
  const double speed = get(f, "speed", 3.0);
  const auto it = f.find("motion");
  const std::string kind = it == f.end() ? "linear" : it->second;
  if (kind == "linear") {
    o.motion = Motion::linear(start, vel);
  } else if (kind == "sinusoid") {
    const auto axis = f.find("axis");
    const bool vertical = axis == f.end() || axis->second == "y";
    if (axis != f.end() && axis->second != "x" && axis->second != "y") {
      throw std::invalid_argument("axis must be x or y");
    }
    o.motion = Motion::sinusoid(start, vel, get(f, "amplitude", 40.0), get(f, "period", 48.0),
                                vertical, get(f, "phase", 0.0));
  } else if (kind == "exit_left") {
    o.motion = Motion::exit_left(start, speed);
  } else if (kind == "exit_right") {
    o.motion = Motion::exit_right(start, speed);
  } else if (kind == "exit_top") {
    o.motion = Motion::exit_top(start, speed);
  } else if (kind == "exit_bottom") {
    o.motion = Motion::exit_bottom(start, speed);
  } else {
    throw std::invalid_argument("unknown motion: " + kind);
  }
  return o;
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::string& source) {
  Scenario sc;
  std::map<int, Fields> objects, crossings;
  for (const io::KeyValue& kv : io::parse_key_values(text, source)) {
    try {
      const auto dot = kv.key.find('.');
      if (dot != std::string::npos) {
        const std::string group = kv.key.substr(0, dot);
        const std::string field = kv.key.substr(dot + 1);
        auto number = [&](std::size_t prefix) {
          const long long n = io::parse_int(group.substr(prefix));
          if (n < 0 || n > 100000) throw std::invalid_argument("bad index in " + kv.key);
          return static_cast<int>(n);
        };
        if (group.rfind("object", 0) == 0 && group.size() > 6) {
          objects[number(6)][field] = kv.value;
        } else if (group.rfind("crossing", 0) == 0 && group.size() > 8) {
          crossings[number(8)][field] = kv.value;
        } else {
          throw std::invalid_argument("unknown scenario key: " + kv.key);
        }
        continue;
      }
      const std::string& k = kv.key;
      const std::string& v = kv.value;
      if (k == "seed") sc.seed = static_cast<std::uint64_t>(io::parse_int(v));
      else if (k == "width") sc.dims.width = static_cast<int>(io::parse_int(v));
      else if (k == "height") sc.dims.height = static_cast<int>(io::parse_int(v));
      else if (k == "frames") sc.num_frames = static_cast<int>(io::parse_int(v));
      else if (k == "jitter") sc.jitter = io::parse_double(v);
      else if (k == "size_jitter") sc.size_jitter = io::parse_double(v);
      else if (k == "dropout") sc.dropout = io::parse_double(v);
      else if (k == "object_conf_lo") sc.object_conf_lo = io::parse_double(v);
      else if (k == "object_conf_hi") sc.object_conf_hi = io::parse_double(v);
      else if (k == "clutter_rate") sc.clutter_rate = io::parse_double(v);
      else if (k == "clutter_total") sc.clutter_total = static_cast<int>(io::parse_int(v));
      else if (k == "clutter_conf_lo") sc.clutter_conf_lo = io::parse_double(v);
      else if (k == "clutter_conf_hi") sc.clutter_conf_hi = io::parse_double(v);
      else if (k == "clutter_min_size") sc.clutter_min_size = io::parse_double(v);
      else if (k == "clutter_max_size") sc.clutter_max_size = io::parse_double(v);
      else if (k == "clutter_avoid_objects") sc.clutter_avoid_objects = io::parse_bool(v);
      else if (k == "background_contrast") sc.background_contrast = io::parse_double(v);
      else if (k == "min_visible") sc.min_visible = io::parse_double(v);
      else if (k == "max_spawn_overlap") sc.max_spawn_overlap = io::parse_double(v);
      else throw std::invalid_argument("unknown scenario key: " + k);
    } catch (const std::invalid_argument& e) {
      throw io::ParseError(source, kv.line, e.what());
    }
  }
  try {
    for (const auto& [n, f] : objects) sc.objects.push_back(build_object(f));
    for (const auto& [n, f] : crossings) {
      check_known(f, {"x", "y", "frame", "speed", "size", "spawn", "despawn"}, "crossing");
      const int spawn = get_int(f, "spawn", 1);
      const auto [a, b] = crossing_pair({get(f, "x", sc.dims.width / 2.0), get(f, "y", sc.dims.height / 2.0)},
                                        get_int(f, "frame", sc.num_frames / 2), get(f, "speed", 3.0),
                                        get(f, "size", 40.0), spawn, get_int(f, "despawn", 0));
      sc.objects.push_back(a);
      sc.objects.push_back(b);
    }
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw io::ParseError(source, 0, e.what());
  }
  return sc;
}

std::string format_scenario(const Scenario& sc) {
  using io::format_double;
  std::string out;
  auto line = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  line("seed", std::to_string(sc.seed));
  line("width", std::to_string(sc.dims.width));
  line("height", std::to_string(sc.dims.height));
  line("frames", std::to_string(sc.num_frames));
  line("jitter", format_double(sc.jitter));
  line("size_jitter", format_double(sc.size_jitter));
  line("dropout", format_double(sc.dropout));
  line("object_conf_lo", format_double(sc.object_conf_lo));
  line("object_conf_hi", format_double(sc.object_conf_hi));
  line("clutter_rate", format_double(sc.clutter_rate));
  line("clutter_total", std::to_string(sc.clutter_total));
  line("clutter_conf_lo", format_double(sc.clutter_conf_lo));
  line("clutter_conf_hi", format_double(sc.clutter_conf_hi));
  line("clutter_min_size", format_double(sc.clutter_min_size));
  line("clutter_max_size", format_double(sc.clutter_max_size));
  line("clutter_avoid_objects", sc.clutter_avoid_objects ? "true" : "false");
  line("background_contrast", format_double(sc.background_contrast));
  line("min_visible", format_double(sc.min_visible));
  line("max_spawn_overlap", format_double(sc.max_spawn_overlap));
  for (std::size_t i = 0; i < sc.objects.size(); ++i) {
    const ObjectSpec& o = sc.objects[i];
    const std::string p = "object" + std::to_string(i + 1) + ".";
    const bool sin = o.motion.kind == Motion::Kind::Sinusoid;
    line(p + "motion", sin ? "sinusoid" : "linear");
    line(p + "x", format_double(o.motion.start.x));
    line(p + "y", format_double(o.motion.start.y));
    line(p + "vx", format_double(o.motion.velocity.x));
    line(p + "vy", format_double(o.motion.velocity.y));
    if (sin) {
      line(p + "amplitude", format_double(o.motion.amplitude));
      line(p + "period", format_double(o.motion.period));
      line(p + "phase", format_double(o.motion.phase));
      line(p + "axis", o.motion.vertical ? "y" : "x");
    }
    line(p + "width", format_double(o.width));
    line(p + "height", format_double(o.height));
    line(p + "spawn", std::to_string(o.spawn));
    line(p + "despawn", std::to_string(o.despawn));
    line(p + "texture", std::to_string(o.texture_seed));
    line(p + "contrast", format_double(o.contrast));
    if (!o.gaps.empty()) line(p + "gaps", format_ranges(o.gaps));
    if (!o.low_confidence.empty()) line(p + "low", format_ranges(o.low_confidence));
    line(p + "low_confidence", format_double(o.low_value));
  }
  return out;
}

}  // namespace rct::synth
