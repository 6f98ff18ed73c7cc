#include "rct/io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

namespace rct::io {

ParseError::ParseError(const std::string& source, int line, const std::string& what)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + what
                                  : source + ": " + what),
      line_(line) {}

// --- scalar parsing ---------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r' && c != '\n'; };
  while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Iterates over lines, skipping blanks and `#` comments.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  int number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view line = text.substr(start, end - start);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (!line.empty()) fn(line, number);
    if (end == text.size()) break;
    start = end + 1;
  }
}

}  // namespace

double parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("not a finite number: '" + std::string(s) + "'");
  }
  return v;
}

long long parse_int(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    // Accept integral values written as decimals, e.g. "12.0".
    double d = 0.0;
    try {
      d = parse_double(s);
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
    }
    if (d != std::floor(d) || std::abs(d) > 9.0e15) {
      throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
    }
    return static_cast<long long>(d);
  }
  return v;
}

bool parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  throw std::invalid_argument("not a boolean: '" + std::string(s) + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

std::string fixed6(double v) {
  if (std::abs(v) < 5e-7) v = 0.0;  // no "-0.000000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int frame_number(std::string_view s) {
  const long long f = parse_int(s);
  if (f < 1 || f > 100'000'000) throw std::invalid_argument("frame out of range");
  return static_cast<int>(f);
}

Box parse_box(std::string_view x, std::string_view y, std::string_view w, std::string_view h) {
  Box b{parse_double(x), parse_double(y), parse_double(w), parse_double(h)};
  if (b.w < 0.0 || b.h < 0.0) throw std::invalid_argument("negative box size");
  return b;
}

}  // namespace

// --- files ----------------------------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw std::runtime_error("cannot read " + path.string());
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("cannot write " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot move output into place: " + path.string());
  }
}

// --- detections -------------------------------------------------------------------------

std::vector<Detection> parse_detections(std::string_view text, const std::string& source) {
  std::vector<Detection> out;
  for_each_line(text, [&](std::string_view line, int number) {
    const auto f = split(line, ',');
    if (f.size() != 6) {
      throw ParseError(source, number, "expected 6 fields (frame,x,y,w,h,confidence), got " +
                                           std::to_string(f.size()));
    }
    Detection d;
    try {
      d.frame = frame_number(f[0]);
      d.box = parse_box(f[1], f[2], f[3], f[4]);
      d.confidence = parse_double(f[5]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, number, e.what());
    }
    if (d.confidence < 0.0 || d.confidence > 1.0) {
      throw ParseError(source, number, "confidence outside [0,1]");
    }
    out.push_back(d);
  });
  return out;
}

std::vector<Detection> read_detections(const fs::path& path) {
  return parse_detections(read_file(path), path.string());
}

std::string format_detections(const std::vector<Detection>& dets) {
  std::string out;
  for (const Detection& d : dets) {
    out += std::to_string(d.frame) + ',' + fixed6(d.box.x) + ',' + fixed6(d.box.y) + ',' +
           fixed6(d.box.w) + ',' + fixed6(d.box.h) + ',' + fixed6(d.confidence) + '\n';
  }
  return out;
}

// --- MOT ------------------------------------------------------------------------------------

TrackSet parse_mot(std::string_view text, const std::string& source) {
  TrackSet rows;
  std::set<std::pair<int, int>> seen;
  for_each_line(text, [&](std::string_view line, int number) {
    const auto f = split(line, ',');
    if (f.size() < 6) {
      throw ParseError(source, number, "expected at least 6 fields (frame,id,x,y,w,h,...)");
    }
    MotRow r;
    try {
      r.frame = frame_number(f[0]);
      const long long id = parse_int(f[1]);
      if (id < 0 || id > 1'000'000'000) throw std::invalid_argument("id out of range");
      r.id = static_cast<int>(id);
      r.box = parse_box(f[2], f[3], f[4], f[5]);
      r.confidence = f.size() >= 7 ? parse_double(f[6]) : 1.0;
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, number, e.what());
    }
    if (!seen.emplace(r.frame, r.id).second) {
      throw ParseError(source, number, "duplicate (frame, id) pair");
    }
    rows.push_back(r);
  });
  normalize(rows);
  return rows;
}

TrackSet read_mot(const fs::path& path) { return parse_mot(read_file(path), path.string()); }

std::string format_mot(TrackSet rows) {
  normalize(rows);
  std::string out;
  out.reserve(rows.size() * 64);
  for (const MotRow& r : rows) {
    out += std::to_string(r.frame) + ',' + std::to_string(r.id) + ',' + fixed6(r.box.x) + ',' +
           fixed6(r.box.y) + ',' + fixed6(r.box.w) + ',' + fixed6(r.box.h) + ',' +
           fixed6(r.confidence) + ",-1,-1,-1\n";
  }
  return out;
}

void write_mot(const fs::path& path, TrackSet rows) {
  write_file_atomic(path, format_mot(std::move(rows)));
}

void write_tracks(const fs::path& path, const std::vector<Track>& tracks) {
  for (const Track& t : tracks) {
    for (std::size_t i = 0; i < t.boxes.size(); ++i) {
      const TrackBox& b = t.boxes[i];
      if (b.frame != t.boxes.front().frame + static_cast<int>(i)) {
        throw std::invalid_argument("track " + std::to_string(t.id) + " is not contiguous");
      }
      if (b.source == Source::Missing) {
        throw std::invalid_argument("track " + std::to_string(t.id) + " has a missing box on frame " +
                                    std::to_string(b.frame));
      }
    }
  }
  write_mot(path, to_track_set(tracks));
}

// --- images ------------------------------------------------------------------------------------

float luma(unsigned r, unsigned g, unsigned b, unsigned maxval) {
  const unsigned long y = (299ul * r + 587ul * g + 114ul * b + 500ul) / 1000ul;
  return static_cast<float>(static_cast<double>(y) / static_cast<double>(maxval));
}

namespace {

enum class Format { Png, Pgm, Ppm };

Format sniff(const std::string& head, const fs::path& path) {
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (head.size() >= 8 && std::memcmp(head.data(), png_sig, 8) == 0) return Format::Png;
  if (head.size() >= 2 && head[0] == 'P' && head[1] == '5') return Format::Pgm;
  if (head.size() >= 2 && head[0] == 'P' && head[1] == '6') return Format::Ppm;
  throw std::runtime_error("unsupported image format: " + path.string());
}

struct Netpbm {
  Format format;
  int width = 0, height = 0;
  unsigned maxval = 0;
  std::size_t offset = 0;  // start of pixel data
};

Netpbm parse_netpbm_header(const std::string& data, const fs::path& path) {
  Netpbm h;
  h.format = data[1] == '5' ? Format::Pgm : Format::Ppm;
  std::size_t pos = 2;
  long values[3] = {0, 0, 0};
  for (long& v : values) {
    // Skip whitespace and comments.
    for (;;) {
      while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
      if (pos < data.size() && data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos])) &&
           pos - start < 9) {
      ++pos;
    }
    if (pos == start) throw std::runtime_error("bad netpbm header: " + path.string());
    v = std::stol(data.substr(start, pos - start));
  }
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos]))) {
    throw std::runtime_error("bad netpbm header: " + path.string());
  }
  ++pos;
  if (values[0] <= 0 || values[1] <= 0 || values[0] > 65535 || values[1] > 65535 ||
      values[2] <= 0 || values[2] > 65535) {
    throw std::runtime_error("bad netpbm header values: " + path.string());
  }
  h.width = static_cast<int>(values[0]);
  h.height = static_cast<int>(values[1]);
  h.maxval = static_cast<unsigned>(values[2]);
  h.offset = pos;
  return h;
}

// Pixel samples as unsigned values with the file's maxval.
struct Samples {
  int width = 0, height = 0, channels = 0;
  unsigned maxval = 255;
  std::vector<unsigned> data;
};

Samples read_samples(const fs::path& path) {
  const std::string data = read_file(path);
  const Format fmt = sniff(data.substr(0, 8), path);
  Samples s;
  if (fmt == Format::Png) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, data.data(), data.size())) {
      throw std::runtime_error("cannot decode PNG " + path.string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
      png_image_free(&image);
      throw std::runtime_error("cannot decode PNG " + path.string() + ": " + image.message);
    }
    s.width = static_cast<int>(image.width);
    s.height = static_cast<int>(image.height);
    s.channels = 3;
    s.data.assign(buf.begin(), buf.end());
    return s;
  }
  const Netpbm h = parse_netpbm_header(data, path);
  s.width = h.width;
  s.height = h.height;
  s.channels = h.format == Format::Pgm ? 1 : 3;
  s.maxval = h.maxval;
  const std::size_t bytes_per = h.maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(s.width) * s.height * s.channels;
  if (data.size() < h.offset + n * bytes_per) {
    throw std::runtime_error("truncated image: " + path.string());
  }
  s.data.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(data.data() + h.offset);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned v = bytes_per == 2 ? (p[2 * i] << 8u) | p[2 * i + 1] : p[i];
    s.data[i] = std::min(v, h.maxval);
  }
  return s;
}

}  // namespace

RgbImage read_rgb(const fs::path& path) {
  const Samples s = read_samples(path);
  RgbImage img(s.width, s.height);
  const std::size_t n = static_cast<std::size_t>(s.width) * s.height;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const unsigned v = s.channels == 1 ? s.data[i] : s.data[3 * i + c];
      img.data[3 * i + c] = static_cast<std::uint8_t>((v * 255u + s.maxval / 2) / s.maxval);
    }
  }
  return img;
}

GrayFrame read_gray(const fs::path& path) {
  const Samples s = read_samples(path);
  GrayFrame f(s.width, s.height);
  const std::size_t n = f.pixels.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (s.channels == 1) {
      f.pixels[i] = static_cast<float>(static_cast<double>(s.data[i]) / s.maxval);
    } else {
      f.pixels[i] = luma(s.data[3 * i], s.data[3 * i + 1], s.data[3 * i + 2], s.maxval);
    }
  }
  return f;
}

FrameDims read_dims(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string head(64, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  const Format fmt = sniff(head, path);
  if (fmt == Format::Png) {
    // IHDR follows the signature: length(4) "IHDR" width(4) height(4).
    if (head.size() < 24 || head.compare(12, 4, "IHDR") != 0) {
      throw std::runtime_error("bad PNG header: " + path.string());
    }
    auto be32 = [&](std::size_t o) {
      const auto* p = reinterpret_cast<const unsigned char*>(head.data() + o);
      return (static_cast<unsigned long>(p[0]) << 24) | (p[1] << 16) | (p[2] << 8) | p[3];
    };
    const unsigned long w = be32(16), h = be32(20);
    if (w == 0 || h == 0 || w > 65535 || h > 65535) {
      throw std::runtime_error("bad PNG size: " + path.string());
    }
    return {static_cast<int>(w), static_cast<int>(h)};
  }
  const Netpbm h = parse_netpbm_header(head, path);
  return {h.width, h.height};
}

GrayFrame to_gray(const RgbImage& img) {
  GrayFrame f(img.width, img.height);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) {
    f.pixels[i] = luma(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]);
  }
  return f;
}

void write_png(const fs::path& path, const RgbImage& img) {
  if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("empty image");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("cannot encode PNG: ") + image.message);
  }
  std::string buf(size, '\0');
  if (!png_image_write_to_memory(&image, buf.data(), &size, 0, img.data.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("cannot encode PNG: ") + image.message);
  }
  buf.resize(size);
  write_file_atomic(path, buf);
}

void write_pgm(const fs::path& path, const GrayFrame& frame) {
  std::string out = "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) +
                    "\n255\n";
  out.reserve(out.size() + frame.pixels.size());
  for (float v : frame.pixels) {
    out.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  }
  write_file_atomic(path, out);
}

DirectoryFrameSource::DirectoryFrameSource(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::map<long long, fs::path> numbered;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".png" && ext != ".pgm" && ext != ".ppm") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.empty() || stem.size() > 12 ||
        !std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); })) {
      continue;
    }
    const long long n = std::stoll(stem);
    if (!numbered.emplace(n, entry.path()).second) {
      throw std::runtime_error("two files for frame " + std::to_string(n) + " in " + dir.string());
    }
  }
  if (numbered.empty()) throw std::runtime_error("no numbered frames in " + dir.string());
  const long long first = numbered.begin()->first;
  if (first != 0 && first != 1) {
    throw std::runtime_error("frame numbering must start at 0 or 1 in " + dir.string());
  }
  long long expect = first;
  for (const auto& [n, p] : numbered) {
    if (n != expect) {
      throw std::runtime_error("numbering gap: frame " + std::to_string(expect) + " missing in " +
                               dir.string());
    }
    files_.push_back(p);
    ++expect;
  }
  dims_ = read_dims(files_.front());
  for (const fs::path& p : files_) {
    if (read_dims(p) != dims_) throw std::runtime_error("frame size mismatch: " + p.string());
  }
}

GrayFrame DirectoryFrameSource::load(int frame) const {
  GrayFrame f = read_gray(file(frame));
  if (f.dims() != dims_) throw std::runtime_error("frame size mismatch: " + file(frame).string());
  return f;
}

// --- configuration -------------------------------------------------------------------------------

std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source) {
  std::vector<KeyValue> out;
  for_each_line(text, [&](std::string_view line, int number) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, number, "expected key=value");
    KeyValue kv{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))),
                number};
    if (kv.key.empty()) throw ParseError(source, number, "empty key");
    out.push_back(std::move(kv));
  });
  return out;
}

namespace {

using Setter = void (*)(RctParams&, std::string_view);

int to_int(std::string_view v) {
  const long long n = parse_int(v);
  if (n < -1'000'000'000 || n > 1'000'000'000) throw std::invalid_argument("integer out of range");
  return static_cast<int>(n);
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"h_init", [](RctParams& p, std::string_view v) { p.h_init = parse_double(v); }},
      {"beta", [](RctParams& p, std::string_view v) { p.beta = parse_double(v); }},
      {"delta", [](RctParams& p, std::string_view v) { p.delta = to_int(v); }},
      {"delta_m", [](RctParams& p, std::string_view v) { p.delta_m = to_int(v); }},
      {"h_u", [](RctParams& p, std::string_view v) { p.h_u = parse_double(v); }},
      {"d_max", [](RctParams& p, std::string_view v) { p.d_max = to_int(v); }},
      {"h_q", [](RctParams& p, std::string_view v) { p.h_q = parse_double(v); }},
      {"h_f", [](RctParams& p, std::string_view v) { p.h_f = parse_double(v); }},
      {"omega", [](RctParams& p, std::string_view v) { p.omega = parse_double(v); }},
      {"alpha", [](RctParams& p, std::string_view v) { p.alpha = parse_double(v); }},
      {"delta_n", [](RctParams& p, std::string_view v) { p.delta_n = to_int(v); }},
      {"use_medianflow", [](RctParams& p, std::string_view v) { p.use_medianflow = parse_bool(v); }},
      {"use_joining", [](RctParams& p, std::string_view v) { p.use_joining = parse_bool(v); }},
      {"use_size_filter",
       [](RctParams& p, std::string_view v) { p.use_size_filter = parse_bool(v); }},
      {"trim_mode",
       [](RctParams& p, std::string_view v) { p.trim_mode = trim_mode_from_string(std::string(v)); }},
      {"kalman.q_pos",
       [](RctParams& p, std::string_view v) {
         p.kalman.transition_cov(kalman::kX, kalman::kX) =
             p.kalman.transition_cov(kalman::kY, kalman::kY) = parse_double(v);
       }},
      {"kalman.q_vel",
       [](RctParams& p, std::string_view v) {
         p.kalman.transition_cov(kalman::kVx, kalman::kVx) =
             p.kalman.transition_cov(kalman::kVy, kalman::kVy) = parse_double(v);
       }},
      {"kalman.q_size",
       [](RctParams& p, std::string_view v) {
         p.kalman.transition_cov(kalman::kW, kalman::kW) =
             p.kalman.transition_cov(kalman::kH, kalman::kH) = parse_double(v);
       }},
      {"kalman.r_pos",
       [](RctParams& p, std::string_view v) {
         p.kalman.observation_cov(0, 0) = p.kalman.observation_cov(1, 1) = parse_double(v);
       }},
      {"kalman.r_size",
       [](RctParams& p, std::string_view v) {
         p.kalman.observation_cov(2, 2) = p.kalman.observation_cov(3, 3) = parse_double(v);
       }},
      {"kalman.p0",
       [](RctParams& p, std::string_view v) {
         p.kalman.initial_cov = kalman::StateMatrix::Identity() * parse_double(v);
       }},
      {"flow.grid", [](RctParams& p, std::string_view v) { p.flow.grid = to_int(v); }},
      {"flow.window", [](RctParams& p, std::string_view v) { p.flow.window = to_int(v); }},
      {"flow.levels", [](RctParams& p, std::string_view v) { p.flow.levels = to_int(v); }},
      {"flow.max_iterations",
       [](RctParams& p, std::string_view v) { p.flow.max_iterations = to_int(v); }},
      {"flow.epsilon", [](RctParams& p, std::string_view v) { p.flow.epsilon = parse_double(v); }},
      {"flow.max_fb_error",
       [](RctParams& p, std::string_view v) { p.flow.max_fb_error = parse_double(v); }},
      {"flow.min_points", [](RctParams& p, std::string_view v) { p.flow.min_points = to_int(v); }},
      {"flow.min_eigenvalue",
       [](RctParams& p, std::string_view v) { p.flow.min_eigenvalue = parse_double(v); }},
      {"flow.max_residual",
       [](RctParams& p, std::string_view v) { p.flow.max_residual = parse_double(v); }},
  };
  return table;
}

void validate_all(const RctParams& p) {
  p.validate();
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("invalid parameter: ") + name);
  };
  const auto& k = p.kalman;
  positive(k.transition_cov(kalman::kX, kalman::kX), "kalman.q_pos");
  positive(k.transition_cov(kalman::kVx, kalman::kVx), "kalman.q_vel");
  positive(k.transition_cov(kalman::kW, kalman::kW), "kalman.q_size");
  positive(k.observation_cov(0, 0), "kalman.r_pos");
  positive(k.observation_cov(2, 2), "kalman.r_size");
  positive(k.initial_cov(0, 0), "kalman.p0");
  const auto& f = p.flow;
  if (f.grid < 2) throw std::invalid_argument("invalid parameter: flow.grid");
  if (f.window < 3 || f.window % 2 == 0) throw std::invalid_argument("invalid parameter: flow.window");
  if (f.levels < 1 || f.levels > 8) throw std::invalid_argument("invalid parameter: flow.levels");
  if (f.max_iterations < 1) throw std::invalid_argument("invalid parameter: flow.max_iterations");
  positive(f.epsilon, "flow.epsilon");
  positive(f.max_fb_error, "flow.max_fb_error");
  if (f.min_points < 1) throw std::invalid_argument("invalid parameter: flow.min_points");
  positive(f.min_eigenvalue, "flow.min_eigenvalue");
  positive(f.max_residual, "flow.max_residual");
}

}  // namespace

void apply_setting(RctParams& params, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw std::invalid_argument("unknown setting: " + key);
  try {
    it->second(params, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(key + ": " + e.what());
  }
}

void apply_override(RctParams& params, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("expected key=value: " + assignment);
  apply_setting(params, std::string(trim(std::string_view(assignment).substr(0, eq))),
                std::string(trim(std::string_view(assignment).substr(eq + 1))));
  validate_all(params);
}

RctParams parse_config(std::string_view text, RctParams base, const std::string& source) {
  for (const KeyValue& kv : parse_key_values(text, source)) {
    try {
      apply_setting(base, kv.key, kv.value);
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, kv.line, e.what());
    }
  }
  try {
    validate_all(base);
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 0, e.what());
  }
  return base;
}

RctParams read_config(const fs::path& path, RctParams base) {
  return parse_config(read_file(path), std::move(base), path.string());
}

std::string format_config(const RctParams& p) {
  std::string out;
  auto line = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  auto num = [](double v) { return format_double(v); };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  line("h_init", num(p.h_init));
  line("beta", num(p.beta));
  line("delta", std::to_string(p.delta));
  line("delta_m", std::to_string(p.delta_m));
  line("h_u", num(p.h_u));
  line("d_max", std::to_string(p.d_max));
  line("h_q", num(p.h_q));
  line("h_f", num(p.h_f));
  line("omega", num(p.omega));
  line("alpha", num(p.alpha));
  line("delta_n", std::to_string(p.delta_n));
  line("use_medianflow", flag(p.use_medianflow));
  line("use_joining", flag(p.use_joining));
  line("use_size_filter", flag(p.use_size_filter));
  line("trim_mode", to_string(p.trim_mode));
  const auto& k = p.kalman;
  line("kalman.q_pos", num(k.transition_cov(kalman::kX, kalman::kX)));
  line("kalman.q_vel", num(k.transition_cov(kalman::kVx, kalman::kVx)));
  line("kalman.q_size", num(k.transition_cov(kalman::kW, kalman::kW)));
  line("kalman.r_pos", num(k.observation_cov(0, 0)));
  line("kalman.r_size", num(k.observation_cov(2, 2)));
  line("kalman.p0", num(k.initial_cov(0, 0)));
  const auto& f = p.flow;
  line("flow.grid", std::to_string(f.grid));
  line("flow.window", std::to_string(f.window));
  line("flow.levels", std::to_string(f.levels));
  line("flow.max_iterations", std::to_string(f.max_iterations));
  line("flow.epsilon", num(f.epsilon));
  line("flow.max_fb_error", num(f.max_fb_error));
  line("flow.min_points", std::to_string(f.min_points));
  line("flow.min_eigenvalue", num(f.min_eigenvalue));
  line("flow.max_residual", num(f.max_residual));
  return out;
}

}  // namespace rct::io
