#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rct/image.hpp"
#include "rct/tracker.hpp"
#include "rct/trackset.hpp"

namespace rct::io {

namespace fs = std::filesystem;

/// Malformed input. `line()` is 1-based, or 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

// --- detections: `frame,x,y,w,h,confidence` ---------------------------------

std::vector<Detection> parse_detections(std::string_view text, const std::string& source = "input");
std::vector<Detection> read_detections(const fs::path& path);
std::string format_detections(const std::vector<Detection>& dets);

// --- MOT rows: `frame,id,x,y,w,h,conf,-1,-1,-1` ---------------------------------

/// Accepts six or more fields per row; the confidence column is optional
/// and further columns are ignored. Duplicate (frame, id) pairs are errors.
TrackSet parse_mot(std::string_view text, const std::string& source = "input");
TrackSet read_mot(const fs::path& path);
/// Sorted by (frame, id), six decimals.
std::string format_mot(TrackSet rows);
void write_mot(const fs::path& path, TrackSet rows);
/// Rejects tracks that are not contiguous or still hold MISSING boxes.
void write_tracks(const fs::path& path, const std::vector<Track>& tracks);

/// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);

// --- images -------------------------------------------------------------------

/// Integer luma in [0, 1]: (299 R + 587 G + 114 B + 500) / 1000 / maxval.
float luma(unsigned r, unsigned g, unsigned b, unsigned maxval = 255);

/// PNG, binary PGM (P5) or binary PPM (P6), chosen by file signature.
RgbImage read_rgb(const fs::path& path);
GrayFrame read_gray(const fs::path& path);
FrameDims read_dims(const fs::path& path);
GrayFrame to_gray(const RgbImage& img);
void write_png(const fs::path& path, const RgbImage& img);
void write_pgm(const fs::path& path, const GrayFrame& frame);

/// Numbered image files in a directory (e.g. 000001.png); numbering must be
/// contiguous and all frames must share one size. Frames are decoded on
/// demand.
class DirectoryFrameSource : public FrameSource {
 public:
  explicit DirectoryFrameSource(const fs::path& dir);
  int count() const override { return static_cast<int>(files_.size()); }
  FrameDims dims() const override { return dims_; }
  GrayFrame load(int frame) const override;
  const fs::path& file(int frame) const { return files_.at(frame - 1); }

 private:
  std::vector<fs::path> files_;
  FrameDims dims_;
};

// --- configuration ---------------------------------------------------------------

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

/// `key = value` lines; `#` starts a comment; blank lines ignored.
std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source = "input");

/// Applies one setting. Throws std::invalid_argument for unknown keys or
/// unparsable values.
void apply_setting(RctParams& params, const std::string& key, const std::string& value);

/// Parses `key=value` (the `--set` syntax) and applies it.
void apply_override(RctParams& params, const std::string& assignment);

/// Parses a config file on top of `base` and validates the result.
RctParams parse_config(std::string_view text, RctParams base = {},
                       const std::string& source = "input");
RctParams read_config(const fs::path& path, RctParams base = {});

/// Every setting, one per line, in a form parse_config reads back exactly.
std::string format_config(const RctParams& params);

/// Shortest text that parses back to the same double.
std::string format_double(double v);
/// Strict number parsing (whole string, finite).
double parse_double(std::string_view s);
long long parse_int(std::string_view s);
bool parse_bool(std::string_view s);

}  // namespace rct::io
