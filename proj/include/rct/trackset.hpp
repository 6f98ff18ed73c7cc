#pragma once

#include <map>
#include <vector>

#include "rct/geometry.hpp"

namespace rct {

struct Track;

/// One row of a MOT-style track file.
struct MotRow {
  int frame = 0;
  int id = 0;
  Box box;
  double confidence = 1.0;

  friend bool operator==(const MotRow&, const MotRow&) = default;
};

/// Ground truth or predictions for one video, as flat rows.
using TrackSet = std::vector<MotRow>;

/// Sorts by (frame, id) and throws std::invalid_argument on a duplicate
/// (frame, id) pair.
void normalize(TrackSet& rows);

/// Rows grouped per frame, preserving row order inside a frame.
std::map<int, std::vector<MotRow>> rows_by_frame(const TrackSet& rows);

/// Flattens finalized tracks; inferred boxes carry confidence 0.
TrackSet to_track_set(const std::vector<Track>& tracks);

}  // namespace rct
