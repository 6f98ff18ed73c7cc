#include "rct/trackset.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "rct/tracker.hpp"

namespace rct {

void normalize(TrackSet& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const MotRow& a, const MotRow& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].frame == rows[i - 1].frame && rows[i].id == rows[i - 1].id) {
      throw std::invalid_argument("duplicate box for id " + std::to_string(rows[i].id) +
                                  " on frame " + std::to_string(rows[i].frame));
    }
  }
}

std::map<int, std::vector<MotRow>> rows_by_frame(const TrackSet& rows) {
  std::map<int, std::vector<MotRow>> out;
  for (const MotRow& r : rows) out[r.frame].push_back(r);
  return out;
}

TrackSet to_track_set(const std::vector<Track>& tracks) {
  TrackSet rows;
  for (const Track& t : tracks) {
    for (const TrackBox& b : t.boxes) {
      rows.push_back({b.frame, t.id, b.box, b.source == Source::Detection ? b.confidence : 0.0});
    }
  }
  normalize(rows);
  return rows;
}

}  // namespace rct
