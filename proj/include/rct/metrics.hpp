#pragma once

#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rct/trackset.hpp"

namespace rct::metrics {

/// Marks a pair that may not be matched.
inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

/// Optimal bipartite assignment. Among matchings that use only admissible
/// (finite) entries, returns one of maximum cardinality and, among those,
/// minimum total cost. Pairs are (row, col), sorted by row.
std::vector<std::pair<int, int>> assign(const Eigen::MatrixXd& cost);

/// Sum of cost(row, col) over the pairs.
double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<std::pair<int, int>>& pairs);

/// DIoU below which a new gt/prediction pair may match.
inline constexpr double kMatchDiou = 1.25;
/// DIoU up to which an existing correspondence is kept.
inline constexpr double kKeepDiou = 1.5;

struct ClearMot {
  double mota = 0.0;
  int id_switches = 0;
  int false_positives = 0;
  int misses = 0;
  int matches = 0;
  int num_gt = 0;
  double precision = 1.0;
  double recall = 1.0;
};

ClearMot clearmot(const TrackSet& gt, const TrackSet& pred);

/// The DIoU thresholds HOTA is averaged over: 1.25, 1.275, ..., 1.5.
std::vector<double> hota_thresholds();

struct HotaResult {
  double hota = 0.0;
  double det_a = 0.0;
  double ass_a = 0.0;
  std::vector<double> per_threshold;  // HOTA at each of hota_thresholds()
};

HotaResult hota(const TrackSet& gt, const TrackSet& pred);

struct EvalReport {
  double hota = 0.0;
  double mota = 0.0;
  int id_switches = 0;
  int false_positives = 0;
  int misses = 0;
  int matches = 0;
  double precision = 1.0;
  double recall = 1.0;
};

EvalReport evaluate(const TrackSet& gt, const TrackSet& pred);

}  // namespace rct::metrics
