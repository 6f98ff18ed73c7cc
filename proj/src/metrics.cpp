#include "rct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rct/geometry.hpp"

namespace rct::metrics {

namespace {

// Shortest-augmenting-path Hungarian method on a square matrix. Returns the
// column assigned to each row.
std::vector<int> hungarian_square(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of(n, -1);
  for (int j = 1; j <= n; ++j) col_of[p[j] - 1] = j - 1;
  return col_of;
}

}  // namespace

std::vector<std::pair<int, int>> assign(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  std::vector<std::pair<int, int>> out;
  if (rows == 0 || cols == 0) return out;

  // Forbidden and padding cells cost `big`, which exceeds any difference in
  // admissible totals, so fewer big cells (more real matches) always wins.
  double spread = 0.0;
  bool any = false;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double x = cost(r, c);
      if (std::isnan(x)) throw std::invalid_argument("assignment cost is NaN");
      if (x == kForbidden) continue;
      if (!std::isfinite(x)) throw std::invalid_argument("assignment cost is not finite");
      spread += std::abs(x);
      any = true;
    }
  }
  if (!any) return out;
  const double big = 2.0 * spread + 1.0;
  const int n = std::max(rows, cols);
  Eigen::MatrixXd square = Eigen::MatrixXd::Constant(n, n, big);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (cost(r, c) != kForbidden) square(r, c) = cost(r, c);
    }
  }
  const std::vector<int> col_of = hungarian_square(square);
  for (int r = 0; r < rows; ++r) {
    const int c = col_of[r];
    if (c < cols && cost(r, c) != kForbidden) out.emplace_back(r, c);
  }
  return out;
}

double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<std::pair<int, int>>& pairs) {
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += cost(r, c);
  return total;
}

// --- CLEAR MOT ----------------------------------------------------------------------

ClearMot clearmot(const TrackSet& gt, const TrackSet& pred) {
  ClearMot m;
  const auto gt_frames = rows_by_frame(gt);
  const auto pred_frames = rows_by_frame(pred);
  std::vector<int> frames;
  for (const auto& [f, _] : gt_frames) frames.push_back(f);
  for (const auto& [f, _] : pred_frames) frames.push_back(f);
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());

  std::map<int, int> last_match;  // gt id -> pred id it was last matched to
  const std::vector<MotRow> none;
  for (int f : frames) {
    const auto gi = gt_frames.find(f);
    const auto pi = pred_frames.find(f);
    const std::vector<MotRow>& g = gi != gt_frames.end() ? gi->second : none;
    const std::vector<MotRow>& p = pi != pred_frames.end() ? pi->second : none;
    std::vector<int> g_match(g.size(), -1);
    std::vector<bool> p_taken(p.size(), false);

    // Keep existing correspondences while they stay close enough.
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto it = last_match.find(g[i].id);
      if (it == last_match.end()) continue;
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j].id == it->second && !p_taken[j] && diou(g[i].box, p[j].box) <= kKeepDiou) {
          g_match[i] = static_cast<int>(j);
          p_taken[j] = true;
        }
      }
    }

    std::vector<int> gr, pc;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g_match[i] < 0) gr.push_back(static_cast<int>(i));
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (!p_taken[j]) pc.push_back(static_cast<int>(j));
    }
    Eigen::MatrixXd cost(gr.size(), pc.size());
    for (std::size_t a = 0; a < gr.size(); ++a) {
      for (std::size_t b = 0; b < pc.size(); ++b) {
        const double d = diou(g[gr[a]].box, p[pc[b]].box);
        cost(a, b) = d <= kMatchDiou ? d : kForbidden;
      }
    }
    for (const auto& [a, b] : assign(cost)) {
      const int i = gr[a], j = pc[b];
      g_match[i] = j;
      p_taken[j] = true;
      const auto it = last_match.find(g[i].id);
      if (it != last_match.end() && it->second != p[j].id) ++m.id_switches;
    }

    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g_match[i] >= 0) {
        ++m.matches;
        last_match[g[i].id] = p[g_match[i]].id;
      } else {
        ++m.misses;
      }
    }
    for (bool t : p_taken) {
      if (!t) ++m.false_positives;
    }
    m.num_gt += static_cast<int>(g.size());
  }

  const double errors = m.false_positives + m.misses + m.id_switches;
  m.mota = 1.0 - errors / std::max(1, m.num_gt);
  m.precision = m.matches + m.false_positives == 0
                    ? 1.0
                    : static_cast<double>(m.matches) / (m.matches + m.false_positives);
  m.recall = m.num_gt == 0 ? 1.0 : static_cast<double>(m.matches) / m.num_gt;
  return m;
}

// --- HOTA -------------------------------------------------------------------------------

std::vector<double> hota_thresholds() {
  std::vector<double> t;
  for (int k = 0; k <= 10; ++k) t.push_back(1.25 + 0.025 * k);
  return t;
}

namespace {

// DIoU mapped to a similarity in (0, 1]; pairs beyond the loosest threshold
// get 0.
double similarity(const Box& a, const Box& b) {
  const double d = diou(a, b);
  return d <= kKeepDiou ? 1.0 - d / 2.0 : 0.0;
}

}  // namespace

HotaResult hota(const TrackSet& gt, const TrackSet& pred) {
  const std::vector<double> taus = hota_thresholds();
  const std::size_t nt = taus.size();
  HotaResult out;
  out.per_threshold.assign(nt, 0.0);
  if (gt.empty() && pred.empty()) {
    out.hota = out.det_a = out.ass_a = 1.0;
    out.per_threshold.assign(nt, 1.0);
    return out;
  }
  if (gt.empty() || pred.empty()) return out;

  // Dense id indices.
  std::map<int, int> gidx, pidx;
  for (const MotRow& r : gt) gidx.emplace(r.id, 0);
  for (const MotRow& r : pred) pidx.emplace(r.id, 0);
  int k = 0;
  for (auto& [id, i] : gidx) i = k++;
  k = 0;
  for (auto& [id, i] : pidx) i = k++;
  const int ng = static_cast<int>(gidx.size());
  const int np = static_cast<int>(pidx.size());

  const auto gt_frames = rows_by_frame(gt);
  const auto pred_frames = rows_by_frame(pred);

  struct Frame {
    std::vector<int> g, p;
    Eigen::MatrixXd sim;
  };
  std::vector<Frame> frames;
  Eigen::VectorXd gt_count = Eigen::VectorXd::Zero(ng);
  Eigen::VectorXd pred_count = Eigen::VectorXd::Zero(np);
  Eigen::MatrixXd potential = Eigen::MatrixXd::Zero(ng, np);

  std::vector<int> all_frames;
  for (const auto& [f, _] : gt_frames) all_frames.push_back(f);
  for (const auto& [f, _] : pred_frames) all_frames.push_back(f);
  std::sort(all_frames.begin(), all_frames.end());
  all_frames.erase(std::unique(all_frames.begin(), all_frames.end()), all_frames.end());

  for (int f : all_frames) {
    Frame fr;
    std::vector<Box> gb, pb;
    if (const auto it = gt_frames.find(f); it != gt_frames.end()) {
      for (const MotRow& r : it->second) {
        fr.g.push_back(gidx[r.id]);
        gb.push_back(r.box);
      }
    }
    if (const auto it = pred_frames.find(f); it != pred_frames.end()) {
      for (const MotRow& r : it->second) {
        fr.p.push_back(pidx[r.id]);
        pb.push_back(r.box);
      }
    }
    fr.sim = Eigen::MatrixXd::Zero(fr.g.size(), fr.p.size());
    for (std::size_t i = 0; i < gb.size(); ++i) {
      for (std::size_t j = 0; j < pb.size(); ++j) fr.sim(i, j) = similarity(gb[i], pb[j]);
    }
    for (int g : fr.g) gt_count(g) += 1.0;
    for (int p : fr.p) pred_count(p) += 1.0;
    if (!fr.g.empty() && !fr.p.empty()) {
      const Eigen::VectorXd row_sum = fr.sim.rowwise().sum();
      const Eigen::RowVectorXd col_sum = fr.sim.colwise().sum();
      for (Eigen::Index i = 0; i < fr.sim.rows(); ++i) {
        for (Eigen::Index j = 0; j < fr.sim.cols(); ++j) {
          const double s = fr.sim(i, j);
          if (s > 0.0) potential(fr.g[i], fr.p[j]) += s / (row_sum(i) + col_sum(j) - s);
        }
      }
    }
    frames.push_back(std::move(fr));
  }

  Eigen::MatrixXd alignment(ng, np);
  for (int g = 0; g < ng; ++g) {
    for (int p = 0; p < np; ++p) {
      alignment(g, p) = potential(g, p) / (gt_count(g) + pred_count(p) - potential(g, p));
    }
  }

  std::vector<double> tp(nt, 0.0);
  std::vector<Eigen::MatrixXd> match_count(nt, Eigen::MatrixXd::Zero(ng, np));
  const double eps = 1e-12;
  for (const Frame& fr : frames) {
    if (fr.g.empty() || fr.p.empty()) continue;
    Eigen::MatrixXd cost(fr.g.size(), fr.p.size());
    for (Eigen::Index i = 0; i < cost.rows(); ++i) {
      for (Eigen::Index j = 0; j < cost.cols(); ++j) {
        cost(i, j) = -alignment(fr.g[i], fr.p[j]) * fr.sim(i, j);
      }
    }
    for (const auto& [i, j] : assign(cost)) {
      const double s = fr.sim(i, j);
      for (std::size_t t = 0; t < nt; ++t) {
        if (s > 0.0 && s >= 1.0 - taus[t] / 2.0 - eps) {
          tp[t] += 1.0;
          match_count[t](fr.g[i], fr.p[j]) += 1.0;
        }
      }
    }
  }

  const double num_gt = static_cast<double>(gt.size());
  const double num_pred = static_cast<double>(pred.size());
  double det_sum = 0.0, ass_sum = 0.0, hota_sum = 0.0;
  for (std::size_t t = 0; t < nt; ++t) {
    const double fn = num_gt - tp[t];
    const double fp = num_pred - tp[t];
    const double det_a = tp[t] / std::max(1.0, tp[t] + fn + fp);
    double ass = 0.0;
    const Eigen::MatrixXd& mc = match_count[t];
    for (int g = 0; g < ng; ++g) {
      for (int p = 0; p < np; ++p) {
        const double c = mc(g, p);
        if (c > 0.0) ass += c * (c / (gt_count(g) + pred_count(p) - c));
      }
    }
    const double ass_a = ass / std::max(1.0, tp[t]);
    const double h = std::sqrt(det_a * ass_a);
    out.per_threshold[t] = h;
    det_sum += det_a;
    ass_sum += ass_a;
    hota_sum += h;
  }
  out.hota = hota_sum / nt;
  out.det_a = det_sum / nt;
  out.ass_a = ass_sum / nt;
  return out;
}

EvalReport evaluate(const TrackSet& gt, const TrackSet& pred) {
  const ClearMot c = clearmot(gt, pred);
  EvalReport r;
  r.hota = hota(gt, pred).hota;
  r.mota = c.mota;
  r.id_switches = c.id_switches;
  r.false_positives = c.false_positives;
  r.misses = c.misses;
  r.matches = c.matches;
  r.precision = c.precision;
  r.recall = c.recall;
  return r;
}

}  // namespace rct::metrics
