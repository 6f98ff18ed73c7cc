#include "rct/medianflow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rct::medianflow {

namespace {

float sample(const GrayFrame& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = std::min(static_cast<int>(x), img.width - 2 < 0 ? 0 : img.width - 2);
  const int y0 = std::min(static_cast<int>(y), img.height - 2 < 0 ? 0 : img.height - 2);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const float fx = static_cast<float>(x - x0);
  const float fy = static_cast<float>(y - y0);
  const float top = img.at(x0, y0) * (1.0f - fx) + img.at(x1, y0) * fx;
  const float bot = img.at(x0, y1) * (1.0f - fx) + img.at(x1, y1) * fx;
  return top * (1.0f - fy) + bot * fy;
}

bool in_bounds(const GrayFrame& img, double x, double y) {
  return x >= 0.0 && y >= 0.0 && x <= img.width - 1 && y <= img.height - 1;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}

}  // namespace

Pyramid pyramid(const GrayFrame& frame, int levels) {
  if (levels < 1) throw std::invalid_argument("pyramid needs at least one level");
  const int need = 1 << (levels - 1);
  if (frame.width < need || frame.height < need) {
    throw std::invalid_argument("frame too small for requested pyramid levels");
  }
  Pyramid out;
  out.reserve(levels);
  out.push_back(frame);
  for (int l = 1; l < levels; ++l) {
    const GrayFrame& src = out.back();
    GrayFrame dst(src.width / 2, src.height / 2);
    for (int y = 0; y < dst.height; ++y) {
      for (int x = 0; x < dst.width; ++x) {
        dst.at(x, y) = 0.25f * (src.at(2 * x, 2 * y) + src.at(2 * x + 1, 2 * y) +
                                src.at(2 * x, 2 * y + 1) + src.at(2 * x + 1, 2 * y + 1));
      }
    }
    out.push_back(std::move(dst));
  }
  return out;
}

std::optional<Point> lk_track_point(const Pyramid& prev, const Pyramid& next, Point p,
                                    const MedianFlowConfig& cfg) {
  if (prev.empty() || prev.size() != next.size()) return std::nullopt;
  if (!in_bounds(prev[0], p.x, p.y)) return std::nullopt;
  const int levels = static_cast<int>(prev.size());
  const int r = cfg.window / 2;
  const int n = (2 * r + 1) * (2 * r + 1);
  std::vector<float> tmpl(n), gx(n), gy(n);

  double dx = 0.0;
  double dy = 0.0;
  for (int level = levels - 1; level >= 0; --level) {
    const GrayFrame& I = prev[level];
    const GrayFrame& J = next[level];
    const double scale = 1.0 / (1 << level);
    const double ux = p.x * scale;
    const double uy = p.y * scale;

    double gxx = 0.0, gxy = 0.0, gyy = 0.0;
    int k = 0;
    for (int oy = -r; oy <= r; ++oy) {
      for (int ox = -r; ox <= r; ++ox, ++k) {
        const double sx = ux + ox;
        const double sy = uy + oy;
        tmpl[k] = sample(I, sx, sy);
        gx[k] = 0.5f * (sample(I, sx + 1.0, sy) - sample(I, sx - 1.0, sy));
        gy[k] = 0.5f * (sample(I, sx, sy + 1.0) - sample(I, sx, sy - 1.0));
        gxx += gx[k] * gx[k];
        gxy += gx[k] * gy[k];
        gyy += gy[k] * gy[k];
      }
    }
    const double tr = gxx + gyy;
    const double det = gxx * gyy - gxy * gxy;
    const double min_eig = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
    if (min_eig / n < cfg.min_eigenvalue || det <= 0.0) return std::nullopt;

    for (int it = 0; it < cfg.max_iterations; ++it) {
      double bx = 0.0, by = 0.0;
      k = 0;
      for (int oy = -r; oy <= r; ++oy) {
        for (int ox = -r; ox <= r; ++ox, ++k) {
          const double diff = tmpl[k] - sample(J, ux + dx + ox, uy + dy + oy);
          bx += diff * gx[k];
          by += diff * gy[k];
        }
      }
      const double stepx = (gyy * bx - gxy * by) / det;
      const double stepy = (gxx * by - gxy * bx) / det;
      dx += stepx;
      dy += stepy;
      if (!in_bounds(J, ux + dx, uy + dy)) return std::nullopt;
      if (stepx * stepx + stepy * stepy < cfg.epsilon * cfg.epsilon) break;
    }
    if (level > 0) {
      dx *= 2.0;
      dy *= 2.0;
    }
  }

  const Point out{p.x + dx, p.y + dy};
  if (!in_bounds(next[0], out.x, out.y)) return std::nullopt;
  double resid = 0.0;
  int k = 0;
  for (int oy = -r; oy <= r; ++oy) {
    for (int ox = -r; ox <= r; ++ox, ++k) {
      resid += std::abs(sample(prev[0], p.x + ox, p.y + oy) -
                        sample(next[0], out.x + ox, out.y + oy));
    }
  }
  if (resid / n > cfg.max_residual) return std::nullopt;
  return out;
}

SotResult track_box(const Pyramid& prev, const Pyramid& next, const Box& box,
                    const MedianFlowConfig& cfg, TrackDetail* detail) {
  if (prev.empty() || next.empty() || box.degenerate()) return SotResult::failure();
  const FrameDims dims = prev[0].dims();
  if (visible_area(box, dims) <= 0.0) return SotResult::failure();

  std::vector<FlowPoint> points;
  points.reserve(static_cast<std::size_t>(cfg.grid) * cfg.grid);
  for (int j = 0; j < cfg.grid; ++j) {
    for (int i = 0; i < cfg.grid; ++i) {
      FlowPoint fp;
      fp.src = {box.x + (i + 0.5) * box.w / cfg.grid, box.y + (j + 0.5) * box.h / cfg.grid};
      if (const auto fwd = lk_track_point(prev, next, fp.src, cfg)) {
        if (const auto back = lk_track_point(next, prev, *fwd, cfg)) {
          fp.dst = *fwd;
          fp.fb_error = distance(fp.src, *back);
          fp.valid = std::isfinite(fp.fb_error);
        }
      }
      points.push_back(fp);
    }
  }

  std::vector<double> errors;
  for (const FlowPoint& fp : points) {
    if (fp.valid) errors.push_back(fp.fb_error);
  }
  TrackDetail local;
  TrackDetail& d = detail ? *detail : local;
  d = TrackDetail{};
  d.points = points;
  if (static_cast<int>(errors.size()) < cfg.min_points) return SotResult::failure();

  const double fb_median = median(errors);
  std::vector<const FlowPoint*> kept;
  for (const FlowPoint& fp : points) {
    if (fp.valid && fp.fb_error <= fb_median) kept.push_back(&fp);
  }
  d.kept = static_cast<int>(kept.size());
  std::vector<double> kept_err;
  for (const FlowPoint* fp : kept) kept_err.push_back(fp->fb_error);
  d.median_fb_error = median(kept_err);
  if (d.kept < cfg.min_points || d.median_fb_error > cfg.max_fb_error) {
    return SotResult::failure();
  }

  std::vector<double> mx, my, ratios;
  for (const FlowPoint* fp : kept) {
    mx.push_back(fp->dst.x - fp->src.x);
    my.push_back(fp->dst.y - fp->src.y);
  }
  for (std::size_t a = 0; a < kept.size(); ++a) {
    for (std::size_t b = a + 1; b < kept.size(); ++b) {
      const double before = distance(kept[a]->src, kept[b]->src);
      if (before > 1e-9) ratios.push_back(distance(kept[a]->dst, kept[b]->dst) / before);
    }
  }
  const double scale = ratios.empty() ? 1.0 : median(ratios);
  d.scale = scale;
  if (!(scale > 0.0) || !std::isfinite(scale)) return SotResult::failure();

  const Point c = center(box);
  const Point moved{c.x + median(mx), c.y + median(my)};
  return SotResult{box_from_center(moved, box.w * scale, box.h * scale)};
}

SotResult track_box(const GrayFrame& prev, const GrayFrame& next, const Box& box,
                    const MedianFlowConfig& cfg) {
  return track_box(pyramid(prev, cfg.levels), pyramid(next, cfg.levels), box, cfg);
}

std::shared_ptr<const Pyramid> PyramidCache::get(int frame) {
  return cache_.get(frame, [this](int f) { return pyramid(frames_.load(f), cfg_.levels); });
}

SotResult PyramidCache::track(int from_frame, int to_frame, const Box& box) {
  const auto a = get(from_frame);
  const auto b = get(to_frame);
  return track_box(*a, *b, box, cfg_);
}

}  // namespace rct::medianflow
