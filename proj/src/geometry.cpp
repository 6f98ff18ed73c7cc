#include "rct/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace rct {

namespace {

double overlap_1d(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

double intersection_area(const Box& a, const Box& b) {
  return overlap_1d(a.x, a.right(), b.x, b.right()) *
         overlap_1d(a.y, a.bottom(), b.y, b.bottom());
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double diou(const Box& a, const Box& b) {
  if (a == b) return 0.0;
  const double ex = std::max(a.right(), b.right()) - std::min(a.x, b.x);
  const double ey = std::max(a.bottom(), b.bottom()) - std::min(a.y, b.y);
  const double g2 = ex * ex + ey * ey;
  if (!(g2 > 0.0)) return 0.0;
  const Point ca = center(a);
  const Point cb = center(b);
  const double dx = ca.x - cb.x;
  const double dy = ca.y - cb.y;
  return 1.0 - iou(a, b) + (dx * dx + dy * dy) / g2;
}

Point center(const Box& b) { return {b.x + b.w / 2.0, b.y + b.h / 2.0}; }

bool contains_point(const Box& b, Point p) {
  return p.x >= b.x && p.x <= b.right() && p.y >= b.y && p.y <= b.bottom();
}

std::pair<double, double> offscreen_fraction(const Box& b, FrameDims dims) {
  const double vis_w = overlap_1d(b.x, b.right(), 0.0, dims.width);
  const double vis_h = overlap_1d(b.y, b.bottom(), 0.0, dims.height);
  // Overhang past each edge, computed directly so onscreen boxes give exact 0.
  double off_w = std::min(b.w, std::max(0.0, -b.x) + std::max(0.0, b.right() - dims.width));
  double off_h = std::min(b.h, std::max(0.0, -b.y) + std::max(0.0, b.bottom() - dims.height));
  // Not visible at all: the whole box is offscreen along both axes.
  if (vis_w <= 0.0 || vis_h <= 0.0) {
    off_w = b.w;
    off_h = b.h;
  }
  return {std::max(0.0, off_w) / dims.width, std::max(0.0, off_h) / dims.height};
}

double offscreen_score(const Box& b, FrameDims dims) {
  const auto [fx, fy] = offscreen_fraction(b, dims);
  return fx + fy;
}

Box enlarge(const Box& b, double pct) {
  const double s = 1.0 + pct / 100.0;
  return box_from_center(center(b), b.w * s, b.h * s);
}

bool inside_frame(const Box& b, FrameDims dims) {
  return b.x >= 0.0 && b.y >= 0.0 && b.right() <= dims.width &&
         b.bottom() <= dims.height;
}

double visible_area(const Box& b, FrameDims dims) {
  return overlap_1d(b.x, b.right(), 0.0, dims.width) *
         overlap_1d(b.y, b.bottom(), 0.0, dims.height);
}

Box box_from_center(Point c, double w, double h) {
  return {c.x - w / 2.0, c.y - h / 2.0, w, h};
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace rct
