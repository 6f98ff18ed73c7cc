#pragma once

#include <utility>

namespace rct {

/// Axis-aligned box, top-left corner plus extent, in pixels.
///
/// Boxes are continuous and may lie partially or fully outside the frame.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  bool degenerate() const { return !(w > 0.0) || !(h > 0.0); }

  friend bool operator==(const Box&, const Box&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct FrameDims {
  int width = 0;
  int height = 0;

  bool valid() const { return width > 0 && height > 0; }
  friend bool operator==(const FrameDims&, const FrameDims&) = default;
};

double intersection_area(const Box& a, const Box& b);

/// Intersection over union; 0 when both boxes have zero area.
double iou(const Box& a, const Box& b);

/// Distance-IoU: 1 - IoU + |C(a) - C(b)|^2 / g^2, where g is the diagonal of
/// the smallest box enclosing both. Lower is better, range [0, 2).
double diou(const Box& a, const Box& b);

Point center(const Box& b);

/// Closed-boundary containment.
bool contains_point(const Box& b, Point p);

/// Offscreen extent of the box as a fraction of the frame, per axis.
///
/// The offscreen width is the part of the box width that is not visible,
/// i.e. w minus the width of (box ∩ frame); likewise for the height. A box
/// that does not intersect the frame at all is offscreen in both axes.
std::pair<double, double> offscreen_fraction(const Box& b, FrameDims dims);

/// Sum of both offscreen fractions; used to compare "how offscreen" boxes are.
double offscreen_score(const Box& b, FrameDims dims);

/// Scales width and height by (1 + pct/100) about the box center.
Box enlarge(const Box& b, double pct);

/// True when the box lies entirely within [0, width] x [0, height].
bool inside_frame(const Box& b, FrameDims dims);

/// Area of the part of the box that lies inside the frame.
double visible_area(const Box& b, FrameDims dims);

Box box_from_center(Point c, double w, double h);

double distance(Point a, Point b);

}  // namespace rct
